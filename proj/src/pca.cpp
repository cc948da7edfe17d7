#include "breathms/features.hpp"

#include <Eigen/SVD>

#include <algorithm>

namespace breathms {

namespace {

constexpr Index kCovarianceFeatureLimit = 2000;

// Largest-magnitude loading positive, so the basis does not flip between runs.
void fix_signs(Matrix& components) {
  for (Index k = 0; k < components.rows(); ++k) {
    Index arg = 0;
    components.row(k).cwiseAbs().maxCoeff(&arg);
    if (components(k, arg) < 0.0) components.row(k) *= -1.0;
  }
}

}  // namespace

PcaModel fit_pca(const Matrix& x, Index n_components) {
  const Index n = x.rows();
  const Index f = x.cols();
  if (n < 2) throw Error(ErrorCode::InvalidParams, "PCA needs at least two rows");
  if (n_components < 1) throw Error(ErrorCode::InvalidParams, "PCA needs at least one component");

  PcaModel model;
  model.requested = n_components;
  model.mean = x.colwise().mean().transpose();
  const Matrix centered = x.rowwise() - model.mean.transpose();
  const double dof = static_cast<double>(n - 1);

  Vector variances;  // descending
  Matrix basis;      // columns = directions, same order
  if (f <= kCovarianceFeatureLimit) {
    Matrix cov = Matrix::Zero(f, f);
    cov.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose(), 1.0 / dof);
    cov = cov.selfadjointView<Eigen::Lower>();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    variances = eig.eigenvalues().reverse();
    basis = eig.eigenvectors().rowwise().reverse();
    model.total_variance = cov.trace();
  } else {
    Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
    variances = svd.singularValues().array().square() / dof;
    basis = svd.matrixV();
    model.total_variance = centered.squaredNorm() / dof;
  }

  const double top = variances.size() > 0 ? std::max(variances[0], 0.0) : 0.0;
  Index rank = 0;
  while (rank < variances.size() && variances[rank] > top * 1e-12 && variances[rank] > 0.0) ++rank;
  Index k = std::min({n_components, n - 1, f, rank});
  if (k < 1) throw Error(ErrorCode::InvalidParams, "data has no variance to decompose");
  model.reduced = k < n_components;

  model.components = basis.leftCols(k).transpose();
  fix_signs(model.components);
  model.explained_variance = variances.head(k).cwiseMax(0.0);
  return model;
}

Matrix project(const PcaModel& model, const Matrix& x) {
  if (x.cols() != model.mean.size()) throw Error(ErrorCode::WidthMismatch, "PCA width mismatch");
  return (x.rowwise() - model.mean.transpose()) * model.components.transpose();
}

}  // namespace breathms
