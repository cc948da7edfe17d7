#include "breathms/features.hpp"

#include <algorithm>
#include <numeric>

namespace breathms {

SurfStarModel fit_surf_star(const Matrix& x_all, const Eigen::VectorXi& y_all, const SurfStarOptions& options) {
  if (x_all.rows() != y_all.size()) throw Error(ErrorCode::WidthMismatch, "labels do not match rows");
  const Index pos = (y_all.array() == 1).count();
  const Index neg = y_all.size() - pos;
  if (pos < 2 || neg < 2) throw Error(ErrorCode::SingleClass, "SURF* needs at least two samples per class");

  // Deterministic strided subsample for large training sets.
  std::vector<Index> rows;
  const Index n_all = x_all.rows();
  const Index limit = std::max<Index>(options.max_rows, 4);
  if (n_all <= limit) {
    rows.resize(static_cast<std::size_t>(n_all));
    std::iota(rows.begin(), rows.end(), Index{0});
  } else {
    for (Index i = 0; i < limit; ++i) rows.push_back(i * n_all / limit);
  }
  const auto n = static_cast<Index>(rows.size());
  Matrix x(n, x_all.cols());
  Eigen::VectorXi y(n);
  for (Index i = 0; i < n; ++i) {
    x.row(i) = x_all.row(rows[static_cast<std::size_t>(i)]);
    y[i] = y_all[rows[static_cast<std::size_t>(i)]];
  }

  const Index f = x.cols();
  const Vector span = x.colwise().maxCoeff() - x.colwise().minCoeff();
  const Vector inv_span = (span.array() > 0.0).select(span.cwiseInverse(), 0.0);

  Matrix dist = Matrix::Zero(n, n);
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double d = (x.row(i) - x.row(j)).cwiseAbs().sum();
      dist(i, j) = dist(j, i) = d;
      total += d;
    }
  }
  const double threshold = total / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));

  Vector weights = Vector::Zero(f);
  Vector near(f);
  Vector far(f);
  for (Index i = 0; i < n; ++i) {
    near.setZero();
    far.setZero();
    Index n_near = 0;
    Index n_far = 0;
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = dist(i, j);
      if (d == threshold) continue;
      const double sign = y[i] == y[j] ? -1.0 : 1.0;  // hit: -diff, miss: +diff
      auto diff = ((x.row(i) - x.row(j)).cwiseAbs().transpose().array() * inv_span.array()).matrix();
      if (d < threshold) {
        near += sign * diff;
        ++n_near;
      } else {
        far += sign * diff;
        ++n_far;
      }
    }
    if (n_near > 0) weights += near / static_cast<double>(n_near);
    if (n_far > 0) weights -= far / static_cast<double>(n_far);
  }
  weights /= static_cast<double>(n);

  SurfStarModel model;
  model.weights = weights;
  std::vector<Index> order(static_cast<std::size_t>(f));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return weights[a] > weights[b]; });
  const auto k = static_cast<std::size_t>(std::clamp<Index>(options.top_k, 1, f));
  model.selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(model.selected.begin(), model.selected.end());
  return model;
}

}  // namespace breathms
