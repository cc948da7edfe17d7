#include "model_internal.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace breathms {

namespace {

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Penalized negative log-likelihood; the last coefficient is the unpenalized intercept.
double objective(const Matrix& xa, const Vector& y, const Vector& beta, double l2) {
  const Vector z = xa * beta;
  double total = 0.0;
  for (Index i = 0; i < z.size(); ++i) total += softplus(z[i]) - y[i] * z[i];
  const Index d = beta.size() - 1;
  return total + 0.5 * l2 * beta.head(d).squaredNorm();
}

}  // namespace

LogisticModel fit_logistic(const Matrix& x, const Eigen::VectorXi& y_int, double l2) {
  if (!(l2 > 0.0)) throw Error(ErrorCode::InvalidParams, "lr.l2 must be positive");
  const Index n = x.rows();
  const Index d = x.cols();
  Matrix xa(n, d + 1);
  xa.leftCols(d) = x;
  xa.col(d).setOnes();
  const Vector y = y_int.cast<double>();

  Vector beta = Vector::Zero(d + 1);
  const double prior = y.mean();
  beta[d] = std::log(prior / (1.0 - prior));

  LogisticModel model;
  model.l2 = l2;
  double current = objective(xa, y, beta, l2);
  constexpr int kMaxIterations = 200;
  constexpr double kTolerance = 1e-6;
  Vector grad(d + 1);
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    const Vector z = xa * beta;
    Vector p(n);
    Vector s(n);
    for (Index i = 0; i < n; ++i) {
      p[i] = sigmoid(z[i]);
      s[i] = p[i] * (1.0 - p[i]);
    }
    grad = xa.transpose() * (p - y);
    grad.head(d) += l2 * beta.head(d);
    model.gradient_norm = grad.norm();
    model.iterations = iter;
    if (model.gradient_norm < kTolerance) break;

    Matrix hessian = Matrix::Zero(d + 1, d + 1);
    hessian.selfadjointView<Eigen::Lower>().rankUpdate((xa.array().colwise() * s.array().sqrt()).matrix().transpose());
    hessian = hessian.selfadjointView<Eigen::Lower>();
    hessian.diagonal().head(d).array() += l2;
    hessian(d, d) += 1e-12;
    const Vector step = hessian.ldlt().solve(grad);

    double t = 1.0;
    Vector candidate = beta - step;
    double value = objective(xa, y, candidate, l2);
    const double slope = grad.dot(step);
    while (value > current - 1e-4 * t * slope && t > 1e-10) {
      t *= 0.5;
      candidate = beta - t * step;
      value = objective(xa, y, candidate, l2);
    }
    if (!(value <= current)) break;
    beta = candidate;
    current = value;
  }
  model.weights = beta.head(d);
  model.bias = beta[d];
  return model;
}

namespace detail {

Matrix logistic_predict_proba(const LogisticModel& model, const Matrix& x) {
  const Vector z = (x * model.weights).array() + model.bias;
  Matrix proba(x.rows(), 2);
  for (Index i = 0; i < z.size(); ++i) {
    proba(i, 1) = sigmoid(z[i]);
    proba(i, 0) = 1.0 - proba(i, 1);
  }
  return proba;
}

}  // namespace detail

}  // namespace breathms
