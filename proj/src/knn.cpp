#include "model_internal.hpp"

#include <algorithm>
#include <utility>

namespace breathms {

KnnModel fit_knn(const Matrix& x, const Eigen::VectorXi& y, int k) {
  if (k < 1) throw Error(ErrorCode::InvalidParams, "knn.k must be at least 1");
  KnnModel model;
  model.train = x;
  model.labels = y;
  model.k = k;
  return model;
}

namespace detail {

Matrix knn_predict_proba(const KnnModel& model, const Matrix& x) {
  const Index n_train = model.train.rows();
  const Index k = std::min<Index>(model.k, n_train);
  Matrix proba(x.rows(), 2);
  std::vector<std::pair<double, Index>> order(static_cast<std::size_t>(n_train));
  for (Index r = 0; r < x.rows(); ++r) {
    const Vector dist = (model.train.rowwise() - x.row(r)).rowwise().squaredNorm();
    for (Index i = 0; i < n_train; ++i) order[static_cast<std::size_t>(i)] = {dist[i], i};
    std::partial_sort(order.begin(), order.begin() + k, order.end());
    Index positives = 0;
    for (Index i = 0; i < k; ++i) positives += model.labels[order[static_cast<std::size_t>(i)].second];
    const double p = static_cast<double>(positives) / static_cast<double>(k);
    proba(r, 0) = 1.0 - p;
    proba(r, 1) = p;
  }
  return proba;
}

}  // namespace detail

}  // namespace breathms
