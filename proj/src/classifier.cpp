#include "model_internal.hpp"

#include <numeric>

namespace breathms {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Knn: return "KNN";
    case ModelKind::RandomForest: return "RF";
    case ModelKind::LogisticRegression: return "LR";
    case ModelKind::GradientBoosting: return "xGB";
    case ModelKind::SvmRbf: return "SVC";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view text) {
  for (ModelKind k : kAllModelKinds)
    if (text == to_string(k)) return k;
  throw Error(ErrorCode::InvalidConfig, "unknown model '" + std::string(text) + "'");
}

ModelKind kind_of(const Classifier& c) {
  struct Visitor {
    ModelKind operator()(const KnnModel&) const { return ModelKind::Knn; }
    ModelKind operator()(const LogisticModel&) const { return ModelKind::LogisticRegression; }
    ModelKind operator()(const RandomForestModel&) const { return ModelKind::RandomForest; }
    ModelKind operator()(const GradientBoostingModel&) const { return ModelKind::GradientBoosting; }
    ModelKind operator()(const SvmModel&) const { return ModelKind::SvmRbf; }
  };
  return std::visit(Visitor{}, c);
}

Index input_width(const Classifier& c) {
  struct Visitor {
    Index operator()(const KnnModel& m) const { return m.train.cols(); }
    Index operator()(const LogisticModel& m) const { return m.weights.size(); }
    Index operator()(const RandomForestModel& m) const { return m.n_features; }
    Index operator()(const GradientBoostingModel& m) const { return m.n_features; }
    Index operator()(const SvmModel& m) const { return m.support.cols(); }
  };
  return std::visit(Visitor{}, c);
}

Classifier fit(ModelKind kind, const Matrix& x, const Eigen::VectorXi& y, const Hyperparameters& hp,
               std::uint64_t seed) {
  if (x.rows() != y.size()) throw Error(ErrorCode::WidthMismatch, "labels do not match rows");
  if (x.rows() == 0 || x.cols() == 0) throw Error(ErrorCode::EmptyInput, "empty training matrix");
  if (!x.allFinite()) throw Error(ErrorCode::NonFiniteFeature, "training features contain NaN or Inf");
  const Index positives = (y.array() == 1).count();
  if (positives == 0 || positives == y.size())
    throw Error(ErrorCode::SingleClass, "training labels contain a single class");
  switch (kind) {
    case ModelKind::Knn: return fit_knn(x, y, hp.knn_k);
    case ModelKind::LogisticRegression: return fit_logistic(x, y, hp.lr_l2);
    case ModelKind::RandomForest: return fit_random_forest(x, y, hp, seed);
    case ModelKind::GradientBoosting: return fit_gradient_boosting(x, y, hp);
    case ModelKind::SvmRbf: return fit_svm(x, y, hp);
  }
  throw Error(ErrorCode::InvalidParams, "unknown model kind");
}

Matrix predict_proba(const Classifier& c, const Matrix& x) {
  if (x.cols() != input_width(c)) throw Error(ErrorCode::WidthMismatch, "feature width does not match the model");
  if (!x.allFinite()) throw Error(ErrorCode::NonFiniteFeature, "features contain NaN or Inf");
  struct Visitor {
    const Matrix& x;
    Matrix operator()(const KnnModel& m) const { return detail::knn_predict_proba(m, x); }
    Matrix operator()(const LogisticModel& m) const { return detail::logistic_predict_proba(m, x); }
    Matrix operator()(const RandomForestModel& m) const { return detail::forest_predict_proba(m, x); }
    Matrix operator()(const GradientBoostingModel& m) const { return detail::boosting_predict_proba(m, x); }
    Matrix operator()(const SvmModel& m) const { return detail::svm_predict_proba(m, x); }
  };
  return std::visit(Visitor{x}, c);
}

VoteResult soft_vote(const std::vector<Matrix>& member_probabilities) {
  if (member_probabilities.empty()) throw Error(ErrorCode::EmptyInput, "ensemble has no members");
  const Index n = member_probabilities.front().rows();
  VoteResult out;
  out.scores = Matrix::Zero(n, 2);
  for (const auto& p : member_probabilities) {
    if (p.rows() != n || p.cols() != 2) throw Error(ErrorCode::WidthMismatch, "member probability shape mismatch");
    out.scores += p;
  }
  out.p_positive = out.scores.col(1) / static_cast<double>(member_probabilities.size());
  out.labels.resize(n);
  for (Index i = 0; i < n; ++i) out.labels[i] = out.scores(i, 1) > out.scores(i, 0) ? 1 : 0;
  return out;
}

VoteResult soft_vote(const EnsembleModel& ensemble, const Matrix& x) {
  std::vector<Matrix> probabilities;
  probabilities.reserve(ensemble.members.size());
  for (const auto& member : ensemble.members) probabilities.push_back(predict_proba(member, x));
  return soft_vote(probabilities);
}

EnsembleModel fit_ensemble(const Matrix& x, const Eigen::VectorXi& y, const Hyperparameters& hp, std::uint64_t seed) {
  EnsembleModel ensemble;
  for (ModelKind kind : kAllModelKinds)
    ensemble.members.push_back(fit(kind, x, y, hp, derive_seed(seed, static_cast<std::uint64_t>(kind))));
  return ensemble;
}

std::vector<Index> oversample_indices(const Eigen::VectorXi& y, std::uint64_t seed) {
  std::vector<Index> positives;
  std::vector<Index> negatives;
  for (Index i = 0; i < y.size(); ++i) (y[i] == 1 ? positives : negatives).push_back(i);
  std::vector<Index> order(static_cast<std::size_t>(y.size()));
  std::iota(order.begin(), order.end(), Index{0});
  if (positives.empty() || negatives.empty() || positives.size() == negatives.size()) return order;
  auto& minority = positives.size() < negatives.size() ? positives : negatives;
  const std::size_t deficit = std::max(positives.size(), negatives.size()) - minority.size();
  Rng rng(seed);
  rng.shuffle(minority.begin(), minority.end());
  for (std::size_t k = 0; k < deficit; ++k) order.push_back(minority[k % minority.size()]);
  return order;
}

FeatureMatrix oversample_minority(const FeatureMatrix& m, std::uint64_t seed) {
  const auto order = oversample_indices(m.label_vector(), seed);
  return select_rows(m, order);
}

}  // namespace breathms
