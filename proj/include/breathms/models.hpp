#pragma once

#include "breathms/core.hpp"
#include "breathms/feature_matrix.hpp"

#include <cstdint>
#include <string_view>
#include <variant>
#include <vector>

namespace breathms {

enum class ModelKind { Knn, LogisticRegression, RandomForest, GradientBoosting, SvmRbf };

inline constexpr std::array<ModelKind, 5> kAllModelKinds{ModelKind::Knn, ModelKind::RandomForest,
                                                         ModelKind::LogisticRegression, ModelKind::GradientBoosting,
                                                         ModelKind::SvmRbf};

std::string_view to_string(ModelKind kind);      // short table name: KNN, RF, LR, xGB, SVC
ModelKind parse_model_kind(std::string_view text);

/// Defaults are fixed and documented; every value is overridable from the run config.
struct Hyperparameters {
  int knn_k = 5;
  int rf_trees = 100;
  int rf_max_depth = 0;  // 0 = grow until pure
  int rf_min_leaf = 1;
  int gb_rounds = 100;
  int gb_depth = 3;
  double gb_shrinkage = 0.1;
  double svm_c = 1.0;
  double svm_gamma = 0.0;  // 0 = 1 / (features * variance of X)
  double svm_tol = 1e-3;
  double lr_l2 = 1.0;
  int max_bins = 256;      // histogram bins for tree splits
};

// --- individual models -------------------------------------------------------

struct KnnModel {
  Matrix train;
  Eigen::VectorXi labels;
  int k = 5;
};

struct LogisticModel {
  Vector weights;
  double bias = 0.0;
  double l2 = 1.0;
  double gradient_norm = 0.0;
  int iterations = 0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf: positive-class frequency (RF) or additive score (GB)
};

struct DecisionTree {
  std::vector<TreeNode> nodes;

  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
  int leaf_index(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
  int depth() const;
};

struct RandomForestModel {
  std::vector<DecisionTree> trees;
  Index n_features = 0;
};

struct GradientBoostingModel {
  double init_score = 0.0;
  double shrinkage = 0.1;
  std::vector<DecisionTree> trees;
  Index n_features = 0;
};

struct SvmModel {
  Matrix support;     // support vectors
  Vector dual_coef;   // alpha_i * y_i (y in {-1, +1})
  double rho = 0.0;   // decision = sum dual_coef * K(sv, x) - rho
  double gamma = 1.0;
  double platt_a = 0.0;  // P(positive) = 1 / (1 + exp(a * decision + b))
  double platt_b = 0.0;
  int iterations = 0;

  Vector decision_function(const Matrix& x) const;
};

using Classifier = std::variant<KnnModel, LogisticModel, RandomForestModel, GradientBoostingModel, SvmModel>;

ModelKind kind_of(const Classifier& c);
Index input_width(const Classifier& c);

KnnModel fit_knn(const Matrix& x, const Eigen::VectorXi& y, int k);
LogisticModel fit_logistic(const Matrix& x, const Eigen::VectorXi& y, double l2);
RandomForestModel fit_random_forest(const Matrix& x, const Eigen::VectorXi& y, const Hyperparameters& hp,
                                    std::uint64_t seed);
GradientBoostingModel fit_gradient_boosting(const Matrix& x, const Eigen::VectorXi& y, const Hyperparameters& hp);

/// Dual solution and the training decision values, exposed for KKT checks.
struct SvmFit {
  SvmModel model;
  Vector alpha;        // per unique training row
  Vector upper;        // per unique row box bound (C times multiplicity)
  Matrix unique_rows;
  Eigen::VectorXi unique_labels;  // {-1, +1}
};
SvmFit fit_svm_detailed(const Matrix& x, const Eigen::VectorXi& y, const Hyperparameters& hp);
SvmModel fit_svm(const Matrix& x, const Eigen::VectorXi& y, const Hyperparameters& hp);

/// Logistic map fitted to decision values (Platt scaling, Newton iterations).
std::pair<double, double> fit_platt(const Vector& decision, const Eigen::VectorXi& y01, const Vector& weights);

/// Validates inputs (both classes, finite features) and fits one model kind.
Classifier fit(ModelKind kind, const Matrix& x, const Eigen::VectorXi& y, const Hyperparameters& hp,
               std::uint64_t seed);

/// n x 2 matrix of (p_negative, p_positive).
Matrix predict_proba(const Classifier& c, const Matrix& x);

// --- ensemble ----------------------------------------------------------------

struct EnsembleModel {
  std::vector<Classifier> members;
};

struct VoteResult {
  Eigen::VectorXi labels;  // 1 = positive
  Vector p_positive;       // summed positive probability / number of members
  Matrix scores;           // summed (negative, positive) probabilities
};

/// Unweighted sum of member probabilities; argmax with ties going to negative.
VoteResult soft_vote(const std::vector<Matrix>& member_probabilities);
VoteResult soft_vote(const EnsembleModel& ensemble, const Matrix& x);

EnsembleModel fit_ensemble(const Matrix& x, const Eigen::VectorXi& y, const Hyperparameters& hp, std::uint64_t seed);

// --- class balancing -----------------------------------------------------------

/// Row order after duplicating minority rows until the classes are even.
/// Original rows come first; duplicates cycle through a seeded permutation of
/// the minority rows.
std::vector<Index> oversample_indices(const Eigen::VectorXi& y, std::uint64_t seed);

FeatureMatrix oversample_minority(const FeatureMatrix& m, std::uint64_t seed);

}  // namespace breathms
