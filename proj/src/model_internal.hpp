#pragma once

#include "breathms/models.hpp"
#include "breathms/rng.hpp"

#include <cstdint>
#include <vector>

namespace breathms::detail {

Matrix knn_predict_proba(const KnnModel& model, const Matrix& x);
Matrix logistic_predict_proba(const LogisticModel& model, const Matrix& x);
Matrix forest_predict_proba(const RandomForestModel& model, const Matrix& x);
Matrix boosting_predict_proba(const GradientBoostingModel& model, const Matrix& x);
Matrix svm_predict_proba(const SvmModel& model, const Matrix& x);

/// Per-feature bin codes with split thresholds between adjacent bins.
struct BinnedFeatures {
  Index rows = 0;
  std::vector<std::vector<std::uint8_t>> codes;  // [feature][row]
  std::vector<std::vector<double>> edges;        // bin b holds values below edges[b]

  int bins(std::size_t feature) const { return static_cast<int>(edges[feature].size()) + 1; }
};

BinnedFeatures bin_features(const Matrix& x, int max_bins);

enum class SplitCriterion { Gini, SquaredError };

struct TreeOptions {
  SplitCriterion criterion = SplitCriterion::Gini;
  int max_depth = 0;       // 0 = unlimited
  double min_leaf = 1.0;   // minimum weight per child
  int max_features = 0;    // 0 = all
};

/// Grows one tree over the rows listed in `rows` (with weights) and returns
/// it; `leaf_of` receives the leaf node index for every listed row.
DecisionTree grow_tree(const BinnedFeatures& binned, const std::vector<Index>& rows, const Vector& weights,
                       const Vector& targets, const TreeOptions& options, Rng& rng, std::vector<int>* leaf_of);

}  // namespace breathms::detail
