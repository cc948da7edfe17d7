#pragma once

#include "breathms/core.hpp"

#include <span>
#include <string>
#include <vector>

namespace breathms {

/// Per-range acquisition ordinals of a pseudo-patient; empty for patient-level rows.
using Combo = std::vector<int>;

/// Rows of (pseudo-)patient feature vectors with provenance.
struct FeatureMatrix {
  Matrix values;  // rows x features
  std::vector<Label> labels;
  std::vector<std::string> origins;
  std::vector<Combo> combos;
  std::vector<int> feature_index;  // integer m/z, or component ids after reduction

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }

  Eigen::VectorXi label_vector() const;

  /// Throws InvalidParams when the per-row metadata does not line up with `values`.
  void validate() const;

  friend bool operator==(const FeatureMatrix& a, const FeatureMatrix& b);
};

FeatureMatrix select_rows(const FeatureMatrix& m, std::span<const Index> rows);

/// "AAAB" style code (letter = acquisition ordinal) as in the augmentation table;
/// ordinals of 26 or more fall back to dot-separated integers.
std::string encode_combo(const Combo& combo);
Combo decode_combo(std::string_view text);

}  // namespace breathms
