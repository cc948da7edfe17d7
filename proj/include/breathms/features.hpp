#pragma once

#include "breathms/core.hpp"
#include "breathms/feature_matrix.hpp"

#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace breathms {

// --- zero-variance pruning ---------------------------------------------------

/// Columns with at least two distinct values.
std::vector<Index> varying_columns(const Matrix& x);

Matrix select_columns(const Matrix& x, std::span<const Index> columns);

/// Drops constant columns. Returns the pruned matrix and the kept column indices.
std::pair<FeatureMatrix, std::vector<Index>> prune_zero_variance(const FeatureMatrix& m);

// --- scaling -------------------------------------------------------------------

enum class ScalerKind { None, Standard, Robust };

std::string_view to_string(ScalerKind kind);
ScalerKind parse_scaler_kind(std::string_view text);

/// Per-feature location/scale fitted on training rows. Features whose scale is
/// zero keep scale 1 and are listed in `degenerate`.
struct ScalerModel {
  ScalerKind kind = ScalerKind::None;
  Vector location;
  Vector scale;
  std::vector<Index> degenerate;
};

ScalerModel fit_scaler(ScalerKind kind, const Matrix& train);
Matrix apply_scaler(const ScalerModel& model, const Matrix& x);

// --- SURF* ------------------------------------------------------------------------

struct SurfStarOptions {
  Index top_k = 200;
  Index max_rows = 2000;  // larger training sets use an evenly strided subset of instances
};

struct SurfStarModel {
  Vector weights;
  std::vector<Index> selected;  // top-k by weight, ascending column order
};

/// Relief-family weighting with an average-distance threshold: neighbors closer
/// than the mean pairwise (Manhattan) distance score like Relief, farther ones
/// score with the opposite sign.
SurfStarModel fit_surf_star(const Matrix& x, const Eigen::VectorXi& y, const SurfStarOptions& options = {});

// --- PCA ------------------------------------------------------------------------

struct PcaModel {
  Vector mean;
  Matrix components;          // n_components x features, orthonormal rows
  Vector explained_variance;  // non-increasing
  double total_variance = 0.0;
  Index requested = 0;
  bool reduced = false;  // fewer components than requested (rank or shape limit)

  Index n_components() const { return components.rows(); }
};

PcaModel fit_pca(const Matrix& x, Index n_components);
Matrix project(const PcaModel& model, const Matrix& x);

}  // namespace breathms
