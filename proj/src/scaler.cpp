#include "breathms/features.hpp"

#include <algorithm>
#include <cmath>

namespace breathms {

std::vector<Index> varying_columns(const Matrix& x) {
  std::vector<Index> kept;
  if (x.rows() == 0) return kept;
  for (Index c = 0; c < x.cols(); ++c)
    if (!(x.col(c).array() == x(0, c)).all()) kept.push_back(c);
  return kept;
}

Matrix select_columns(const Matrix& x, std::span<const Index> columns) {
  Matrix out(x.rows(), static_cast<Index>(columns.size()));
  for (std::size_t i = 0; i < columns.size(); ++i) out.col(static_cast<Index>(i)) = x.col(columns[i]);
  return out;
}

std::pair<FeatureMatrix, std::vector<Index>> prune_zero_variance(const FeatureMatrix& m) {
  if (m.rows() == 0) throw Error(ErrorCode::EmptyInput, "cannot prune an empty matrix");
  auto kept = varying_columns(m.values);
  if (kept.empty()) throw Error(ErrorCode::AllFeaturesConstant, "every feature is constant");
  FeatureMatrix out;
  out.values = select_columns(m.values, kept);
  out.labels = m.labels;
  out.origins = m.origins;
  out.combos = m.combos;
  for (Index c : kept) out.feature_index.push_back(m.feature_index[static_cast<std::size_t>(c)]);
  return {std::move(out), std::move(kept)};
}

std::string_view to_string(ScalerKind kind) {
  switch (kind) {
    case ScalerKind::None: return "none";
    case ScalerKind::Standard: return "standard";
    case ScalerKind::Robust: return "robust";
  }
  return "none";
}

ScalerKind parse_scaler_kind(std::string_view text) {
  if (text == "none") return ScalerKind::None;
  if (text == "standard") return ScalerKind::Standard;
  if (text == "robust") return ScalerKind::Robust;
  throw Error(ErrorCode::InvalidConfig, "scaler must be standard, robust or none, got '" + std::string(text) + "'");
}

namespace {

// Linear-interpolated percentile of a column (q in [0,1]); `buffer` is scratch space.
double column_quantile(std::vector<double>& buffer, double q) {
  const double pos = q * static_cast<double>(buffer.size() - 1);
  const auto lower = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lower);
  std::nth_element(buffer.begin(), buffer.begin() + static_cast<std::ptrdiff_t>(lower), buffer.end());
  const double lo = buffer[lower];
  if (frac == 0.0 || lower + 1 >= buffer.size()) return lo;
  const double hi = *std::min_element(buffer.begin() + static_cast<std::ptrdiff_t>(lower) + 1, buffer.end());
  return lo + frac * (hi - lo);
}

}  // namespace

ScalerModel fit_scaler(ScalerKind kind, const Matrix& train) {
  if (train.rows() < 2) throw Error(ErrorCode::InvalidParams, "scaler needs at least two training rows");
  ScalerModel model;
  model.kind = kind;
  const Index f = train.cols();
  model.location = Vector::Zero(f);
  model.scale = Vector::Ones(f);
  if (kind == ScalerKind::None) return model;

  std::vector<double> buffer(static_cast<std::size_t>(train.rows()));
  for (Index c = 0; c < f; ++c) {
    double location = 0.0;
    double scale = 0.0;
    if (kind == ScalerKind::Standard) {
      location = train.col(c).mean();
      scale = std::sqrt((train.col(c).array() - location).square().mean());
    } else {
      Eigen::Map<Vector>(buffer.data(), train.rows()) = train.col(c);
      location = column_quantile(buffer, 0.5);
      const double q1 = column_quantile(buffer, 0.25);
      const double q3 = column_quantile(buffer, 0.75);
      scale = q3 - q1;
    }
    model.location[c] = location;
    if (scale > 0.0) {
      model.scale[c] = scale;
    } else {
      model.degenerate.push_back(c);
    }
  }
  return model;
}

Matrix apply_scaler(const ScalerModel& model, const Matrix& x) {
  if (x.cols() != model.location.size()) throw Error(ErrorCode::WidthMismatch, "scaler width mismatch");
  return ((x.rowwise() - model.location.transpose()).array().rowwise() / model.scale.transpose().array()).matrix();
}

}  // namespace breathms
