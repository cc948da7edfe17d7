#include "breathms/preprocess.hpp"

#include "breathms/savitzky_golay.hpp"

#include <algorithm>
#include <cmath>

namespace breathms {

AlignedSpectrum AlignedSpectrum::zeros(RangeId id) {
  const auto& r = mass_range(id);
  return {id, r.lo, r.hi, Vector::Zero(r.bins())};
}

AlignedSpectrum AlignedSpectrum::merged_zeros() {
  return {std::nullopt, kMergedLo, kMergedHi, Vector::Zero(kMergedHi - kMergedLo + 1)};
}

void FilterParams::validate() const {
  if (sg_window < 3 || sg_window % 2 == 0) throw Error(ErrorCode::InvalidParams, "sg.window must be odd and >= 3");
  if (sg_polyorder < 0 || sg_polyorder >= sg_window) throw Error(ErrorCode::InvalidParams, "sg.polyorder must be < sg.window");
  if (sg_deriv < 0) throw Error(ErrorCode::InvalidParams, "sg.deriv must be >= 0");
  if (baseline_window != 0) {
    if (baseline_window < 3 || baseline_window % 2 == 0)
      throw Error(ErrorCode::InvalidParams, "baseline.window must be 0 or odd and >= 3");
    if (baseline_polyorder < 0 || baseline_polyorder >= baseline_window)
      throw Error(ErrorCode::InvalidParams, "baseline.polyorder must be < baseline.window");
  }
  if (!(hp1 >= 0.0) || !(hp2 >= 0.0) || !(hp1 < hp2)) throw Error(ErrorCode::InvalidParams, "need 0 <= hp1 < hp2");
  if (!(plateau_q >= 0.0 && plateau_q <= 1.0)) throw Error(ErrorCode::InvalidParams, "plateau.q must lie in [0,1]");
  if (!(z_thresh > 0.0)) throw Error(ErrorCode::InvalidParams, "outlier.z must be positive");
  if (!(peak_floor >= 0.0)) throw Error(ErrorCode::InvalidParams, "peak floor must be non-negative");
}

AlignedSpectrum tic_normalize(const AlignedSpectrum& s) {
  AlignedSpectrum out = s;
  out.intensities = tic_normalize(s.intensities);
  return out;
}

AlignedSpectrum highpass(const AlignedSpectrum& s, double threshold) {
  if (threshold < 0.0) throw Error(ErrorCode::InvalidParams, "highpass threshold must be >= 0");
  AlignedSpectrum out = s;
  out.intensities = highpass(s.intensities, threshold);
  return out;
}

AlignedSpectrum savitzky_golay(const AlignedSpectrum& s, const FilterParams& params) {
  AlignedSpectrum out = s;
  out.intensities = savitzky_golay(s.intensities, params.sg_window, params.sg_polyorder, params.sg_deriv);
  return out;
}

Vector gradient(const Vector& values) {
  const Index n = values.size();
  Vector g = Vector::Zero(n);
  if (n < 2) return g;
  g[0] = values[1] - values[0];
  g[n - 1] = values[n - 1] - values[n - 2];
  for (Index i = 1; i + 1 < n; ++i) g[i] = 0.5 * (values[i + 1] - values[i - 1]);
  return g;
}

double quantile(Vector values, double q) {
  if (values.size() == 0) throw Error(ErrorCode::EmptyInput, "quantile of empty vector");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lower = static_cast<Index>(std::floor(pos));
  const auto upper = std::min<Index>(lower + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lower);
  return values[lower] + frac * (values[upper] - values[lower]);
}

TicCurve compute_tic(std::span<const AlignedSpectrum> acqs) {
  if (acqs.empty()) throw Error(ErrorCode::EmptyInput, "no acquisitions");
  TicCurve tic;
  tic.values.resize(static_cast<Index>(acqs.size()));
  for (std::size_t i = 0; i < acqs.size(); ++i) {
    if (acqs[i].range != acqs.front().range || acqs[i].lo != acqs.front().lo)
      throw Error(ErrorCode::InvalidParams, "TIC over spectra of different ranges");
    tic.values[static_cast<Index>(i)] = acqs[i].intensities.sum();
  }
  return tic;
}

std::vector<Index> detect_peaks(const Vector& y, double floor) {
  std::vector<Index> peaks;
  const Index n = y.size();
  Index i = 1;
  while (i + 1 < n) {
    if (y[i] > y[i - 1]) {
      Index j = i;
      while (j + 1 < n && y[j + 1] == y[i]) ++j;
      if (j + 1 < n && y[j + 1] < y[i] && y[i] > floor) peaks.push_back(i);
      i = j + 1;
    } else {
      ++i;
    }
  }
  return peaks;
}

namespace {

struct Anchor {
  double from;  // raw m/z of the peak
  double to;    // integer target
  double height;
};

std::vector<Anchor> build_anchors(const RawAcquisition& raw, double peak_floor) {
  const auto& r = mass_range(raw.range);
  const double total = raw.intensity.sum();
  std::vector<Anchor> anchors;
  if (total <= 0.0) return anchors;
  for (Index p : detect_peaks(raw.intensity, peak_floor * total)) {
    const double target = std::clamp<double>(std::round(raw.mz[p]), r.lo, r.hi);
    if (!anchors.empty() && anchors.back().to == target) {
      // Two peaks snapping to one bin: keep the taller one as the anchor.
      if (raw.intensity[p] > anchors.back().height) anchors.back() = {raw.mz[p], target, raw.intensity[p]};
      continue;
    }
    anchors.push_back({raw.mz[p], target, raw.intensity[p]});
  }
  return anchors;
}

double warp(double x, const std::vector<Anchor>& anchors) {
  if (anchors.empty()) return x;
  if (x <= anchors.front().from) return x + (anchors.front().to - anchors.front().from);
  if (x >= anchors.back().from) return x + (anchors.back().to - anchors.back().from);
  const auto it = std::upper_bound(anchors.begin(), anchors.end(), x,
                                   [](double v, const Anchor& a) { return v < a.from; });
  const Anchor& right = *it;
  const Anchor& left = *(it - 1);
  if (left.from == left.to && right.from == right.to) return x;
  const double t = (x - left.from) / (right.from - left.from);
  return left.to + t * (right.to - left.to);
}

}  // namespace

AlignedSpectrum align_peaks(const RawAcquisition& raw, double peak_floor) {
  const Index n = raw.size();
  if (n == 0) throw Error(ErrorCode::EmptySamples, "acquisition " + std::to_string(raw.index) + " of " + raw.patient_id);

  const auto anchors = build_anchors(raw, peak_floor);
  Vector warped(n);
  for (Index i = 0; i < n; ++i) warped[i] = warp(raw.mz[i], anchors);

  AlignedSpectrum out = AlignedSpectrum::zeros(raw.range);
  Index k = 0;
  for (int m = out.lo; m <= out.hi; ++m) {
    const double x = m;
    double value;
    if (x <= warped[0]) {
      value = raw.intensity[0];
    } else if (x >= warped[n - 1]) {
      value = raw.intensity[n - 1];
    } else {
      while (warped[k + 1] <= x) ++k;
      const double t = (x - warped[k]) / (warped[k + 1] - warped[k]);
      value = raw.intensity[k] + t * (raw.intensity[k + 1] - raw.intensity[k]);
    }
    out.intensities[m - out.lo] = value;
  }
  return out;
}

PlateauSelection find_plateau(const TicCurve& tic, double q) {
  const Index n = tic.values.size();
  if (n < kPlateauWindow)
    throw Error(ErrorCode::NoPlateau, "need at least 4 acquisitions, got " + std::to_string(n));

  const Vector abs_grad = gradient(tic.values).cwiseAbs();
  const double epsilon = quantile(abs_grad, q);

  // Longest flat run; a later run wins a length tie.
  Index best_first = 0;
  Index best_len = 0;
  Index run_first = 0;
  Index run_len = 0;
  for (Index i = 0; i < n; ++i) {
    const bool flat = abs_grad[i] < epsilon || abs_grad[i] == 0.0;
    if (flat) {
      if (run_len == 0) run_first = i;
      ++run_len;
      if (run_len >= best_len) {
        best_len = run_len;
        best_first = run_first;
      }
    } else {
      run_len = 0;
    }
  }
  if (best_len < kPlateauWindow)
    throw Error(ErrorCode::NoPlateau, "longest flat run has " + std::to_string(best_len) + " acquisitions");

  PlateauSelection sel;
  sel.plateau_first = best_first;
  sel.plateau_last = best_first + best_len - 1;
  sel.epsilon = epsilon;

  double best_std = std::numeric_limits<double>::infinity();
  for (Index s = sel.plateau_first; s + kPlateauWindow - 1 <= sel.plateau_last; ++s) {
    const auto w = tic.values.segment(s, kPlateauWindow);
    const double mean = w.mean();
    const double sd = std::sqrt((w.array() - mean).square().mean());
    if (sd < best_std) {
      best_std = sd;
      sel.window_first = s;
    }
  }
  return sel;
}

AlignedSpectrum average_plateau(std::span<const AlignedSpectrum> acqs, const PlateauSelection& sel) {
  if (sel.window_first < 0 || sel.window_first + kPlateauWindow > static_cast<Index>(acqs.size()))
    throw Error(ErrorCode::IndexOutOfRange, "plateau window outside the acquisition list");
  AlignedSpectrum out = acqs[static_cast<std::size_t>(sel.window_first)];
  out.intensities.setZero();
  for (Index i : sel.chosen()) out.intensities += acqs[static_cast<std::size_t>(i)].intensities;
  out.intensities /= static_cast<double>(kPlateauWindow);
  return out;
}

OutlierResult remove_outliers(const Matrix& features, double z_thresh) {
  OutlierResult result;
  const Index n = features.rows();
  std::vector<bool> drop(static_cast<std::size_t>(n), false);
  if (n >= 2) {
    for (Index c = 0; c < features.cols(); ++c) {
      const auto col = features.col(c);
      const double mean = col.mean();
      const double sd = std::sqrt((col.array() - mean).square().mean());
      if (sd == 0.0) continue;
      for (Index r = 0; r < n; ++r)
        if (std::abs(col[r] - mean) / sd > z_thresh) drop[static_cast<std::size_t>(r)] = true;
    }
  }
  for (Index r = 0; r < n; ++r) (drop[static_cast<std::size_t>(r)] ? result.removed : result.retained).push_back(r);
  return result;
}

AlignedSpectrum filter_spectrum(const AlignedSpectrum& s, const FilterParams& params) {
  AlignedSpectrum out = tic_normalize(s);
  if (!params.filtering) return out;
  out = highpass(out, params.hp1);
  Vector smooth = savitzky_golay(out.intensities, params.sg_window, params.sg_polyorder, params.sg_deriv);
  if (params.baseline_window > 0) {
    const Vector baseline = savitzky_golay(smooth, params.baseline_window, params.baseline_polyorder, 0);
    smooth -= baseline;
  }
  out.intensities = highpass(smooth, params.hp2);
  return out;
}

RangeResult preprocess_range(std::span<const RawAcquisition> acqs, const FilterParams& params) {
  if (acqs.empty()) throw Error(ErrorCode::EmptyInput, "no acquisitions for range");
  RangeResult result;
  result.range = acqs.front().range;
  result.aligned.reserve(acqs.size());
  for (const auto& a : acqs) {
    if (a.range != result.range) throw Error(ErrorCode::InvalidParams, "acquisitions from different ranges");
    result.aligned.push_back(align_peaks(a, params.peak_floor));
  }
  result.tic = compute_tic(result.aligned);
  result.selection = find_plateau(result.tic, params.plateau_q);
  result.averaged = average_plateau(result.aligned, result.selection);
  result.normalized = tic_normalize(result.averaged);
  result.processed = filter_spectrum(result.averaged, params);
  for (Index i : result.selection.chosen())
    result.processed_chosen.push_back(filter_spectrum(result.aligned[static_cast<std::size_t>(i)], params));
  return result;
}

AlignedSpectrum merge_ranges(std::span<const AlignedSpectrum> ranges) {
  if (ranges.size() != kRangeCount) throw Error(ErrorCode::MissingRange, "need all four mass ranges");
  AlignedSpectrum out = AlignedSpectrum::merged_zeros();
  std::vector<bool> filled(static_cast<std::size_t>(out.size()), false);
  for (std::size_t slot = 0; slot < ranges.size(); ++slot) {
    const auto& s = ranges[slot];
    const auto& expected = mass_ranges()[slot];
    if (s.range != expected.id || s.lo != expected.lo || s.hi != expected.hi || s.size() != expected.bins())
      throw Error(ErrorCode::MissingRange, "expected " + std::string(expected.name()) + " in slot " + std::to_string(slot));
    for (int m = s.lo; m <= s.hi; ++m) {
      const auto k = static_cast<std::size_t>(m - kMergedLo);
      if (filled[k]) continue;
      out.intensities[m - kMergedLo] = s.at(m);
      filled[k] = true;
    }
  }
  return tic_normalize(out);
}

}  // namespace breathms
