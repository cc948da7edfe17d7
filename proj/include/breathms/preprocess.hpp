#pragma once

#include "breathms/core.hpp"
#include "breathms/ingest.hpp"

#include <optional>
#include <span>
#include <vector>

namespace breathms {

/// Intensities on the integer m/z grid lo..hi of one mass range, or of the
/// merged 10..351 grid when `range` is empty.
struct AlignedSpectrum {
  std::optional<RangeId> range;
  int lo = 0;
  int hi = -1;
  Vector intensities;

  static AlignedSpectrum zeros(RangeId id);
  static AlignedSpectrum merged_zeros();

  Index size() const { return intensities.size(); }
  double at(int mz) const { return intensities[mz - lo]; }
  bool is_merged() const { return !range.has_value(); }

  friend bool operator==(const AlignedSpectrum& a, const AlignedSpectrum& b) {
    return a.range == b.range && a.lo == b.lo && a.hi == b.hi && a.intensities.size() == b.intensities.size() &&
           a.intensities == b.intensities;
  }
};

/// Per-acquisition total ion current, ordered by acquisition index.
struct TicCurve {
  Vector values;
};

inline constexpr Index kPlateauWindow = 4;

struct PlateauSelection {
  Index plateau_first = 0;  // inclusive bounds of the longest flat run
  Index plateau_last = 0;
  Index window_first = 0;   // chosen acquisitions: window_first .. window_first + 3
  double epsilon = 0.0;

  Index plateau_length() const { return plateau_last - plateau_first + 1; }
  std::array<Index, kPlateauWindow> chosen() const {
    return {window_first, window_first + 1, window_first + 2, window_first + 3};
  }
};

struct FilterParams {
  int sg_window = 7;
  int sg_polyorder = 3;
  int sg_deriv = 0;
  int baseline_window = 31;  // 0 disables baseline subtraction
  int baseline_polyorder = 2;
  double hp1 = 1e-4;
  double hp2 = 1e-3;
  double plateau_q = 0.5;
  double z_thresh = 8.0;
  double peak_floor = 1e-4;  // relative to the acquisition's total intensity
  bool filtering = true;     // false: TIC normalization only

  void validate() const;
};

// --- signal kernels --------------------------------------------------------

/// Divides by the sum; all-zero input is returned unchanged.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> tic_normalize(const Eigen::MatrixBase<Derived>& x) {
  const auto total = x.sum();
  if (total == 0) return x;
  return x / total;
}

/// Zeroes every entry strictly below `threshold`.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> highpass(const Eigen::MatrixBase<Derived>& x,
                                                                    typename Derived::Scalar threshold) {
  return (x.array() < threshold).select(typename Derived::Scalar(0), x);
}

AlignedSpectrum tic_normalize(const AlignedSpectrum& s);
AlignedSpectrum highpass(const AlignedSpectrum& s, double threshold);
AlignedSpectrum savitzky_golay(const AlignedSpectrum& s, const FilterParams& params);

/// Central differences inside, one-sided differences at the ends.
Vector gradient(const Vector& values);

/// Linear-interpolated quantile (q in [0, 1]).
double quantile(Vector values, double q);

// --- pipeline stages ---------------------------------------------------------

TicCurve compute_tic(std::span<const AlignedSpectrum> acqs);

/// Strict local maxima above `floor`; a flat top reports its leftmost index.
std::vector<Index> detect_peaks(const Vector& intensity, double floor);

/// Snaps detected peaks to the nearest integer m/z and resamples the segments
/// between them onto the integer grid of the acquisition's range.
AlignedSpectrum align_peaks(const RawAcquisition& raw, double peak_floor = 1e-4);

PlateauSelection find_plateau(const TicCurve& tic, double q);

AlignedSpectrum average_plateau(std::span<const AlignedSpectrum> acqs, const PlateauSelection& sel);

struct OutlierResult {
  std::vector<Index> retained;
  std::vector<Index> removed;
};

/// Rows with |z| > z_thresh on any feature (population std; zero-std features skipped).
OutlierResult remove_outliers(const Matrix& features, double z_thresh = 8.0);

/// normalize -> highpass(hp1) -> SG smoothing -> baseline removal -> highpass(hp2).
AlignedSpectrum filter_spectrum(const AlignedSpectrum& s, const FilterParams& params);

struct RangeResult {
  RangeId range = RangeId::R1;
  std::vector<AlignedSpectrum> aligned;          // one per acquisition
  TicCurve tic;
  PlateauSelection selection;
  AlignedSpectrum averaged;                      // mean of the chosen aligned acquisitions
  AlignedSpectrum normalized;                    // TIC-normalized average (outlier features)
  AlignedSpectrum processed;                     // filtered average
  std::vector<AlignedSpectrum> processed_chosen; // each chosen acquisition filtered on its own
};

/// align -> plateau selection -> average -> filter, for one patient and one range.
RangeResult preprocess_range(std::span<const RawAcquisition> acqs, const FilterParams& params);

/// Lower range wins on the shared m/z values; the result is renormalized.
AlignedSpectrum merge_ranges(std::span<const AlignedSpectrum> ranges);

}  // namespace breathms
