#pragma once

#include "breathms/config.hpp"
#include "breathms/ingest.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace breathms {

struct ProcessedCohort;

/// One template peak: integer m/z with a per-class base amplitude.
struct TemplatePeak {
  int mz = 0;
  double negative = 0.0;
  double positive = 0.0;
};

using PeakTemplate = std::array<std::vector<TemplatePeak>, kRangeCount>;

/// Default template: strong gas peaks in range 1 (scaled down), a rich range 2
/// whose marker peaks move up or down by exp(class_effect) in positives, and
/// class-independent ranges 3 and 4.
PeakTemplate default_peak_template(double class_effect);

struct SynthSpec {
  std::uint64_t seed = 0;
  int n_patients = 300;
  double positive_fraction = 0.3;
  int min_acquisitions = 10;
  int max_acquisitions = 20;
  int min_ramp = 1;
  int max_ramp = 3;
  double noise = 0.05;              // white-noise std relative to the mean bin intensity
  double baseline_drift = 0.3;      // relative amplitude of the smooth baseline modulation
  double baseline_level = 0.2;      // baseline share of the ideal spectrum total
  double plateau_jitter = 0.03;     // alternating relative TIC deviation on the plateau
  double mz_jitter = 0.4;           // maximum |shift| of a raw peak from its integer m/z
  double patient_sigma = 0.2;       // log-normal spread of peak amplitudes between patients
  double acquisition_sigma = 0.15;  // log-normal spread between acquisitions of one patient
  double outlier_rate = 0.0;
  double no_plateau_rate = 0.0;
  double class_effect = 0.3;
  std::optional<PeakTemplate> peaks;  // empty: default_peak_template(class_effect)

  void validate() const;  // InvalidSpec
  PeakTemplate peak_template() const;
};

inline constexpr double kSynthPeakWidth = 0.2;  // Gaussian std in m/z
inline constexpr int kSynthSamplesPerUnit = 10;

enum class InjectedAnomaly { None, Outlier, NoPlateau };

std::string_view to_string(InjectedAnomaly a);

struct RangeTruth {
  int acquisitions = 0;
  int ramp = 0;
  bool rising = false;  // no plateau by construction
  Index plateau_first = 0;
  Index plateau_last = 0;
  Index window_first = 0;
  std::vector<int> peak_mz;                  // integer m/z of every generated peak
  std::vector<std::vector<double>> apex_mz;  // [acquisition][peak] raw apex position
};

struct PatientTruth {
  std::string patient_id;
  Label label = Label::Negative;
  InjectedAnomaly anomaly = InjectedAnomaly::None;
  std::optional<int> outlier_mz;
  std::array<RangeTruth, kRangeCount> ranges;

  PatientStatus expected_status() const;
};

struct SynthCohort {
  SynthSpec spec;
  std::vector<PatientRecord> patients;
  std::vector<PatientTruth> truth;

  std::size_t positives() const;
};

SynthCohort generate_cohort(const SynthSpec& spec);

/// Writes manifest.json, acquisitions/<id>.csv and truth.json into `dir`.
CohortManifest write_cohort(const SynthCohort& cohort, const std::filesystem::path& dir);

/// Ground truth sidecar: plateau indices, peak tables and injected anomalies.
std::string truth_json(const SynthCohort& cohort);

/// Compares recovered statuses, plateaus and aligned apex positions with the
/// generator truth. Each entry describes one mismatch.
std::vector<std::string> ground_truth_check(const SynthCohort& cohort, const ProcessedCohort& processed,
                                            const RunConfig& config);

}  // namespace breathms
