#pragma once

#include "breathms/feature_matrix.hpp"
#include "breathms/preprocess.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace breathms {

/// A preprocessed patient: one RangeResult per range used by the experiment,
/// in mass-range order (either a single range or all four).
struct ProcessedPatient {
  std::string patient_id;
  Label label = Label::Negative;
  std::vector<RangeResult> ranges;
};

/// One combination of per-range acquisitions of a real patient.
struct PseudoPatient {
  std::string origin;
  Combo combo;
  AlignedSpectrum spectrum;
  Label label = Label::Negative;

  std::string id() const;  // "<origin>-AAAB"
};

enum class AcquisitionMode { SingleAveraged, MultipleAugmented };

std::string_view to_string(AcquisitionMode mode);
AcquisitionMode parse_acquisition_mode(std::string_view text);

inline constexpr std::size_t kDefaultComboCap = 10'000;

/// Single range: returned as-is. Four ranges: merge_ranges.
AlignedSpectrum combine_ranges(std::span<const AlignedSpectrum> parts);

/// Calls `visit` for every combination in lexicographic order, stopping after `cap`.
void for_each_combo(std::span<const std::size_t> counts, std::size_t cap, const std::function<void(const Combo&)>& visit);

std::size_t combo_count(std::span<const std::size_t> counts, std::size_t cap = kDefaultComboCap);

/// Cartesian product of the retained acquisitions of each range.
std::vector<PseudoPatient> augment_patient(const std::string& origin, Label label,
                                           std::span<const std::vector<AlignedSpectrum>> retained,
                                           std::size_t cap = kDefaultComboCap);

std::vector<PseudoPatient> augment_patient(const ProcessedPatient& p, std::size_t cap = kDefaultComboCap);

/// Patient-level representation: filtered plateau average of each range, combined.
AlignedSpectrum test_time_aggregate(const ProcessedPatient& p);

FeatureMatrix build_training_matrix(std::span<const ProcessedPatient> cohort, AcquisitionMode mode,
                                    std::size_t cap = kDefaultComboCap);

}  // namespace breathms
