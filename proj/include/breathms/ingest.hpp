#pragma once

#include "breathms/core.hpp"
#include "breathms/feature_matrix.hpp"

#include <array>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace breathms {

/// One instrument sweep of one mass range for one patient.
struct RawAcquisition {
  std::string patient_id;
  RangeId range = RangeId::R1;
  int index = 0;
  Vector mz;         // strictly increasing
  Vector intensity;  // non-negative counts

  Index size() const { return mz.size(); }
  friend bool operator==(const RawAcquisition& a, const RawAcquisition& b);
};

enum class PatientStatus { Ok, NoPlateau, Outlier, Incomplete };

std::string_view to_string(PatientStatus status);

struct PatientRecord {
  std::string patient_id;
  Label label = Label::Negative;
  std::array<std::vector<RawAcquisition>, kRangeCount> acquisitions;
  PatientStatus status = PatientStatus::Ok;

  bool has_range(RangeId id) const { return !acquisitions[range_slot(id)].empty(); }
  const std::vector<RawAcquisition>& range(RangeId id) const { return acquisitions[range_slot(id)]; }
};

struct ManifestEntry {
  std::string patient_id;
  Label label = Label::Negative;
  std::vector<std::string> files;  // relative to the manifest directory
};

struct CohortManifest {
  static constexpr int kFormatVersion = 1;

  int format_version = kFormatVersion;
  std::vector<ManifestEntry> patients;
  std::filesystem::path base_dir;  // directory the file references resolve against
};

CohortManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const CohortManifest& manifest, const std::filesystem::path& path);

/// Parses the long-format acquisition CSV. Result is ordered by (patient, range, index).
std::vector<RawAcquisition> parse_acquisitions(std::istream& in);
std::vector<RawAcquisition> parse_acquisition_file(const std::filesystem::path& path);

void write_acquisitions(std::ostream& out, std::span<const RawAcquisition> acqs);
std::string serialize_acquisitions(std::span<const RawAcquisition> acqs);

struct Cohort {
  std::vector<PatientRecord> patients;
  std::size_t positives = 0;
  std::size_t negatives = 0;

  std::string summary() const;  // "91 positive, 211 negative"
};

/// Groups raw acquisitions into per-patient records (labels unknown, set Negative).
std::vector<PatientRecord> group_by_patient(std::vector<RawAcquisition> acqs);

Cohort load_cohort(const CohortManifest& manifest);

/// Versioned delimited container for feature matrices; round-trips bit-exactly.
inline constexpr int kDatasetFormatVersion = 1;
void save_dataset(const FeatureMatrix& matrix, const std::filesystem::path& path);
FeatureMatrix load_dataset(const std::filesystem::path& path);
std::string serialize_dataset(const FeatureMatrix& matrix);
FeatureMatrix parse_dataset(std::string_view contents);

}  // namespace breathms
