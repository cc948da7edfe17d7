#pragma once

#include "breathms/augment.hpp"
#include "breathms/config.hpp"
#include "breathms/eval.hpp"
#include "breathms/features.hpp"
#include "breathms/ingest.hpp"
#include "breathms/models.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace breathms {

// --- cohort preprocessing ------------------------------------------------------

struct PatientOutcome {
  std::string patient_id;
  Label label = Label::Negative;
  PatientStatus status = PatientStatus::Ok;
  std::string detail;
};

struct ProcessedCohort {
  std::vector<ProcessedPatient> patients;  // status Ok only, input order
  std::vector<PatientOutcome> outcomes;    // every input patient, input order

  std::size_t count(PatientStatus status) const;
};

/// Per patient: align, select the plateau, average and filter each experiment
/// range. Patients without a plateau or missing a range are discarded, then
/// outliers are removed over the TIC-normalized plateau averages.
ProcessedCohort process_cohort(std::span<const PatientRecord> records, const RunConfig& config);

/// Patient-level rows and, in multiple-acquisition mode, the augmented rows.
Dataset build_dataset(std::span<const ProcessedPatient> patients, const RunConfig& config);

// --- feature stages ------------------------------------------------------------

/// Pruning, scaling, optional SURF* selection and optional PCA, fitted on
/// training rows and frozen for reuse.
struct FeatureTransform {
  std::vector<int> input_features;  // m/z ids the transform expects
  std::vector<Index> kept;          // columns surviving zero-variance pruning
  ScalerModel scaler;
  std::vector<Index> selected;      // SURF* picks (indices into kept); empty = all
  std::optional<PcaModel> pca;

  Matrix apply(const Matrix& x) const;
  Index output_width() const;
};

FeatureTransform fit_feature_transform(const FeatureMatrix& train, const RunConfig& config, Matrix* transformed = nullptr);

// --- fitted artifact -----------------------------------------------------------

struct FittedPipeline {
  RunConfig config;
  FeatureTransform transform;
  EnsembleModel ensemble;
};

/// Fits the feature stages and the five-model ensemble on all training rows.
FittedPipeline fit_pipeline(const Dataset& data, const RunConfig& config);

std::string serialize_pipeline(const FittedPipeline& p);
FittedPipeline parse_pipeline(std::string_view json_text);

struct PatientPrediction {
  std::string patient_id;
  PatientStatus status = PatientStatus::Ok;
  std::optional<Label> label;
  double p_positive = 0.0;
};

/// Frozen preprocessing and features applied per patient; patients that fail
/// preprocessing are reported with their status and no label.
std::vector<PatientPrediction> predict_patients(const FittedPipeline& p, std::span<const PatientRecord> records);

}  // namespace breathms
