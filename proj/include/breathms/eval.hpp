#pragma once

#include "breathms/config.hpp"
#include "breathms/feature_matrix.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace breathms {

// --- fold planning -------------------------------------------------------------

struct FoldPlan {
  int fold_count = 10;
  std::uint64_t seed = 0;
  std::map<std::string, int> assignments;  // patient id -> fold

  int fold_of(const std::string& patient) const;  // IndexOutOfRange if unknown
  std::vector<std::string> patients_in(int fold) const;
};

/// Label-stratified patient partition: each class is shuffled with the seed and
/// dealt round-robin, negatives continuing the cycle where positives stopped.
FoldPlan plan_folds(std::span<const std::string> patients, std::span<const Label> labels, int k, std::uint64_t seed);

/// Fold index for every matrix row, taken from its origin patient.
std::vector<int> assign_rows(const FoldPlan& plan, const FeatureMatrix& m);

struct LeakageViolation {
  std::string patient;
  std::vector<int> folds;  // every fold the patient's rows were placed in
};

/// Patients whose rows are split across folds, i.e. that would appear in both
/// the training and the test side of some split.
std::vector<LeakageViolation> leakage_audit(const FeatureMatrix& m, std::span<const int> row_folds);
std::vector<LeakageViolation> leakage_audit(const FoldPlan& plan, const FeatureMatrix& m);

// --- metrics -------------------------------------------------------------------

enum class Metric { BalancedAccuracy, Precision, Recall, F1, Specificity, RocAuc };
inline constexpr std::array<Metric, 6> kAllMetrics{Metric::BalancedAccuracy, Metric::Precision, Metric::Recall,
                                                   Metric::F1, Metric::Specificity, Metric::RocAuc};
std::string_view to_string(Metric m);        // machine name, e.g. balanced_accuracy
std::string_view column_title(Metric m);     // table title, e.g. Accuracy

struct Metrics {
  std::array<double, 6> values{};  // indexed by Metric
  std::array<bool, 6> undefined{};  // zero denominator, value reported as 0
  int tp = 0;
  int fp = 0;
  int tn = 0;
  int fn = 0;

  double operator[](Metric m) const { return values[static_cast<std::size_t>(m)]; }
  double& operator[](Metric m) { return values[static_cast<std::size_t>(m)]; }
};

/// Midrank Mann-Whitney estimate; `defined` is false when a class is absent.
double roc_auc(std::span<const int> truth, std::span<const double> scores, bool* defined = nullptr);

Metrics compute_metrics(std::span<const int> truth, std::span<const int> predicted, std::span<const double> scores);

// --- cross-validation ----------------------------------------------------------

/// Patient-level rows (one per patient) plus augmented training rows.
struct Dataset {
  FeatureMatrix patients;
  FeatureMatrix pseudo;
};

/// Rows with an empty combo are patient-level; the rest are pseudo-patients.
Dataset split_dataset(const FeatureMatrix& combined);
FeatureMatrix combine_dataset(const Dataset& d);

struct ModelReport {
  std::string model;  // KNN, RF, LR, xGB, SVC, Ens
  std::vector<Metrics> folds;
  std::array<double, 6> mean{};
  std::array<double, 6> std{};  // population std over folds
};

struct EvaluationReport {
  std::vector<std::pair<std::string, std::string>> config;
  std::uint64_t seed = 0;
  int fold_count = 0;
  FoldPlan plan;
  std::vector<std::string> fold_errors;  // empty string = fold succeeded
  std::vector<ModelReport> models;

  const ModelReport& model(std::string_view name) const;
};

EvaluationReport cross_validate(const Dataset& data, const RunConfig& config);

std::string format_table(const EvaluationReport& report);
std::string format_report_csv(const EvaluationReport& report);
std::string format_report_json(const EvaluationReport& report);

/// Writes report.csv, report.json and report.txt into `dir`.
void write_report(const EvaluationReport& report, const std::filesystem::path& dir);

}  // namespace breathms
