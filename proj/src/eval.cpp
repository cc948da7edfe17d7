#include "breathms/eval.hpp"
#include "breathms/pipeline.hpp"
#include "breathms/rng.hpp"
#include "breathms/text_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

namespace breathms {

// --- fold planning -------------------------------------------------------------

int FoldPlan::fold_of(const std::string& patient) const {
  const auto it = assignments.find(patient);
  if (it == assignments.end()) throw Error(ErrorCode::IndexOutOfRange, "patient '" + patient + "' is not in the fold plan");
  return it->second;
}

std::vector<std::string> FoldPlan::patients_in(int fold) const {
  std::vector<std::string> out;
  for (const auto& [id, f] : assignments)
    if (f == fold) out.push_back(id);
  return out;
}

FoldPlan plan_folds(std::span<const std::string> patients, std::span<const Label> labels, int k, std::uint64_t seed) {
  if (patients.size() != labels.size()) throw Error(ErrorCode::WidthMismatch, "patients and labels differ in length");
  if (k < 2) throw Error(ErrorCode::InvalidParams, "need at least two folds");
  if (patients.size() < static_cast<std::size_t>(k))
    throw Error(ErrorCode::TooFewPatients, std::to_string(patients.size()) + " patients cannot fill " +
                                                std::to_string(k) + " folds");
  FoldPlan plan;
  plan.fold_count = k;
  plan.seed = seed;
  std::vector<std::string> positives;
  std::vector<std::string> negatives;
  for (std::size_t i = 0; i < patients.size(); ++i)
    (labels[i] == Label::Positive ? positives : negatives).push_back(patients[i]);
  std::sort(positives.begin(), positives.end());
  std::sort(negatives.begin(), negatives.end());
  Rng rng(derive_seed(seed, 0xF01D));
  rng.shuffle(positives.begin(), positives.end());
  rng.shuffle(negatives.begin(), negatives.end());
  std::size_t slot = 0;
  for (const auto* group : {&positives, &negatives}) {
    for (const auto& id : *group) {
      if (!plan.assignments.emplace(id, static_cast<int>(slot % static_cast<std::size_t>(k))).second)
        throw Error(ErrorCode::DuplicatePatient, "patient '" + id + "' listed twice");
      ++slot;
    }
  }
  return plan;
}

std::vector<int> assign_rows(const FoldPlan& plan, const FeatureMatrix& m) {
  std::vector<int> folds;
  folds.reserve(m.origins.size());
  for (const auto& origin : m.origins) folds.push_back(plan.fold_of(origin));
  return folds;
}

std::vector<LeakageViolation> leakage_audit(const FeatureMatrix& m, std::span<const int> row_folds) {
  if (row_folds.size() != m.origins.size()) throw Error(ErrorCode::WidthMismatch, "fold list does not match rows");
  std::map<std::string_view, std::set<int>> seen;
  for (std::size_t i = 0; i < row_folds.size(); ++i) seen[m.origins[i]].insert(row_folds[i]);
  std::vector<LeakageViolation> out;
  for (const auto& [patient, folds] : seen)
    if (folds.size() > 1) out.push_back({std::string(patient), std::vector<int>(folds.begin(), folds.end())});
  return out;
}

std::vector<LeakageViolation> leakage_audit(const FoldPlan& plan, const FeatureMatrix& m) {
  const auto folds = assign_rows(plan, m);
  return leakage_audit(m, folds);
}

// --- metrics -------------------------------------------------------------------

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::BalancedAccuracy: return "balanced_accuracy";
    case Metric::Precision: return "precision";
    case Metric::Recall: return "recall";
    case Metric::F1: return "f1";
    case Metric::Specificity: return "specificity";
    case Metric::RocAuc: return "roc_auc";
  }
  return "?";
}

std::string_view column_title(Metric m) {
  switch (m) {
    case Metric::BalancedAccuracy: return "Accuracy";
    case Metric::Precision: return "Precision";
    case Metric::Recall: return "Recall";
    case Metric::F1: return "F1-Score";
    case Metric::Specificity: return "Specificity";
    case Metric::RocAuc: return "ROC-AUC";
  }
  return "?";
}

double roc_auc(std::span<const int> truth, std::span<const double> scores, bool* defined) {
  if (truth.size() != scores.size()) throw Error(ErrorCode::WidthMismatch, "labels and scores differ in length");
  const std::size_t n = truth.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (truth[order[k]] == 1) {
        rank_sum += midrank;
        ++positives;
      }
    i = j;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) {
    if (defined) *defined = false;
    return 0.0;
  }
  if (defined) *defined = true;
  const double p = static_cast<double>(positives);
  return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(negatives));
}

Metrics compute_metrics(std::span<const int> truth, std::span<const int> predicted, std::span<const double> scores) {
  if (truth.empty()) throw Error(ErrorCode::EmptyInput, "no predictions to score");
  if (truth.size() != predicted.size() || truth.size() != scores.size())
    throw Error(ErrorCode::WidthMismatch, "metric inputs differ in length");
  Metrics m;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == 1) {
      (predicted[i] == 1 ? m.tp : m.fn)++;
    } else {
      (predicted[i] == 1 ? m.fp : m.tn)++;
    }
  }
  const auto ratio = [&](Metric metric, int num, int den) {
    const auto slot = static_cast<std::size_t>(metric);
    if (den == 0) {
      m.values[slot] = 0.0;
      m.undefined[slot] = true;
    } else {
      m.values[slot] = static_cast<double>(num) / static_cast<double>(den);
    }
  };
  ratio(Metric::Precision, m.tp, m.tp + m.fp);
  ratio(Metric::Recall, m.tp, m.tp + m.fn);
  ratio(Metric::Specificity, m.tn, m.tn + m.fp);
  m[Metric::BalancedAccuracy] = (m[Metric::Recall] + m[Metric::Specificity]) / 2.0;
  m.undefined[static_cast<std::size_t>(Metric::BalancedAccuracy)] =
      m.undefined[static_cast<std::size_t>(Metric::Recall)] || m.undefined[static_cast<std::size_t>(Metric::Specificity)];
  const double pr = m[Metric::Precision] + m[Metric::Recall];
  if (pr > 0.0) {
    m[Metric::F1] = 2.0 * m[Metric::Precision] * m[Metric::Recall] / pr;
  } else {
    m[Metric::F1] = 0.0;
    m.undefined[static_cast<std::size_t>(Metric::F1)] = true;
  }
  bool defined = true;
  m[Metric::RocAuc] = roc_auc(truth, scores, &defined);
  m.undefined[static_cast<std::size_t>(Metric::RocAuc)] = !defined;
  return m;
}

// --- datasets ------------------------------------------------------------------

Dataset split_dataset(const FeatureMatrix& combined) {
  std::vector<Index> patient_rows;
  std::vector<Index> pseudo_rows;
  for (Index i = 0; i < combined.rows(); ++i)
    (combined.combos[static_cast<std::size_t>(i)].empty() ? patient_rows : pseudo_rows).push_back(i);
  return {select_rows(combined, patient_rows), select_rows(combined, pseudo_rows)};
}

FeatureMatrix combine_dataset(const Dataset& d) {
  if (d.pseudo.rows() == 0) return d.patients;
  if (d.pseudo.feature_index != d.patients.feature_index)
    throw Error(ErrorCode::WidthMismatch, "patient and pseudo-patient rows use different features");
  FeatureMatrix out;
  out.feature_index = d.patients.feature_index;
  out.values.resize(d.patients.rows() + d.pseudo.rows(), d.patients.cols());
  out.values.topRows(d.patients.rows()) = d.patients.values;
  out.values.bottomRows(d.pseudo.rows()) = d.pseudo.values;
  for (const auto* part : {&d.patients, &d.pseudo}) {
    out.labels.insert(out.labels.end(), part->labels.begin(), part->labels.end());
    out.origins.insert(out.origins.end(), part->origins.begin(), part->origins.end());
    out.combos.insert(out.combos.end(), part->combos.begin(), part->combos.end());
  }
  return out;
}

// --- cross-validation ----------------------------------------------------------

const ModelReport& EvaluationReport::model(std::string_view name) const {
  for (const auto& m : models)
    if (m.model == name) return m;
  throw Error(ErrorCode::IndexOutOfRange, "no model named '" + std::string(name) + "' in the report");
}

namespace {

constexpr std::string_view kEnsembleName = "Ens";

void summarize(ModelReport& r) {
  r.mean.fill(0.0);
  r.std.fill(0.0);
  if (r.folds.empty()) return;
  const auto n = static_cast<double>(r.folds.size());
  for (std::size_t k = 0; k < r.mean.size(); ++k) {
    double sum = 0.0;
    for (const auto& f : r.folds) sum += f.values[k];
    r.mean[k] = sum / n;
    double sq = 0.0;
    for (const auto& f : r.folds) sq += (f.values[k] - r.mean[k]) * (f.values[k] - r.mean[k]);
    r.std[k] = std::sqrt(sq / n);
  }
}

}  // namespace

EvaluationReport cross_validate(const Dataset& data, const RunConfig& config) {
  config.validate();
  const FeatureMatrix& patients = data.patients;
  if (patients.rows() == 0) throw Error(ErrorCode::EmptyCohort, "dataset has no patient-level rows");
  const bool augmented = config.acquisition == AcquisitionMode::MultipleAugmented;
  if (augmented && data.pseudo.rows() == 0)
    throw Error(ErrorCode::InvalidConfig, "multiple-acquisition training needs augmented rows in the dataset");
  const FeatureMatrix& training_pool = augmented ? data.pseudo : data.patients;

  EvaluationReport report;
  report.config = config.entries();
  report.seed = config.seed;
  report.fold_count = config.folds;
  report.plan = plan_folds(patients.origins, patients.labels, config.folds, config.seed);
  for (ModelKind kind : kAllModelKinds) report.models.push_back({std::string(to_string(kind)), {}, {}, {}});
  report.models.push_back({std::string(kEnsembleName), {}, {}, {}});

  const auto pool_folds = assign_rows(report.plan, training_pool);
  const auto patient_folds = assign_rows(report.plan, patients);

  for (int fold = 0; fold < config.folds; ++fold) {
    try {
      std::vector<Index> train_rows;
      for (std::size_t i = 0; i < pool_folds.size(); ++i)
        if (pool_folds[i] != fold) train_rows.push_back(static_cast<Index>(i));
      std::vector<Index> test_rows;
      for (std::size_t i = 0; i < patient_folds.size(); ++i)
        if (patient_folds[i] == fold) test_rows.push_back(static_cast<Index>(i));
      const FeatureMatrix train = select_rows(training_pool, train_rows);
      const FeatureMatrix test = select_rows(patients, test_rows);

      Matrix x_train;
      const FeatureTransform transform = fit_feature_transform(train, config, &x_train);
      const Matrix x_test = transform.apply(test.values);

      const Eigen::VectorXi y_all = train.label_vector();
      const auto order = oversample_indices(y_all, derive_seed(config.seed, 0x0500 + static_cast<std::uint64_t>(fold)));
      Matrix x_fit(static_cast<Index>(order.size()), x_train.cols());
      Eigen::VectorXi y_fit(static_cast<Index>(order.size()));
      for (std::size_t i = 0; i < order.size(); ++i) {
        x_fit.row(static_cast<Index>(i)) = x_train.row(order[i]);
        y_fit[static_cast<Index>(i)] = y_all[order[i]];
      }

      const Eigen::VectorXi truth_vec = test.label_vector();
      const std::vector<int> truth(truth_vec.data(), truth_vec.data() + truth_vec.size());
      std::vector<Matrix> probabilities;
      for (std::size_t m = 0; m < kAllModelKinds.size(); ++m) {
        const ModelKind kind = kAllModelKinds[m];
        const std::uint64_t model_seed =
            derive_seed(config.seed, 0x1000 + 16 * static_cast<std::uint64_t>(fold) + static_cast<std::uint64_t>(kind));
        const Classifier model = fit(kind, x_fit, y_fit, config.hp, model_seed);
        probabilities.push_back(predict_proba(model, x_test));
      }
      for (std::size_t m = 0; m <= kAllModelKinds.size(); ++m) {
        Vector p_pos;
        std::vector<int> predicted(truth.size());
        if (m < kAllModelKinds.size()) {
          p_pos = probabilities[m].col(1);
          for (std::size_t i = 0; i < truth.size(); ++i)
            predicted[i] = probabilities[m](static_cast<Index>(i), 1) > probabilities[m](static_cast<Index>(i), 0);
        } else {
          const VoteResult vote = soft_vote(probabilities);
          p_pos = vote.p_positive;
          for (std::size_t i = 0; i < truth.size(); ++i) predicted[i] = vote.labels[static_cast<Index>(i)];
        }
        const std::vector<double> scores(p_pos.data(), p_pos.data() + p_pos.size());
        report.models[m].folds.push_back(compute_metrics(truth, predicted, scores));
      }
      report.fold_errors.emplace_back();
    } catch (const Error& e) {
      report.fold_errors.emplace_back(e.what());
    }
  }
  if (std::all_of(report.fold_errors.begin(), report.fold_errors.end(), [](const auto& e) { return !e.empty(); }))
    throw Error(ErrorCode::InvalidParams, "every fold failed; first error: " + report.fold_errors.front());
  for (auto& m : report.models) summarize(m);
  return report;
}

// --- report output ---------------------------------------------------------------

std::string format_table(const EvaluationReport& report) {
  std::string out = "Mean results on the test sets (" + std::to_string(report.fold_count) + " splits, seed " +
                    std::to_string(report.seed) + ")\n";
  const auto pad = [](std::string s, std::size_t width) {
    if (s.size() < width) s.append(width - s.size(), ' ');
    return s;
  };
  out += pad("Alg.", 6);
  for (Metric m : kAllMetrics) out += pad(std::string(column_title(m)), 15);
  out += "\n";
  for (const auto& model : report.models) {
    if (model.model == kEnsembleName) out += std::string(6 + 15 * kAllMetrics.size(), '-') + "\n";
    out += pad(model.model, 6);
    for (std::size_t k = 0; k < kAllMetrics.size(); ++k)
      out += pad(text::format_fixed(model.mean[k], 2) + " +/- " + text::format_fixed(model.std[k], 2), 15);
    out += "\n";
  }
  for (std::size_t f = 0; f < report.fold_errors.size(); ++f)
    if (!report.fold_errors[f].empty()) out += "fold " + std::to_string(f) + " failed: " + report.fold_errors[f] + "\n";
  return out;
}

std::string format_report_csv(const EvaluationReport& report) {
  std::string out = "model,fold";
  for (Metric m : kAllMetrics) out += "," + std::string(to_string(m));
  out += ",tp,fp,tn,fn,undefined\n";
  for (const auto& model : report.models) {
    for (std::size_t f = 0; f < model.folds.size(); ++f) {
      const auto& m = model.folds[f];
      out += model.model + "," + std::to_string(f);
      std::string undefined;
      for (std::size_t k = 0; k < kAllMetrics.size(); ++k) {
        out += "," + text::format_double(m.values[k]);
        if (m.undefined[k]) undefined += (undefined.empty() ? "" : ";") + std::string(to_string(kAllMetrics[k]));
      }
      out += "," + std::to_string(m.tp) + "," + std::to_string(m.fp) + "," + std::to_string(m.tn) + "," +
             std::to_string(m.fn) + "," + undefined + "\n";
    }
    for (const auto& [label, values] : {std::pair{"mean", &model.mean}, std::pair{"std", &model.std}}) {
      out += model.model + "," + label;
      for (double v : *values) out += "," + text::format_double(v);
      out += ",,,,,\n";
    }
  }
  return out;
}

std::string format_report_json(const EvaluationReport& report) {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["seed"] = report.seed;
  j["folds"] = report.fold_count;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.config) cfg[k] = v;
  j["config"] = cfg;
  nlohmann::ordered_json plan = nlohmann::ordered_json::object();
  for (const auto& [id, f] : report.plan.assignments) plan[id] = f;
  j["fold_assignments"] = plan;
  j["fold_errors"] = report.fold_errors;
  nlohmann::ordered_json models = nlohmann::ordered_json::array();
  for (const auto& model : report.models) {
    nlohmann::ordered_json entry;
    entry["model"] = model.model;
    nlohmann::ordered_json mean = nlohmann::ordered_json::object();
    nlohmann::ordered_json stdev = nlohmann::ordered_json::object();
    for (std::size_t k = 0; k < kAllMetrics.size(); ++k) {
      mean[std::string(to_string(kAllMetrics[k]))] = model.mean[k];
      stdev[std::string(to_string(kAllMetrics[k]))] = model.std[k];
    }
    entry["mean"] = mean;
    entry["std"] = stdev;
    models.push_back(entry);
  }
  j["models"] = models;
  return j.dump(2) + "\n";
}

void write_report(const EvaluationReport& report, const std::filesystem::path& dir) {
  text::write_file(dir / "report.csv", format_report_csv(report));
  text::write_file(dir / "report.json", format_report_json(report));
  text::write_file(dir / "report.txt", format_table(report));
}

}  // namespace breathms
