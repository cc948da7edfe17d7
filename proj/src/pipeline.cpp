#include "breathms/pipeline.hpp"
#include "breathms/rng.hpp"
#include "breathms/text_io.hpp"

#include <json.hpp>

#include <algorithm>

namespace breathms {

using nlohmann::json;

// --- cohort preprocessing ------------------------------------------------------

std::size_t ProcessedCohort::count(PatientStatus status) const {
  return static_cast<std::size_t>(
      std::count_if(outcomes.begin(), outcomes.end(), [&](const PatientOutcome& o) { return o.status == status; }));
}

namespace {

// Preprocesses the experiment ranges of one patient, or reports why it cannot be used.
std::optional<ProcessedPatient> process_patient(const PatientRecord& record, const RunConfig& config,
                                                PatientOutcome& outcome) {
  ProcessedPatient patient;
  patient.patient_id = record.patient_id;
  patient.label = record.label;
  for (RangeId id : config.experiment_ranges()) {
    if (!record.has_range(id)) {
      outcome.status = PatientStatus::Incomplete;
      outcome.detail = "missing " + std::string(mass_range(id).name());
      return std::nullopt;
    }
    try {
      patient.ranges.push_back(preprocess_range(record.range(id), config.filter));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoPlateau) throw;
      outcome.status = PatientStatus::NoPlateau;
      outcome.detail = std::string(mass_range(id).name()) + ": " + e.what();
      return std::nullopt;
    }
  }
  return patient;
}

}  // namespace

ProcessedCohort process_cohort(std::span<const PatientRecord> records, const RunConfig& config) {
  config.validate();
  ProcessedCohort out;
  std::vector<ProcessedPatient> candidates;
  std::vector<std::size_t> candidate_outcome;
  for (const auto& record : records) {
    PatientOutcome outcome{record.patient_id, record.label, PatientStatus::Ok, {}};
    auto processed = process_patient(record, config, outcome);
    if (processed) {
      candidates.push_back(std::move(*processed));
      candidate_outcome.push_back(out.outcomes.size());
    }
    out.outcomes.push_back(std::move(outcome));
  }
  if (candidates.empty()) return out;

  Index width = 0;
  for (const auto& r : candidates.front().ranges) width += r.normalized.size();
  Matrix features(static_cast<Index>(candidates.size()), width);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    Index offset = 0;
    for (const auto& r : candidates[i].ranges) {
      features.row(static_cast<Index>(i)).segment(offset, r.normalized.size()) = r.normalized.intensities.transpose();
      offset += r.normalized.size();
    }
  }
  const OutlierResult outliers = remove_outliers(features, config.filter.z_thresh);
  for (Index r : outliers.removed) {
    auto& outcome = out.outcomes[candidate_outcome[static_cast<std::size_t>(r)]];
    outcome.status = PatientStatus::Outlier;
    outcome.detail = "|z| > " + text::format_double(config.filter.z_thresh);
  }
  for (Index r : outliers.retained) out.patients.push_back(std::move(candidates[static_cast<std::size_t>(r)]));
  return out;
}

Dataset build_dataset(std::span<const ProcessedPatient> patients, const RunConfig& config) {
  Dataset d;
  d.patients = build_training_matrix(patients, AcquisitionMode::SingleAveraged);
  if (config.acquisition == AcquisitionMode::MultipleAugmented) {
    d.pseudo = build_training_matrix(patients, AcquisitionMode::MultipleAugmented, config.augment_cap);
  } else {
    d.pseudo.feature_index = d.patients.feature_index;
    d.pseudo.values.resize(0, d.patients.cols());
  }
  return d;
}

// --- feature stages ------------------------------------------------------------

Matrix FeatureTransform::apply(const Matrix& x) const {
  if (x.cols() != static_cast<Index>(input_features.size()))
    throw Error(ErrorCode::WidthMismatch, "expected " + std::to_string(input_features.size()) + " features, got " +
                                              std::to_string(x.cols()));
  Matrix out = apply_scaler(scaler, select_columns(x, kept));
  if (!selected.empty()) out = select_columns(out, selected);
  if (pca) out = project(*pca, out);
  return out;
}

Index FeatureTransform::output_width() const {
  if (pca) return pca->n_components();
  return static_cast<Index>(selected.empty() ? kept.size() : selected.size());
}

FeatureTransform fit_feature_transform(const FeatureMatrix& train, const RunConfig& config, Matrix* transformed) {
  if (train.rows() < 2) throw Error(ErrorCode::EmptyInput, "need at least two training rows");
  FeatureTransform t;
  t.input_features = train.feature_index;
  t.kept = varying_columns(train.values);
  if (t.kept.empty()) throw Error(ErrorCode::AllFeaturesConstant, "every training feature is constant");
  Matrix x = select_columns(train.values, t.kept);
  t.scaler = fit_scaler(config.scaler, x);
  x = apply_scaler(t.scaler, x);
  if (config.surf) {
    t.selected = fit_surf_star(x, train.label_vector(), config.surf_options).selected;
    x = select_columns(x, t.selected);
  }
  if (config.pca_components > 0) {
    t.pca = fit_pca(x, config.pca_components);
    x = project(*t.pca, x);
  }
  if (transformed) *transformed = std::move(x);
  return t;
}

FittedPipeline fit_pipeline(const Dataset& data, const RunConfig& config) {
  config.validate();
  const bool augmented = config.acquisition == AcquisitionMode::MultipleAugmented && data.pseudo.rows() > 0;
  const FeatureMatrix& train = augmented ? data.pseudo : data.patients;
  FittedPipeline p;
  p.config = config;
  Matrix x;
  p.transform = fit_feature_transform(train, config, &x);
  const Eigen::VectorXi y = train.label_vector();
  const auto order = oversample_indices(y, derive_seed(config.seed, 0x0600));
  Matrix x_fit(static_cast<Index>(order.size()), x.cols());
  Eigen::VectorXi y_fit(static_cast<Index>(order.size()));
  for (std::size_t i = 0; i < order.size(); ++i) {
    x_fit.row(static_cast<Index>(i)) = x.row(order[i]);
    y_fit[static_cast<Index>(i)] = y[order[i]];
  }
  p.ensemble = fit_ensemble(x_fit, y_fit, config.hp, derive_seed(config.seed, 0x2000));
  return p;
}

// --- serialization ---------------------------------------------------------------

namespace {

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector json_vector(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) rows.push_back(vector_json(m.row(r).transpose()));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

Matrix json_matrix(const json& j) {
  Matrix m(j.at("rows").get<Index>(), j.at("cols").get<Index>());
  const auto& rows = j.at("data");
  if (static_cast<Index>(rows.size()) != m.rows()) throw Error(ErrorCode::InvalidConfig, "matrix row count mismatch");
  for (Index r = 0; r < m.rows(); ++r) {
    const Vector row = json_vector(rows[static_cast<std::size_t>(r)]);
    if (row.size() != m.cols()) throw Error(ErrorCode::InvalidConfig, "matrix column count mismatch");
    m.row(r) = row.transpose();
  }
  return m;
}

json tree_json(const DecisionTree& t) {
  std::vector<int> feature;
  std::vector<double> threshold;
  std::vector<int> left;
  std::vector<int> right;
  std::vector<double> value;
  for (const auto& n : t.nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
  }
  return json{{"feature", feature}, {"threshold", threshold}, {"left", left}, {"right", right}, {"value", value}};
}

DecisionTree json_tree(const json& j) {
  const auto feature = j.at("feature").get<std::vector<int>>();
  const auto threshold = j.at("threshold").get<std::vector<double>>();
  const auto left = j.at("left").get<std::vector<int>>();
  const auto right = j.at("right").get<std::vector<int>>();
  const auto value = j.at("value").get<std::vector<double>>();
  DecisionTree t;
  for (std::size_t i = 0; i < feature.size(); ++i) t.nodes.push_back({feature[i], threshold[i], left[i], right[i], value[i]});
  return t;
}

json classifier_json(const Classifier& c) {
  json j;
  j["kind"] = std::string(to_string(kind_of(c)));
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, KnnModel>) {
          j["k"] = m.k;
          j["train"] = matrix_json(m.train);
          j["labels"] = std::vector<int>(m.labels.data(), m.labels.data() + m.labels.size());
        } else if constexpr (std::is_same_v<T, LogisticModel>) {
          j["weights"] = vector_json(m.weights);
          j["bias"] = m.bias;
          j["l2"] = m.l2;
        } else if constexpr (std::is_same_v<T, RandomForestModel>) {
          j["n_features"] = m.n_features;
          json trees = json::array();
          for (const auto& t : m.trees) trees.push_back(tree_json(t));
          j["trees"] = trees;
        } else if constexpr (std::is_same_v<T, GradientBoostingModel>) {
          j["n_features"] = m.n_features;
          j["init_score"] = m.init_score;
          j["shrinkage"] = m.shrinkage;
          json trees = json::array();
          for (const auto& t : m.trees) trees.push_back(tree_json(t));
          j["trees"] = trees;
        } else {
          j["support"] = matrix_json(m.support);
          j["dual_coef"] = vector_json(m.dual_coef);
          j["rho"] = m.rho;
          j["gamma"] = m.gamma;
          j["platt_a"] = m.platt_a;
          j["platt_b"] = m.platt_b;
        }
      },
      c);
  return j;
}

Classifier json_classifier(const json& j) {
  switch (parse_model_kind(j.at("kind").get<std::string>())) {
    case ModelKind::Knn: {
      KnnModel m;
      m.k = j.at("k").get<int>();
      m.train = json_matrix(j.at("train"));
      const auto labels = j.at("labels").get<std::vector<int>>();
      m.labels = Eigen::Map<const Eigen::VectorXi>(labels.data(), static_cast<Index>(labels.size()));
      return m;
    }
    case ModelKind::LogisticRegression: {
      LogisticModel m;
      m.weights = json_vector(j.at("weights"));
      m.bias = j.at("bias").get<double>();
      m.l2 = j.at("l2").get<double>();
      return m;
    }
    case ModelKind::RandomForest: {
      RandomForestModel m;
      m.n_features = j.at("n_features").get<Index>();
      for (const auto& t : j.at("trees")) m.trees.push_back(json_tree(t));
      return m;
    }
    case ModelKind::GradientBoosting: {
      GradientBoostingModel m;
      m.n_features = j.at("n_features").get<Index>();
      m.init_score = j.at("init_score").get<double>();
      m.shrinkage = j.at("shrinkage").get<double>();
      for (const auto& t : j.at("trees")) m.trees.push_back(json_tree(t));
      return m;
    }
    case ModelKind::SvmRbf: {
      SvmModel m;
      m.support = json_matrix(j.at("support"));
      m.dual_coef = json_vector(j.at("dual_coef"));
      m.rho = j.at("rho").get<double>();
      m.gamma = j.at("gamma").get<double>();
      m.platt_a = j.at("platt_a").get<double>();
      m.platt_b = j.at("platt_b").get<double>();
      return m;
    }
  }
  throw Error(ErrorCode::InvalidConfig, "unknown model kind");
}

std::vector<Index> json_indices(const json& j) { return j.get<std::vector<Index>>(); }

}  // namespace

std::string serialize_pipeline(const FittedPipeline& p) {
  json j;
  j["format"] = "breathms-model";
  j["format_version"] = 1;
  json cfg = json::object();
  for (const auto& [k, v] : p.config.entries()) cfg[k] = v;
  j["config"] = cfg;

  const auto& t = p.transform;
  json transform;
  transform["input_features"] = t.input_features;
  transform["kept"] = t.kept;
  transform["scaler"] = json{{"kind", std::string(to_string(t.scaler.kind))},
                             {"location", vector_json(t.scaler.location)},
                             {"scale", vector_json(t.scaler.scale)},
                             {"degenerate", t.scaler.degenerate}};
  transform["selected"] = t.selected;
  if (t.pca) {
    transform["pca"] = json{{"mean", vector_json(t.pca->mean)},
                            {"components", matrix_json(t.pca->components)},
                            {"explained_variance", vector_json(t.pca->explained_variance)},
                            {"total_variance", t.pca->total_variance},
                            {"requested", t.pca->requested},
                            {"reduced", t.pca->reduced}};
  }
  j["transform"] = transform;
  json members = json::array();
  for (const auto& m : p.ensemble.members) members.push_back(classifier_json(m));
  j["ensemble"] = members;
  return j.dump() + "\n";
}

FittedPipeline parse_pipeline(std::string_view json_text) {
  try {
    const json j = json::parse(json_text);
    if (j.at("format").get<std::string>() != "breathms-model")
      throw Error(ErrorCode::InvalidConfig, "not a breathms model file");
    if (j.at("format_version").get<int>() != 1)
      throw Error(ErrorCode::VersionMismatch, "unsupported model format version");
    FittedPipeline p;
    for (const auto& [k, v] : j.at("config").items()) p.config.set(k, v.get<std::string>());

    const auto& tj = j.at("transform");
    auto& t = p.transform;
    t.input_features = tj.at("input_features").get<std::vector<int>>();
    t.kept = json_indices(tj.at("kept"));
    const auto& sj = tj.at("scaler");
    t.scaler.kind = parse_scaler_kind(sj.at("kind").get<std::string>());
    t.scaler.location = json_vector(sj.at("location"));
    t.scaler.scale = json_vector(sj.at("scale"));
    t.scaler.degenerate = json_indices(sj.at("degenerate"));
    t.selected = json_indices(tj.at("selected"));
    if (tj.contains("pca")) {
      const auto& pj = tj.at("pca");
      PcaModel pca;
      pca.mean = json_vector(pj.at("mean"));
      pca.components = json_matrix(pj.at("components"));
      pca.explained_variance = json_vector(pj.at("explained_variance"));
      pca.total_variance = pj.at("total_variance").get<double>();
      pca.requested = pj.at("requested").get<Index>();
      pca.reduced = pj.at("reduced").get<bool>();
      t.pca = std::move(pca);
    }
    for (const auto& m : j.at("ensemble")) p.ensemble.members.push_back(json_classifier(m));
    if (p.ensemble.members.empty()) throw Error(ErrorCode::InvalidConfig, "model file has no ensemble members");
    for (const auto& m : p.ensemble.members)
      if (input_width(m) != t.output_width())
        throw Error(ErrorCode::HeterogeneousMembers, "ensemble member width does not match the feature stages");
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed model file: ") + e.what());
  }
}

// --- prediction ------------------------------------------------------------------

std::vector<PatientPrediction> predict_patients(const FittedPipeline& p, std::span<const PatientRecord> records) {
  std::vector<PatientPrediction> out;
  for (const auto& record : records) {
    PatientPrediction pred;
    pred.patient_id = record.patient_id;
    PatientOutcome outcome{record.patient_id, record.label, PatientStatus::Ok, {}};
    const auto processed = process_patient(record, p.config, outcome);
    pred.status = outcome.status;
    if (processed) {
      const AlignedSpectrum s = test_time_aggregate(*processed);
      const Matrix row = s.intensities.transpose();
      const VoteResult vote = soft_vote(p.ensemble, p.transform.apply(row));
      pred.label = vote.labels[0] == 1 ? Label::Positive : Label::Negative;
      pred.p_positive = vote.p_positive[0];
    }
    out.push_back(std::move(pred));
  }
  return out;
}

}  // namespace breathms
