#include "breathms/augment.hpp"
#include "breathms/config.hpp"
#include "breathms/eval.hpp"
#include "breathms/ingest.hpp"
#include "breathms/pipeline.hpp"
#include "breathms/synth.hpp"
#include "breathms/text_io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace breathms;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPipeline = 1;
constexpr int kExitUsage = 2;

/// A failure tagged with the stage that raised it.
struct StageError {
  std::string stage;
  Error error;
};

template <typename F>
auto stage(const std::string& name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const Error& e) {
    throw StageError{name, e};
  }
}

bool is_usage_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRow:
    case ErrorCode::NonMonotonicMz:
    case ErrorCode::NegativeIntensity:
    case ErrorCode::UnknownRange:
    case ErrorCode::MzOutOfRange:
    case ErrorCode::IndexGap:
    case ErrorCode::DuplicatePatient:
    case ErrorCode::MissingFile:
    case ErrorCode::VersionMismatch:
    case ErrorCode::EmptyCohort:
    case ErrorCode::InvalidSpec:
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidParams:
      return true;
    default:
      return false;
  }
}

/// Config file plus `--key value` overrides shared by the pipeline subcommands.
struct ConfigOptions {
  std::string config_file;
  std::map<std::string, std::string> overrides;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config_file, "key=value configuration file")->check(CLI::ExistingFile);
    for (const auto& key : config_keys()) {
      if (key == "seed") continue;
      options[key] = cmd.add_option("--" + key, overrides[key], "override config key " + key);
    }
  }

  RunConfig resolve(const std::optional<std::uint64_t>& seed) const {
    RunConfig cfg;
    if (!config_file.empty()) cfg = load_config(config_file, cfg);
    for (const auto& [key, opt] : options)
      if (opt->count() > 0) cfg.set(key, overrides.at(key));
    if (seed) cfg.seed = *seed;
    cfg.validate();
    return cfg;
  }
};

Cohort load_manifest_cohort(const std::string& path) {
  return stage("ingest", [&] {
    const auto manifest = read_manifest(path);
    if (manifest.patients.empty()) throw Error(ErrorCode::EmptyCohort, "manifest " + path + " lists no patients");
    return load_cohort(manifest);
  });
}

ProcessedCohort preprocess_cohort(const Cohort& cohort, const RunConfig& cfg) {
  auto processed = stage("preprocess", [&] { return process_cohort(cohort.patients, cfg); });
  if (processed.patients.empty())
    throw StageError{"preprocess", Error(ErrorCode::EmptyCohort, "every patient was discarded")};
  return processed;
}

void write_processed(const ProcessedCohort& processed, const RunConfig& cfg, const fs::path& out) {
  fs::create_directories(out);

  std::ostringstream discards;
  discards << "patient_id,label,status,detail\n";
  for (const auto& o : processed.outcomes)
    if (o.status != PatientStatus::Ok)
      discards << o.patient_id << ',' << to_string(o.label) << ',' << to_string(o.status) << ",\"" << o.detail << "\"\n";
  text::write_file(out / "discards.csv", discards.str());

  std::ostringstream tic;
  tic << "patient_id,range,acquisition,tic,in_plateau,chosen\n";
  for (const auto& p : processed.patients) {
    for (const auto& r : p.ranges) {
      const auto& sel = r.selection;
      for (Index j = 0; j < r.tic.values.size(); ++j) {
        const bool plateau = j >= sel.plateau_first && j <= sel.plateau_last;
        const bool chosen = j >= sel.window_first && j < sel.window_first + kPlateauWindow;
        tic << p.patient_id << ',' << mass_range(r.range).name() << ',' << j << ','
            << text::format_double(r.tic.values[j]) << ',' << plateau << ',' << chosen << '\n';
      }
    }
  }
  text::write_file(out / "tic.csv", tic.str());

  const FeatureMatrix patients = build_training_matrix(processed.patients, AcquisitionMode::SingleAveraged);
  std::ostringstream spectra;
  spectra << "patient_id,label";
  for (int mz : patients.feature_index) spectra << ",mz" << mz;
  spectra << '\n';
  for (Index i = 0; i < patients.rows(); ++i) {
    spectra << patients.origins[static_cast<std::size_t>(i)] << ',' << to_string(patients.labels[static_cast<std::size_t>(i)]);
    for (Index j = 0; j < patients.cols(); ++j) spectra << ',' << text::format_double(patients.values(i, j));
    spectra << '\n';
  }
  text::write_file(out / "spectra.csv", spectra.str());
  save_dataset(patients, out / "patients.dataset");
  text::write_file(out / "config.txt", format_config(cfg));
}

int report_failure(const std::string& command, const StageError& e) {
  std::cerr << "breathms " << command << ": " << e.stage << " failed: " << e.error.what() << '\n';
  return is_usage_error(e.error.code()) ? kExitUsage : kExitPipeline;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Breath-sample mass-spectrometry classification pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  std::optional<std::uint64_t> seed;
  app.add_option("--seed", seed, "global random seed");

  // gen-synth
  auto* gen = app.add_subcommand("gen-synth", "generate a synthetic cohort with ground truth");
  SynthSpec spec;
  std::string gen_out = "synth";
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--patients", spec.n_patients, "number of patients");
  gen->add_option("--positive-fraction", spec.positive_fraction, "share of positive patients");
  gen->add_option("--min-acquisitions", spec.min_acquisitions, "fewest acquisitions per range");
  gen->add_option("--max-acquisitions", spec.max_acquisitions, "most acquisitions per range");
  gen->add_option("--min-ramp", spec.min_ramp, "shortest pre-plateau ramp");
  gen->add_option("--max-ramp", spec.max_ramp, "longest pre-plateau ramp");
  gen->add_option("--noise", spec.noise, "white-noise level");
  gen->add_option("--drift", spec.baseline_drift, "baseline drift amplitude");
  gen->add_option("--mz-jitter", spec.mz_jitter, "maximum raw peak shift");
  gen->add_option("--class-effect", spec.class_effect, "log-amplitude shift of marker peaks");
  gen->add_option("--outlier-rate", spec.outlier_rate, "share of injected outlier patients");
  gen->add_option("--no-plateau-rate", spec.no_plateau_rate, "share of injected always-rising patients");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "validate a manifest and summarize the cohort");
  std::string ingest_manifest;
  ingest->add_option("--manifest", ingest_manifest, "cohort manifest")->required();

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "align, select plateaus, filter; write spectra, TIC and discards");
  std::string pre_manifest;
  std::string pre_out = "preprocessed";
  bool no_filter = false;
  ConfigOptions pre_cfg;
  pre->add_option("--manifest", pre_manifest, "cohort manifest")->required();
  pre->add_option("--out", pre_out, "output directory");
  pre->add_flag("--no-filter", no_filter, "TIC normalization only, no smoothing or thresholds");
  pre_cfg.attach(*pre);

  // augment
  auto* aug = app.add_subcommand("augment", "write patient-level and augmented feature rows");
  std::string aug_manifest;
  std::string aug_out = "dataset.tsv";
  ConfigOptions aug_cfg;
  aug->add_option("--manifest", aug_manifest, "cohort manifest")->required();
  aug->add_option("--out", aug_out, "dataset file");
  aug_cfg.attach(*aug);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "cross-validate the five models and the ensemble");
  std::string eval_manifest;
  std::string eval_dataset;
  std::string eval_out = "report";
  std::string save_model;
  ConfigOptions eval_cfg;
  auto* eval_m = evaluate->add_option("--manifest", eval_manifest, "cohort manifest");
  auto* eval_d = evaluate->add_option("--dataset", eval_dataset, "dataset written by augment");
  eval_m->excludes(eval_d);
  evaluate->add_option("--out", eval_out, "report directory");
  evaluate->add_option("--save-model", save_model, "also fit on every patient and save the model");
  eval_cfg.attach(*evaluate);

  // predict
  auto* predict = app.add_subcommand("predict", "label patients with a saved model");
  std::string model_file;
  std::string predict_input;
  std::string predict_out;
  predict->add_option("--model", model_file, "model written by evaluate --save-model")->required();
  predict->add_option("--input", predict_input, "acquisition CSV or cohort manifest")->required();
  predict->add_option("--out", predict_out, "output CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    if (*gen) {
      if (seed) spec.seed = *seed;
      const auto cohort = stage("gen-synth", [&] { return generate_cohort(spec); });
      stage("write", [&] { return write_cohort(cohort, gen_out); });
      std::cout << "wrote " << cohort.patients.size() << " patients (" << cohort.positives() << " positive, "
                << cohort.patients.size() - cohort.positives() << " negative) to " << gen_out << '\n';
    } else if (*ingest) {
      const auto cohort = load_manifest_cohort(ingest_manifest);
      std::cout << cohort.summary() << '\n';
      for (const auto& p : cohort.patients) {
        std::cout << p.patient_id << ' ' << to_string(p.label);
        for (const auto& r : mass_ranges()) std::cout << ' ' << r.name() << '=' << p.range(r.id).size();
        std::cout << '\n';
      }
    } else if (*pre) {
      RunConfig cfg = stage("config", [&] { return pre_cfg.resolve(seed); });
      if (no_filter) cfg.filter.filtering = false;
      const auto cohort = load_manifest_cohort(pre_manifest);
      const auto processed = preprocess_cohort(cohort, cfg);
      stage("write", [&] { write_processed(processed, cfg, pre_out); return 0; });
      std::cout << processed.patients.size() << " patients retained, "
                << processed.outcomes.size() - processed.patients.size() << " discarded\n";
    } else if (*aug) {
      const RunConfig cfg = stage("config", [&] { return aug_cfg.resolve(seed); });
      const auto cohort = load_manifest_cohort(aug_manifest);
      const auto processed = preprocess_cohort(cohort, cfg);
      const auto data = stage("augment", [&] { return build_dataset(processed.patients, cfg); });
      stage("write", [&] { save_dataset(combine_dataset(data), aug_out); return 0; });
      std::cout << data.patients.rows() << " patient rows, " << data.pseudo.rows() << " augmented rows\n";
    } else if (*evaluate) {
      const RunConfig cfg = stage("config", [&] { return eval_cfg.resolve(seed); });
      Dataset data;
      if (!eval_dataset.empty()) {
        data = stage("load", [&] { return split_dataset(load_dataset(eval_dataset)); });
      } else if (!eval_manifest.empty()) {
        const auto cohort = load_manifest_cohort(eval_manifest);
        const auto processed = preprocess_cohort(cohort, cfg);
        data = stage("augment", [&] { return build_dataset(processed.patients, cfg); });
      } else {
        std::cerr << "breathms evaluate: one of --manifest or --dataset is required\n";
        return kExitUsage;
      }
      if (cfg.acquisition == AcquisitionMode::MultipleAugmented && data.pseudo.rows() == 0) {
        std::cerr << "breathms evaluate: the dataset has no augmented rows; use --acquisition single\n";
        return kExitUsage;
      }
      const auto report = stage("evaluate", [&] { return cross_validate(data, cfg); });
      stage("write", [&] { write_report(report, eval_out); return 0; });
      std::cout << format_table(report);
      if (!save_model.empty()) {
        const auto fitted = stage("fit", [&] { return fit_pipeline(data, cfg); });
        stage("write", [&] { text::write_file(save_model, serialize_pipeline(fitted)); return 0; });
      }
    } else if (*predict) {
      const auto fitted = stage("load", [&] { return parse_pipeline(text::read_file(model_file)); });
      std::vector<PatientRecord> records = stage("ingest", [&] {
        if (fs::path(predict_input).extension() == ".json") return load_manifest_cohort(predict_input).patients;
        return group_by_patient(parse_acquisition_file(predict_input));
      });
      const auto predictions = stage("predict", [&] { return predict_patients(fitted, records); });
      std::ostringstream out;
      out << "patient_id,status,label,p_positive\n";
      for (const auto& p : predictions) {
        out << p.patient_id << ',' << to_string(p.status) << ',' << (p.label ? std::string(to_string(*p.label)) : "")
            << ',' << (p.label ? text::format_double(p.p_positive) : "") << '\n';
      }
      if (predict_out.empty()) {
        std::cout << out.str();
      } else {
        stage("write", [&] { text::write_file(predict_out, out.str()); return 0; });
      }
    }
  } catch (const StageError& e) {
    return report_failure(command, e);
  } catch (const Error& e) {
    return report_failure(command, StageError{"run", e});
  } catch (const std::exception& e) {
    std::cerr << "breathms " << command << ": " << e.what() << '\n';
    return kExitPipeline;
  }
  return kExitOk;
}
