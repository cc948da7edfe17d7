#include "breathms/pipeline.hpp"
#include "breathms/synth.hpp"
#include "breathms/text_io.hpp"

#include <doctest.h>

#include <filesystem>

using namespace breathms;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("breathms_synth_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::map<std::string, std::string> tree_contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = text::read_file(e.path());
  return out;
}

double ensemble_accuracy(const SynthSpec& spec) {
  const auto cohort = generate_cohort(spec);
  RunConfig config;
  config.acquisition = AcquisitionMode::SingleAveraged;
  config.range = RangeId::R2;
  const auto processed = process_cohort(cohort.patients, config);
  const auto report = cross_validate(build_dataset(processed.patients, config), config);
  return report.model("Ens").mean[static_cast<std::size_t>(Metric::BalancedAccuracy)];
}

}  // namespace

TEST_CASE("same seed writes byte-identical files") {
  SynthSpec spec;
  spec.seed = 7;
  spec.n_patients = 4;
  const auto a = temp_dir("a");
  const auto b = temp_dir("b");
  write_cohort(generate_cohort(spec), a);
  write_cohort(generate_cohort(spec), b);
  const auto ca = tree_contents(a);
  CHECK(ca.size() == 6);
  CHECK(ca == tree_contents(b));

  spec.seed = 8;
  const auto c = temp_dir("c");
  write_cohort(generate_cohort(spec), c);
  CHECK(tree_contents(c) != ca);
}

TEST_CASE("written files parse back to the generated cohort") {
  SynthSpec spec;
  spec.seed = 2;
  spec.n_patients = 3;
  const auto cohort = generate_cohort(spec);
  const auto dir = temp_dir("parse");
  write_cohort(cohort, dir);
  const auto loaded = load_cohort(read_manifest(dir / "manifest.json"));
  REQUIRE(loaded.patients.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(loaded.patients[i].patient_id == cohort.patients[i].patient_id);
    CHECK(loaded.patients[i].label == cohort.patients[i].label);
    for (const auto& r : mass_ranges()) {
      const auto& x = loaded.patients[i].range(r.id);
      const auto& y = cohort.patients[i].range(r.id);
      REQUIRE(x.size() == y.size());
      for (std::size_t k = 0; k < x.size(); ++k) CHECK(x[k] == y[k]);
    }
  }
  CHECK(text::read_file(dir / "truth.json") == truth_json(cohort));
}

TEST_CASE("302 patients at 91/302 positive") {
  SynthSpec spec;
  spec.n_patients = 302;
  spec.positive_fraction = 91.0 / 302.0;
  spec.min_acquisitions = 10;
  spec.max_acquisitions = 10;
  const auto cohort = generate_cohort(spec);
  CHECK(cohort.positives() == 91);
  Cohort c;
  for (const auto& p : cohort.patients) (p.label == Label::Positive ? c.positives : c.negatives)++;
  CHECK(c.summary() == "91 positive, 211 negative");
  CHECK(cohort.patients.front().patient_id == "P001");
  CHECK(cohort.patients.back().patient_id == "P302");
}

TEST_CASE("generator truth shape") {
  SynthSpec spec;
  spec.seed = 4;
  spec.n_patients = 20;
  const auto cohort = generate_cohort(spec);
  for (std::size_t i = 0; i < cohort.truth.size(); ++i) {
    const auto& t = cohort.truth[i];
    for (const auto& r : mass_ranges()) {
      const auto& rt = t.ranges[static_cast<std::size_t>(r.id)];
      CHECK(rt.acquisitions >= spec.min_acquisitions);
      CHECK(rt.acquisitions <= spec.max_acquisitions);
      CHECK(static_cast<int>(cohort.patients[i].range(r.id).size()) == rt.acquisitions);
      CHECK(rt.plateau_first == rt.ramp + 1);
      CHECK(rt.window_first >= rt.plateau_first);
      CHECK(rt.window_first + 3 <= rt.plateau_last);
      for (const auto& apexes : rt.apex_mz)
        for (std::size_t p = 0; p < apexes.size(); ++p) CHECK(std::abs(apexes[p] - rt.peak_mz[p]) <= spec.mz_jitter + 1e-9);
    }
  }
}

TEST_CASE("noiseless cohort shows zero discrepancies") {
  SynthSpec spec;
  spec.seed = 5;
  spec.n_patients = 12;
  spec.noise = 0.0;
  const auto cohort = generate_cohort(spec);
  const RunConfig config;
  const auto processed = process_cohort(cohort.patients, config);
  const auto issues = ground_truth_check(cohort, processed, config);
  for (const auto& issue : issues) MESSAGE(issue);
  CHECK(issues.empty());
  CHECK(processed.patients.size() == 12);
}

TEST_CASE("injected anomalies are flagged with their status") {
  SynthSpec spec;
  spec.seed = 6;
  spec.n_patients = 150;
  spec.min_acquisitions = 10;
  spec.max_acquisitions = 10;
  spec.noise = 0.0;
  spec.outlier_rate = 2.0 / 150.0;
  spec.no_plateau_rate = 0.05;
  const auto cohort = generate_cohort(spec);
  int outliers = 0, rising = 0;
  for (const auto& t : cohort.truth) {
    outliers += t.anomaly == InjectedAnomaly::Outlier;
    rising += t.anomaly == InjectedAnomaly::NoPlateau;
  }
  CHECK(outliers > 0);
  CHECK(rising > 0);
  const RunConfig config;
  const auto processed = process_cohort(cohort.patients, config);
  CHECK(ground_truth_check(cohort, processed, config).empty());
  CHECK(processed.count(PatientStatus::Outlier) == static_cast<std::size_t>(outliers));
  CHECK(processed.count(PatientStatus::NoPlateau) == static_cast<std::size_t>(rising));
  for (std::size_t i = 0; i < cohort.truth.size(); ++i)
    CHECK(processed.outcomes[i].status == cohort.truth[i].expected_status());
}

TEST_CASE("invalid specs are rejected") {
  const auto rejects = [](auto mutate) {
    SynthSpec spec;
    mutate(spec);
    try {
      spec.validate();
    } catch (const Error& e) {
      return e.code() == ErrorCode::InvalidSpec;
    }
    return false;
  };
  CHECK(rejects([](SynthSpec& s) { s.positive_fraction = 1.5; }));
  CHECK(rejects([](SynthSpec& s) { s.positive_fraction = 0.0; }));
  CHECK(rejects([](SynthSpec& s) { s.n_patients = 0; }));
  CHECK(rejects([](SynthSpec& s) { s.min_acquisitions = 8; }));
  CHECK(rejects([](SynthSpec& s) { s.max_acquisitions = 25; }));
  CHECK(rejects([](SynthSpec& s) { s.noise = -1; }));
  CHECK(rejects([](SynthSpec& s) { s.mz_jitter = 0.6; }));
  CHECK(rejects([](SynthSpec& s) {
    s.outlier_rate = 0.6;
    s.no_plateau_rate = 0.6;
  }));
  CHECK(!rejects([](SynthSpec&) {}));
  SynthSpec bad;
  bad.n_patients = 0;
  CHECK_THROWS_AS(generate_cohort(bad), Error);
}

TEST_CASE("more noise never makes the task easier") {
  SynthSpec spec;
  spec.seed = 21;
  spec.n_patients = 80;
  spec.min_acquisitions = 10;
  spec.max_acquisitions = 12;
  double previous = 2.0;
  for (double noise : {0.05, 1.0, 4.0}) {
    spec.noise = noise;
    const double ba = ensemble_accuracy(spec);
    MESSAGE("noise " << noise << " balanced accuracy " << ba);
    CHECK(ba <= previous + 0.02);
    previous = ba;
  }
}
