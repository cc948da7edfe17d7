#include "breathms/pipeline.hpp"
#include "breathms/rng.hpp"
#include "breathms/savitzky_golay.hpp"
#include "breathms/synth.hpp"
#include "breathms/text_io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

using namespace breathms;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) { return text::format_fixed(v, digits); }

double metric(const ModelReport& m, Metric k) { return m.mean[static_cast<std::size_t>(k)]; }
double metric_std(const ModelReport& m, Metric k) { return m.std[static_cast<std::size_t>(k)]; }

// --- 1 -----------------------------------------------------------------------------

Outcome sg_exactness() {
  Rng rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int window = 5 + 2 * static_cast<int>(rng.below(14));
    const int polyorder = static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min(window - 1, 6)) + 1));
    const int degree = static_cast<int>(rng.below(static_cast<std::uint64_t>(polyorder) + 1));
    const int n = 50 + static_cast<int>(rng.below(200));
    std::vector<double> c(static_cast<std::size_t>(degree) + 1);
    for (auto& v : c) v = rng.uniform(-2, 2);
    Vector x(n);
    for (int i = 0; i < n; ++i) {
      const double t = (static_cast<double>(i) - n / 2.0) / n;
      double y = 0.0;
      for (int d = degree; d >= 0; --d) y = y * t + c[static_cast<std::size_t>(d)];
      x[i] = y;
    }
    const Vector y = savitzky_golay(x, window, polyorder);
    const int half = window / 2;
    for (int i = half; i < n - half; ++i) worst = std::max(worst, std::abs(y[i] - x[i]));
  }
  const Vector k = savgol_kernel(5, 2);
  const double expected[] = {-3, 12, 17, 12, -3};
  double kernel_err = 0.0;
  for (int i = 0; i < 5; ++i) kernel_err = std::max(kernel_err, std::abs(k[i] - expected[i] / 35.0));
  return {worst <= 1e-9 && kernel_err <= 1e-12,
          "max interior error " + std::to_string(worst) + ", kernel error " + std::to_string(kernel_err)};
}

// --- 2 -----------------------------------------------------------------------------

double plateau_recovery(double noise) {
  SynthSpec spec;
  spec.seed = 202;
  spec.n_patients = 100;
  spec.noise = noise;
  const auto cohort = generate_cohort(spec);
  const FilterParams params;
  int hits = 0;
  for (std::size_t i = 0; i < cohort.patients.size(); ++i) {
    bool all = true;
    for (const auto& r : mass_ranges()) {
      const auto& acqs = cohort.patients[i].range(r.id);
      std::vector<AlignedSpectrum> aligned;
      for (const auto& a : acqs) aligned.push_back(align_peaks(a, params.peak_floor));
      const auto sel = find_plateau(compute_tic(aligned), params.plateau_q);
      const auto& t = cohort.truth[i].ranges[static_cast<std::size_t>(r.id)];
      all = all && sel.plateau_first == t.plateau_first && sel.plateau_last == t.plateau_last &&
            sel.window_first == t.window_first;
    }
    hits += all;
  }
  return hits / 100.0;
}

Outcome plateau_oracle() {
  const double clean = plateau_recovery(0.0);
  const double noisy = plateau_recovery(0.05);
  return {clean == 1.0 && noisy >= 0.95, "noiseless " + fmt(100 * clean, 1) + "%, noise 0.05 " + fmt(100 * noisy, 1) + "%"};
}

// --- 3 -----------------------------------------------------------------------------

Outcome peak_alignment() {
  SynthSpec spec;
  spec.seed = 303;
  spec.n_patients = 20;
  spec.noise = 0.0;
  spec.mz_jitter = 0.4;
  const auto cohort = generate_cohort(spec);
  const RunConfig config;
  const auto processed = process_cohort(cohort.patients, config);
  const auto issues = ground_truth_check(cohort, processed, config);
  std::size_t peaks = 0;
  for (const auto& t : cohort.truth)
    for (const auto& r : t.ranges) peaks += r.peak_mz.size() * static_cast<std::size_t>(r.acquisitions);

  Rng rng(304);
  int identity_failures = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto& range = mass_ranges()[rng.below(4)];
    RawAcquisition raw{"X", range.id, 0, Vector(range.bins()), Vector(range.bins())};
    for (int mz = range.lo; mz <= range.hi; ++mz) {
      raw.mz[mz - range.lo] = mz;
      raw.intensity[mz - range.lo] = rng.uniform() < 0.2 ? 0.0 : rng.uniform(0, 1000);
    }
    const auto aligned = align_peaks(raw, config.filter.peak_floor);
    identity_failures += !(aligned.intensities == raw.intensity);
  }
  std::string detail = std::to_string(peaks) + " peak placements checked, " + std::to_string(issues.size()) +
                       " discrepancies; " + std::to_string(identity_failures) + "/50 integer-grid inputs changed";
  if (!issues.empty()) detail += "; first: " + issues.front();
  return {issues.empty() && identity_failures == 0, detail};
}

// --- 4 -----------------------------------------------------------------------------

Outcome augmentation_counting() {
  SynthSpec spec;
  spec.seed = 404;
  spec.n_patients = 50;
  const auto cohort = generate_cohort(spec);
  const RunConfig config;
  const auto processed = process_cohort(cohort.patients, config);
  int failures = 0;
  std::size_t total = 0;
  for (const auto& p : processed.patients) {
    std::vector<std::size_t> counts;
    std::size_t product = 1;
    for (const auto& r : p.ranges) {
      counts.push_back(r.processed_chosen.size());
      product *= r.processed_chosen.size();
    }
    const auto pseudo = augment_patient(p);
    total += pseudo.size();
    std::set<Combo> expected;
    std::function<void(Combo&)> enumerate = [&](Combo& c) {
      if (c.size() == counts.size()) {
        expected.insert(c);
        return;
      }
      for (std::size_t i = 0; i < counts[c.size()]; ++i) {
        c.push_back(static_cast<int>(i));
        enumerate(c);
        c.pop_back();
      }
    };
    Combo scratch;
    enumerate(scratch);
    std::set<Combo> seen;
    std::set<std::string> ids;
    bool ok = pseudo.size() == product && expected.size() == product;
    for (const auto& q : pseudo) {
      seen.insert(q.combo);
      ids.insert(q.id());
      std::string code;
      for (int c : q.combo) code += static_cast<char>('A' + c);
      ok = ok && q.id() == p.patient_id + "-" + code && q.label == p.label;
    }
    ok = ok && seen == expected && ids.size() == product;
    failures += !ok;
  }
  return {failures == 0 && processed.patients.size() == 50,
          std::to_string(processed.patients.size()) + " patients, " + std::to_string(total) + " pseudo-patients, " +
              std::to_string(failures) + " mismatches"};
}

// --- 5 -----------------------------------------------------------------------------

Outcome leakage_audit_check() {
  Rng rng(505);
  int leaky_plans = 0;
  int wrong_counts = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int patients = 20 + static_cast<int>(rng.below(60));
    FeatureMatrix m;
    m.feature_index = {1};
    std::vector<std::string> ids;
    std::vector<Label> labels;
    std::vector<double> values;
    for (int p = 0; p < patients; ++p) {
      ids.push_back("P" + std::to_string(p));
      labels.push_back(rng.uniform() < 0.3 ? Label::Positive : Label::Negative);
      const int rows = 1 + static_cast<int>(rng.below(16));
      for (int k = 0; k < rows; ++k) {
        values.push_back(rng.normal());
        m.origins.push_back(ids.back());
        m.labels.push_back(labels.back());
        m.combos.push_back({k});
      }
    }
    m.values = Eigen::Map<Vector>(values.data(), static_cast<Index>(values.size()));
    const auto plan = plan_folds(ids, labels, 10, rng.below(1'000'000));
    auto folds = assign_rows(plan, m);
    if (!leakage_audit(m, folds).empty()) ++leaky_plans;

    // Move one row of `injected` distinct multi-row patients to another fold.
    std::map<std::string, std::vector<std::size_t>> rows_of;
    for (std::size_t r = 0; r < m.origins.size(); ++r) rows_of[m.origins[r]].push_back(r);
    std::vector<std::string> candidates;
    for (const auto& [id, rows] : rows_of)
      if (rows.size() > 1) candidates.push_back(id);
    rng.shuffle(candidates.begin(), candidates.end());
    const std::size_t injected = std::min<std::size_t>(candidates.size(), 1 + rng.below(5));
    for (std::size_t i = 0; i < injected; ++i) {
      const auto r = rows_of[candidates[i]].back();
      folds[r] = (folds[r] + 1 + static_cast<int>(rng.below(9))) % 10;
    }
    if (leakage_audit(m, folds).size() != injected) ++wrong_counts;
  }
  return {leaky_plans == 0 && wrong_counts == 0,
          std::to_string(leaky_plans) + "/100 plans leaked, " + std::to_string(wrong_counts) +
              "/100 corrupted plans miscounted"};
}

// --- 6 -----------------------------------------------------------------------------

Outcome metric_oracles() {
  Rng rng(606);
  double worst = 0.0;
  double worst_auc = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(999);
    std::vector<int> truth(n), pred(n);
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = static_cast<int>(rng.below(2));
      scores[i] = std::round(rng.uniform() * 50.0) / 50.0;
      pred[i] = rng.uniform() < 0.5 ? truth[i] : 1 - truth[i];
    }
    const auto m = compute_metrics(truth, pred, scores);
    double tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      tp += truth[i] && pred[i];
      fp += !truth[i] && pred[i];
      tn += !truth[i] && !pred[i];
      fn += truth[i] && !pred[i];
    }
    const double precision = tp + fp ? tp / (tp + fp) : 0.0;
    const double recall = tp + fn ? tp / (tp + fn) : 0.0;
    const double specificity = tn + fp ? tn / (tn + fp) : 0.0;
    const double f1 = precision + recall ? 2 * precision * recall / (precision + recall) : 0.0;
    const double ba = (recall + specificity) / 2;
    for (auto [got, want] : std::vector<std::pair<double, double>>{{m[Metric::Precision], precision},
                                                                    {m[Metric::Recall], recall},
                                                                    {m[Metric::Specificity], specificity},
                                                                    {m[Metric::F1], f1},
                                                                    {m[Metric::BalancedAccuracy], ba}})
      worst = std::max(worst, std::abs(got - want));
    if (tp + fn > 0 && tn + fp > 0) {
      double wins = 0, pairs = 0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (truth[i] && !truth[j]) {
            pairs += 1;
            wins += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
          }
      worst_auc = std::max(worst_auc, std::abs(m[Metric::RocAuc] - wins / pairs));
    }
  }
  return {worst <= 1e-12 && worst_auc <= 1e-9,
          "max metric error " + std::to_string(worst) + ", max AUC error " + std::to_string(worst_auc)};
}

// --- 7 -----------------------------------------------------------------------------

// Cyclic Jacobi rotations; eigenpairs sorted by descending eigenvalue.
std::pair<Vector, Matrix> jacobi_eigen(Matrix a) {
  const Index n = a.rows();
  Matrix v = Matrix::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Index x, Index y) { return a(x, x) > a(y, y); });
  Vector values(n);
  Matrix vectors(n, n);
  for (Index i = 0; i < n; ++i) {
    values[i] = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
    vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  return {values, vectors};
}

Outcome pca_correctness() {
  Rng rng(707);
  double var_err = 0.0, proj_err = 0.0, ortho_err = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    Matrix x(100, 50);
    for (Index i = 0; i < 100; ++i)
      for (Index j = 0; j < 50; ++j) x(i, j) = rng.normal() * (1.0 + 0.05 * static_cast<double>(j));
    const auto pca = fit_pca(x, 50);
    const Matrix centered = x.rowwise() - x.colwise().mean();
    const auto [values, vectors] = jacobi_eigen(centered.transpose() * centered / 99.0);
    const Matrix z = project(pca, x);
    for (Index k = 0; k < pca.n_components(); ++k) {
      var_err = std::max(var_err, std::abs(pca.explained_variance[k] - values[k]));
      const Vector oracle = centered * vectors.col(k);
      const double sign = z.col(k).dot(oracle) >= 0 ? 1.0 : -1.0;
      proj_err = std::max(proj_err, (z.col(k) - sign * oracle).cwiseAbs().maxCoeff());
    }
    const Index k = pca.n_components();
    ortho_err = std::max(ortho_err, (pca.components * pca.components.transpose() - Matrix::Identity(k, k)).cwiseAbs().maxCoeff());
  }
  return {var_err <= 1e-6 && proj_err <= 1e-6 && ortho_err <= 1e-8,
          "variance error " + std::to_string(var_err) + ", projection error " + std::to_string(proj_err) +
              ", orthonormality error " + std::to_string(ortho_err)};
}

// --- 8, 9, 10 ----------------------------------------------------------------------

const fs::path kOut = fs::temp_directory_path() / "breathms_acceptance";

SynthCohort protocol_cohort() {
  SynthSpec spec;
  spec.seed = 2026;
  spec.n_patients = 300;
  spec.positive_fraction = 0.3;
  return generate_cohort(spec);
}

EvaluationReport run_protocol(std::span<const PatientRecord> records, const RunConfig& config) {
  const auto processed = process_cohort(records, config);
  return cross_validate(build_dataset(processed.patients, config), config);
}

RunConfig protocol_config() {
  RunConfig config;  // whole range, filtering, Robust Scaler, PCA-20, multiple acquisitions, 10 folds
  config.seed = 2026;
  return config;
}

Outcome end_to_end() {
  const auto cohort = protocol_cohort();
  auto config = protocol_config();
  const auto main = run_protocol(cohort.patients, config);
  write_report(main, kOut / "run1");

  auto single_config = config;
  single_config.acquisition = AcquisitionMode::SingleAveraged;
  const auto single = run_protocol(cohort.patients, single_config);
  write_report(single, kOut / "single");

  auto standard_config = config;
  standard_config.scaler = ScalerKind::Standard;
  const auto standard = run_protocol(cohort.patients, standard_config);
  write_report(standard, kOut / "standard");

  const auto& ens = main.model("Ens");
  const double ba = metric(ens, Metric::BalancedAccuracy);
  const double auc = metric(ens, Metric::RocAuc);
  const double svc_multi = metric(main.model("SVC"), Metric::BalancedAccuracy);
  const double svc_single = metric(single.model("SVC"), Metric::BalancedAccuracy);
  const double f1_robust = metric_std(main.model("SVC"), Metric::F1);
  const double f1_standard = metric_std(standard.model("SVC"), Metric::F1);
  const bool ok = ba >= 0.90 && auc >= 0.95 && svc_multi >= svc_single && f1_robust <= f1_standard;
  return {ok, "Ens accuracy " + fmt(ba) + " AUC " + fmt(auc) + "; SVC accuracy multiple " + fmt(svc_multi) +
                  " vs single " + fmt(svc_single) + "; SVC F1 std robust " + fmt(f1_robust) + " vs standard " +
                  fmt(f1_standard)};
}

Outcome null_model() {
  auto records = protocol_cohort().patients;
  std::vector<Label> labels;
  for (const auto& r : records) labels.push_back(r.label);
  Rng rng(909);
  rng.shuffle(labels.begin(), labels.end());
  for (std::size_t i = 0; i < records.size(); ++i) records[i].label = labels[i];
  const auto report = run_protocol(records, protocol_config());
  const auto& ens = report.model("Ens");
  const double ba = metric(ens, Metric::BalancedAccuracy);
  const double auc = metric(ens, Metric::RocAuc);
  return {std::abs(ba - 0.5) <= 0.10 && std::abs(auc - 0.5) <= 0.10,
          "Ens accuracy " + fmt(ba) + ", AUC " + fmt(auc)};
}

Outcome determinism() {
  if (!fs::exists(kOut / "run1" / "report.json")) return {false, "criterion 8 produced no reports"};
  const auto report = run_protocol(protocol_cohort().patients, protocol_config());
  write_report(report, kOut / "run2");
  int differing = 0;
  for (const char* f : {"report.csv", "report.json", "report.txt"})
    differing += text::read_file(kOut / "run1" / f) != text::read_file(kOut / "run2" / f);
  return {differing == 0, std::to_string(differing) + "/3 report files differ"};
}

}  // namespace

int main() {
  fs::remove_all(kOut);
  fs::create_directories(kOut);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"SG filter exactness", sg_exactness},
      {"plateau oracle", plateau_oracle},
      {"peak alignment", peak_alignment},
      {"augmentation counting", augmentation_counting},
      {"leakage audit", leakage_audit_check},
      {"metric oracles", metric_oracles},
      {"PCA correctness", pca_correctness},
      {"end-to-end synthetic protocol", end_to_end},
      {"null-model sanity", null_model},
      {"determinism", determinism},
  };
  const double limits[] = {1, 10, 5, 0, 0, 0, 0, 600, 0, 0};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limits[i] > 0 && seconds >= limits[i]) {
      o.pass = false;
      o.detail += "; runtime limit " + fmt(limits[i], 0) + " s exceeded";
    }
    failed += !o.pass;
    std::printf("%s criterion %zu %s (%.2f s): %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), seconds,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
