#include "breathms/synth.hpp"

#include "breathms/pipeline.hpp"
#include "breathms/rng.hpp"
#include "breathms/text_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace breathms {

namespace {

struct BasePeak {
  int mz;
  double amplitude;
  int marker;  // +1 raised in positives, -1 lowered, 0 class-independent
};

const std::array<std::vector<BasePeak>, kRangeCount>& base_peaks() {
  static const std::array<std::vector<BasePeak>, kRangeCount> peaks{{
      {{14, 0.04, 0}, {15, 0.02, 0}, {16, 0.06, 0}, {17, 0.03, 0}, {18, 0.2, 0}, {20, 0.01, 0}, {28, 1.0, 0},
       {29, 0.03, 0}, {30, 0.015, 0}, {32, 0.3, 0}, {34, 0.012, 0}, {40, 0.05, 0}, {44, 0.15, 0}},
      {{53, 0.15, 0}, {55, 0.35, 0}, {56, 0.2, 0},  {57, 0.5, 1},   {58, 0.12, 0},  {60, 0.1, 0},   {63, 0.08, 0},
       {65, 0.12, 0}, {67, 0.3, -1}, {69, 0.4, 0},  {70, 0.15, 0},  {71, 0.35, 1},  {73, 0.25, 0},  {74, 0.1, 0},
       {77, 0.2, 0},  {79, 0.3, -1}, {81, 0.25, 0}, {83, 0.3, 0},   {85, 0.3, 1},   {87, 0.12, 0},  {91, 0.4, 0},
       {92, 0.1, 0},  {93, 0.3, -1}, {95, 0.2, 0},  {97, 0.18, 0},  {101, 0.08, 0}, {105, 0.25, 1}, {107, 0.15, 0},
       {109, 0.1, 0}, {115, 0.08, 0}, {117, 0.12, 0}, {119, 0.25, -1}, {121, 0.1, 0}, {128, 0.06, 0}, {131, 0.1, 0},
       {135, 0.08, 0}, {141, 0.05, 0}},
      {{155, 0.3, 0}, {163, 0.2, 0}, {170, 0.15, 0}, {177, 0.25, 0}, {185, 0.2, 0}, {191, 0.3, 0}, {199, 0.1, 0},
       {207, 0.35, 0}, {215, 0.12, 0}, {221, 0.2, 0}, {229, 0.1, 0}, {235, 0.15, 0}, {243, 0.1, 0}},
      {{253, 0.2, 0}, {261, 0.1, 0}, {267, 0.25, 0}, {281, 0.3, 0}, {289, 0.1, 0}, {295, 0.2, 0}, {309, 0.15, 0},
       {315, 0.1, 0}, {327, 0.25, 0}, {335, 0.1, 0}, {341, 0.15, 0}},
  }};
  return peaks;
}

// Range 1 carries the atmospheric gases with a reduced amplification.
constexpr double kRange1DominantScale = 0.25;
constexpr std::array<double, kRangeCount> kRangeScale{2e5, 1e5, 1e5, 1e5};
constexpr double kOutlierShare = 0.2;
constexpr double kDecayStep = 0.1;

double gaussian(double d) { return std::exp(-d * d / (2.0 * kSynthPeakWidth * kSynthPeakWidth)); }

/// First raw sample sits 0.4 below the range, on a 0.1 grid addressed by
/// integer numerators so every position prints exactly.
int grid_origin(const MassRange& r) { return kSynthSamplesPerUnit * r.lo - 4; }
int grid_size(const MassRange& r) { return kSynthSamplesPerUnit * (r.hi - r.lo) + 9; }

/// Quiet range-2 bins at least three m/z away from every template peak.
std::vector<int> quiet_bins(const PeakTemplate& tpl) {
  const auto& r = mass_range(RangeId::R2);
  std::vector<int> bins;
  for (int m = r.lo + 3; m <= r.hi - 3; ++m) {
    const bool near = std::any_of(tpl[1].begin(), tpl[1].end(), [&](const TemplatePeak& p) { return std::abs(p.mz - m) < 3; });
    if (!near) bins.push_back(m);
  }
  return bins;
}

/// Relative TIC per acquisition: linear ramp, plateau with alternating
/// deviations around a steady window, then a linear decay.
Vector plateau_envelope(const RangeTruth& t, double deviation) {
  const auto n = static_cast<Index>(t.acquisitions);
  const Index start = t.ramp;
  const Index end = t.plateau_last + 1;
  Vector env(n);
  for (Index j = 0; j < n; ++j) {
    if (j < start) {
      env[j] = 0.2 + 0.6 * static_cast<double>(j) / static_cast<double>(start);
    } else if (j <= end) {
      const bool steady = j >= t.window_first && j < t.window_first + kPlateauWindow;
      env[j] = 1.0 + (steady ? 0.0 : (j % 2 == 0 ? deviation : -deviation));
    } else {
      env[j] = 1.0 - kDecayStep * static_cast<double>(j - end);
    }
  }
  return env;
}

/// Always rising TIC whose increments come in pairs (small, small, large,
/// large), so no four consecutive gradients fall below the median.
Vector rising_envelope(int n) {
  Vector env(n);
  env[0] = 0.2;
  for (Index j = 1; j < n; ++j) env[j] = env[j - 1] + (((j - 1) / 2) % 2 == 0 ? 0.03 : 0.09);
  return env;
}

struct PatientPlan {
  Label label = Label::Negative;
  InjectedAnomaly anomaly = InjectedAnomaly::None;
  std::optional<int> outlier_mz;
};

std::string patient_name(int i, int n) {
  const int width = std::max(3, static_cast<int>(std::to_string(n).size()));
  std::string digits = std::to_string(i + 1);
  return "P" + std::string(static_cast<std::size_t>(width) - digits.size(), '0') + digits;
}

void generate_patient(const SynthSpec& spec, const PeakTemplate& tpl, int index, const PatientPlan& plan,
                      PatientRecord& record, PatientTruth& truth) {
  const std::uint64_t patient_seed = derive_seed(spec.seed, 0x5000 + static_cast<std::uint64_t>(index));
  Rng rng(patient_seed);
  record.patient_id = truth.patient_id = patient_name(index, spec.n_patients);
  record.label = truth.label = plan.label;
  truth.anomaly = plan.anomaly;
  truth.outlier_mz = plan.outlier_mz;
  const bool positive = plan.label == Label::Positive;
  const double jitter_steps = std::floor(spec.mz_jitter * kSynthSamplesPerUnit + 1e-9);

  for (const auto& range : mass_ranges()) {
    const auto slot = range_slot(range.id);
    RangeTruth& rt = truth.ranges[slot];

    const int n = spec.min_acquisitions + static_cast<int>(rng.below(
                                               static_cast<std::uint64_t>(spec.max_acquisitions - spec.min_acquisitions + 1)));
    const int flat = n / 2;
    const int ramp = spec.min_ramp + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.max_ramp - spec.min_ramp + 1)));
    rt.acquisitions = n;
    rt.ramp = std::min(ramp, n - flat - 3);
    rt.rising = plan.anomaly == InjectedAnomaly::NoPlateau && range.id == RangeId::R2;
    const auto window_offset = static_cast<Index>(rng.below(static_cast<std::uint64_t>(flat - kPlateauWindow + 1)));
    Vector envelope;
    if (rt.rising) {
      envelope = rising_envelope(n);
    } else {
      rt.plateau_first = rt.ramp + 1;
      rt.plateau_last = rt.ramp + flat;
      rt.window_first = rt.plateau_first + window_offset;
      envelope = plateau_envelope(rt, spec.plateau_jitter);
    }

    struct Peak {
      int mz;
      double amplitude;
    };
    std::vector<Peak> peaks;
    for (const auto& p : tpl[slot]) {
      const double base = positive ? p.positive : p.negative;
      peaks.push_back({p.mz, base * std::exp(spec.patient_sigma * rng.normal())});
    }
    if (plan.outlier_mz && range.id == RangeId::R2) {
      double total = 0.0;
      for (const auto& p : peaks) total += p.amplitude;
      peaks.push_back({*plan.outlier_mz, kOutlierShare * total});
    }
    for (const auto& p : peaks) rt.peak_mz.push_back(p.mz);

    double peak_total = 0.0;
    for (const auto& p : peaks) peak_total += p.amplitude;
    const double level = spec.baseline_level * peak_total / range.bins() * std::exp(0.1 * rng.normal());
    const double freq = rng.uniform(0.5, 1.5);
    const double phase = rng.uniform(0.0, 2.0 * M_PI);
    const double span = range.hi - range.lo;
    const auto baseline = [&](double x) {
      return level * (1.0 + spec.baseline_drift * std::sin(2.0 * M_PI * freq * (x - range.lo) / span + phase));
    };
    double ideal = 0.0;
    for (int m = range.lo; m <= range.hi; ++m) ideal += baseline(m);

    const int origin = grid_origin(range);
    const int samples = grid_size(range);
    for (int j = 0; j < n; ++j) {
      RawAcquisition acq;
      acq.patient_id = record.patient_id;
      acq.range = range.id;
      acq.index = j;
      acq.mz.resize(samples);
      for (int k = 0; k < samples; ++k) acq.mz[k] = static_cast<double>(origin + k) / kSynthSamplesPerUnit;

      const double cal_lo = rng.uniform(-0.75, 0.75) * spec.mz_jitter;
      const double cal_hi = rng.uniform(-0.75, 0.75) * spec.mz_jitter;
      std::vector<double> amplitude(peaks.size());
      std::vector<int> apex(peaks.size());
      double total = ideal;
      for (std::size_t p = 0; p < peaks.size(); ++p) {
        const double u = (peaks[p].mz - range.lo) / span;
        const double shift = cal_lo + (cal_hi - cal_lo) * u + rng.uniform(-0.25, 0.25) * spec.mz_jitter;
        const double steps = std::clamp(std::round(shift * kSynthSamplesPerUnit), -jitter_steps, jitter_steps);
        apex[p] = kSynthSamplesPerUnit * peaks[p].mz + static_cast<int>(steps) - origin;
        amplitude[p] = peaks[p].amplitude * std::exp(spec.acquisition_sigma * rng.normal());
        total += amplitude[p];
      }

      const double target = kRangeScale[slot] * envelope[j];
      const double scale = target / total;
      const double sigma = spec.noise * target / range.bins();
      Vector clean(samples);
      for (int k = 0; k < samples; ++k) clean[k] = baseline(acq.mz[k]);
      for (std::size_t p = 0; p < peaks.size(); ++p) {
        const int reach = kSynthSamplesPerUnit;
        for (int k = std::max(0, apex[p] - reach); k <= std::min(samples - 1, apex[p] + reach); ++k)
          clean[k] += amplitude[p] * gaussian(static_cast<double>(k - apex[p]) / kSynthSamplesPerUnit);
      }
      // Noise has its own stream so a noiseless twin shares every other draw.
      Rng noise_rng(derive_seed(patient_seed, 0x4E00 + 64 * slot + static_cast<std::uint64_t>(j)));
      acq.intensity.resize(samples);
      for (int k = 0; k < samples; ++k) {
        const double noisy = scale * clean[k] + (sigma > 0.0 ? sigma * noise_rng.normal() : 0.0);
        acq.intensity[k] = std::round(std::max(0.0, noisy) * 1000.0) / 1000.0;
      }

      std::vector<double> apex_mz(peaks.size());
      for (std::size_t p = 0; p < peaks.size(); ++p) apex_mz[p] = acq.mz[apex[p]];
      rt.apex_mz.push_back(std::move(apex_mz));
      record.acquisitions[slot].push_back(std::move(acq));
    }
  }
}

}  // namespace

PeakTemplate default_peak_template(double class_effect) {
  PeakTemplate tpl;
  for (std::size_t slot = 0; slot < kRangeCount; ++slot) {
    for (const auto& p : base_peaks()[slot]) {
      double amp = p.amplitude;
      if (slot == 0 && (p.mz == 28 || p.mz == 32 || p.mz == 44)) amp *= kRange1DominantScale;
      tpl[slot].push_back({p.mz, amp, amp * std::exp(class_effect * p.marker)});
    }
  }
  return tpl;
}

void SynthSpec::validate() const {
  const auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidSpec, msg); };
  if (n_patients < 1) fail("n_patients must be positive");
  if (!(positive_fraction > 0.0 && positive_fraction < 1.0)) fail("positive_fraction must lie in (0, 1)");
  if (min_acquisitions < 10 || max_acquisitions > 20 || min_acquisitions > max_acquisitions)
    fail("acquisitions per range must satisfy 10 <= min <= max <= 20");
  if (min_ramp < 1 || max_ramp > 3 || min_ramp > max_ramp) fail("ramp length must satisfy 1 <= min <= max <= 3");
  const auto non_negative = [&](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) fail(std::string(name) + " must be finite and >= 0");
  };
  non_negative(noise, "noise");
  non_negative(baseline_level, "baseline_level");
  non_negative(patient_sigma, "patient_sigma");
  non_negative(acquisition_sigma, "acquisition_sigma");
  non_negative(class_effect, "class_effect");
  if (!(baseline_drift >= 0.0 && baseline_drift < 1.0)) fail("baseline_drift must lie in [0, 1)");
  if (!(plateau_jitter >= 0.0 && plateau_jitter <= 0.05)) fail("plateau_jitter must lie in [0, 0.05]");
  if (!(mz_jitter >= 0.0 && mz_jitter <= 0.4)) fail("mz_jitter must lie in [0, 0.4]");
  if (!(outlier_rate >= 0.0 && no_plateau_rate >= 0.0 && outlier_rate + no_plateau_rate <= 1.0))
    fail("outlier_rate and no_plateau_rate must be >= 0 with sum <= 1");
  if (peaks) {
    for (const auto& range : mass_ranges()) {
      int previous = range.lo - 1;
      for (const auto& p : (*peaks)[range_slot(range.id)]) {
        if (p.mz < range.lo || p.mz > range.hi) fail("template peak " + std::to_string(p.mz) + " outside its range");
        if (p.mz <= previous) fail("template peaks must be strictly increasing within a range");
        if (!(p.negative > 0.0) || !(p.positive > 0.0)) fail("template amplitudes must be positive");
        previous = p.mz;
      }
    }
  }
  if (std::llround(outlier_rate * n_patients) > 0 && quiet_bins(peak_template()).empty())
    fail("no quiet range-2 bin available for outlier injection");
}

PeakTemplate SynthSpec::peak_template() const { return peaks ? *peaks : default_peak_template(class_effect); }

std::string_view to_string(InjectedAnomaly a) {
  switch (a) {
    case InjectedAnomaly::None: return "none";
    case InjectedAnomaly::Outlier: return "outlier";
    case InjectedAnomaly::NoPlateau: return "no_plateau";
  }
  return "none";
}

PatientStatus PatientTruth::expected_status() const {
  switch (anomaly) {
    case InjectedAnomaly::Outlier: return PatientStatus::Outlier;
    case InjectedAnomaly::NoPlateau: return PatientStatus::NoPlateau;
    case InjectedAnomaly::None: break;
  }
  return PatientStatus::Ok;
}

std::size_t SynthCohort::positives() const {
  return static_cast<std::size_t>(
      std::count_if(patients.begin(), patients.end(), [](const PatientRecord& p) { return p.label == Label::Positive; }));
}

SynthCohort generate_cohort(const SynthSpec& spec) {
  spec.validate();
  const PeakTemplate tpl = spec.peak_template();
  const auto n = static_cast<std::size_t>(spec.n_patients);

  std::vector<PatientPlan> plans(n);
  const auto n_pos = static_cast<std::size_t>(std::llround(spec.positive_fraction * spec.n_patients));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng label_rng(derive_seed(spec.seed, 0xA11));
  label_rng.shuffle(order.begin(), order.end());
  for (std::size_t i = 0; i < n_pos && i < n; ++i) plans[order[i]].label = Label::Positive;

  const auto n_out = static_cast<std::size_t>(std::llround(spec.outlier_rate * spec.n_patients));
  const auto n_rise = static_cast<std::size_t>(std::llround(spec.no_plateau_rate * spec.n_patients));
  std::iota(order.begin(), order.end(), 0);
  Rng anomaly_rng(derive_seed(spec.seed, 0xA12));
  anomaly_rng.shuffle(order.begin(), order.end());
  const auto quiet = quiet_bins(tpl);
  for (std::size_t i = 0; i < std::min(n, n_out + n_rise); ++i) {
    auto& plan = plans[order[i]];
    if (i < n_out) {
      plan.anomaly = InjectedAnomaly::Outlier;
      plan.outlier_mz = quiet[i % quiet.size()];
    } else {
      plan.anomaly = InjectedAnomaly::NoPlateau;
    }
  }

  SynthCohort cohort;
  cohort.spec = spec;
  cohort.patients.resize(n);
  cohort.truth.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    generate_patient(spec, tpl, static_cast<int>(i), plans[i], cohort.patients[i], cohort.truth[i]);
  return cohort;
}

std::string truth_json(const SynthCohort& cohort) {
  using json = nlohmann::ordered_json;
  const auto& s = cohort.spec;
  json doc;
  doc["format_version"] = 1;
  doc["spec"] = {{"seed", s.seed},
                 {"n_patients", s.n_patients},
                 {"positive_fraction", s.positive_fraction},
                 {"min_acquisitions", s.min_acquisitions},
                 {"max_acquisitions", s.max_acquisitions},
                 {"min_ramp", s.min_ramp},
                 {"max_ramp", s.max_ramp},
                 {"noise", s.noise},
                 {"baseline_drift", s.baseline_drift},
                 {"baseline_level", s.baseline_level},
                 {"plateau_jitter", s.plateau_jitter},
                 {"mz_jitter", s.mz_jitter},
                 {"patient_sigma", s.patient_sigma},
                 {"acquisition_sigma", s.acquisition_sigma},
                 {"outlier_rate", s.outlier_rate},
                 {"no_plateau_rate", s.no_plateau_rate},
                 {"class_effect", s.class_effect}};
  json tpl = json::object();
  const auto peaks = s.peak_template();
  for (const auto& range : mass_ranges()) {
    json list = json::array();
    for (const auto& p : peaks[range_slot(range.id)])
      list.push_back({{"mz", p.mz}, {"negative", p.negative}, {"positive", p.positive}});
    tpl[std::string(range.name())] = std::move(list);
  }
  doc["peak_template"] = std::move(tpl);
  json patients = json::array();
  for (const auto& t : cohort.truth) {
    json p;
    p["id"] = t.patient_id;
    p["label"] = std::string(to_string(t.label));
    p["anomaly"] = std::string(to_string(t.anomaly));
    p["expected_status"] = std::string(to_string(t.expected_status()));
    p["outlier_mz"] = t.outlier_mz ? json(*t.outlier_mz) : json(nullptr);
    json ranges = json::object();
    for (const auto& range : mass_ranges()) {
      const auto& rt = t.ranges[range_slot(range.id)];
      json r = {{"acquisitions", rt.acquisitions}, {"ramp", rt.ramp}, {"rising", rt.rising}};
      if (!rt.rising) {
        r["plateau_first"] = rt.plateau_first;
        r["plateau_last"] = rt.plateau_last;
        r["window_first"] = rt.window_first;
      }
      r["peaks"] = rt.peak_mz;
      ranges[std::string(range.name())] = std::move(r);
    }
    p["ranges"] = std::move(ranges);
    patients.push_back(std::move(p));
  }
  doc["patients"] = std::move(patients);
  return doc.dump(2) + "\n";
}

CohortManifest write_cohort(const SynthCohort& cohort, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "acquisitions");
  CohortManifest manifest;
  manifest.base_dir = dir;
  for (const auto& record : cohort.patients) {
    std::vector<RawAcquisition> all;
    for (const auto& list : record.acquisitions) all.insert(all.end(), list.begin(), list.end());
    const std::string file = "acquisitions/" + record.patient_id + ".csv";
    text::write_file(dir / file, serialize_acquisitions(all));
    manifest.patients.push_back({record.patient_id, record.label, {file}});
  }
  write_manifest(manifest, dir / "manifest.json");
  text::write_file(dir / "truth.json", truth_json(cohort));
  return manifest;
}

std::vector<std::string> ground_truth_check(const SynthCohort& cohort, const ProcessedCohort& processed,
                                            const RunConfig& config) {
  std::vector<std::string> issues;
  const auto ranges = config.experiment_ranges();
  const bool uses_r2 = std::find(ranges.begin(), ranges.end(), RangeId::R2) != ranges.end();

  for (std::size_t i = 0; i < cohort.truth.size(); ++i) {
    const auto& truth = cohort.truth[i];
    const auto& record = cohort.patients[i];
    const auto outcome = std::find_if(processed.outcomes.begin(), processed.outcomes.end(),
                                      [&](const PatientOutcome& o) { return o.patient_id == truth.patient_id; });
    if (outcome == processed.outcomes.end()) {
      issues.push_back(truth.patient_id + ": missing from the processed cohort");
      continue;
    }
    const PatientStatus expected = uses_r2 ? truth.expected_status() : PatientStatus::Ok;
    if (outcome->status != expected) {
      issues.push_back(truth.patient_id + ": status " + std::string(to_string(outcome->status)) + ", expected " +
                       std::string(to_string(expected)));
      continue;
    }
    if (expected != PatientStatus::Ok) continue;

    const auto patient = std::find_if(processed.patients.begin(), processed.patients.end(),
                                      [&](const ProcessedPatient& p) { return p.patient_id == truth.patient_id; });
    if (patient == processed.patients.end()) continue;
    for (const auto& result : patient->ranges) {
      const auto slot = range_slot(result.range);
      const auto& rt = truth.ranges[slot];
      const std::string where = truth.patient_id + " " + std::string(mass_range(result.range).name());
      const auto& sel = result.selection;
      if (sel.plateau_first != rt.plateau_first || sel.plateau_last != rt.plateau_last)
        issues.push_back(where + ": plateau [" + std::to_string(sel.plateau_first) + ", " +
                         std::to_string(sel.plateau_last) + "], expected [" + std::to_string(rt.plateau_first) + ", " +
                         std::to_string(rt.plateau_last) + "]");
      if (sel.window_first != rt.window_first)
        issues.push_back(where + ": window starts at " + std::to_string(sel.window_first) + ", expected " +
                         std::to_string(rt.window_first));

      const auto& raws = record.acquisitions[slot];
      for (std::size_t j = 0; j < raws.size() && j < result.aligned.size(); ++j) {
        const auto& raw = raws[j];
        int misplaced = 0;
        for (std::size_t p = 0; p < rt.peak_mz.size(); ++p) {
          const auto k = static_cast<Index>(std::lround((rt.apex_mz[j][p] - raw.mz[0]) * kSynthSamplesPerUnit));
          const double apex = raw.intensity[k];
          if (std::abs(result.aligned[j].at(rt.peak_mz[p]) - apex) > 1e-9 * std::max(1.0, std::abs(apex))) ++misplaced;
        }
        if (misplaced > 0)
          issues.push_back(where + " acquisition " + std::to_string(j) + ": " + std::to_string(misplaced) +
                           " peak(s) off their integer bin");
      }
    }
  }
  return issues;
}

}  // namespace breathms
