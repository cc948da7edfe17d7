#include "breathms/augment.hpp"

#include "breathms/text_io.hpp"

namespace breathms {

Eigen::VectorXi FeatureMatrix::label_vector() const {
  Eigen::VectorXi y(static_cast<Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) y[static_cast<Index>(i)] = to_int(labels[i]);
  return y;
}

void FeatureMatrix::validate() const {
  const auto n = static_cast<std::size_t>(values.rows());
  if (labels.size() != n || origins.size() != n || combos.size() != n)
    throw Error(ErrorCode::InvalidParams, "feature matrix metadata does not match row count");
  if (feature_index.size() != static_cast<std::size_t>(values.cols()))
    throw Error(ErrorCode::InvalidParams, "feature index does not match column count");
}

bool operator==(const FeatureMatrix& a, const FeatureMatrix& b) {
  return a.values.rows() == b.values.rows() && a.values.cols() == b.values.cols() && a.values == b.values &&
         a.labels == b.labels && a.origins == b.origins && a.combos == b.combos && a.feature_index == b.feature_index;
}

FeatureMatrix select_rows(const FeatureMatrix& m, std::span<const Index> rows) {
  FeatureMatrix out;
  out.feature_index = m.feature_index;
  out.values.resize(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i];
    out.values.row(static_cast<Index>(i)) = m.values.row(r);
    out.labels.push_back(m.labels[static_cast<std::size_t>(r)]);
    out.origins.push_back(m.origins[static_cast<std::size_t>(r)]);
    out.combos.push_back(m.combos[static_cast<std::size_t>(r)]);
  }
  return out;
}

std::string encode_combo(const Combo& combo) {
  std::string out;
  const bool letters = std::all_of(combo.begin(), combo.end(), [](int c) { return c >= 0 && c < 26; });
  for (std::size_t i = 0; i < combo.size(); ++i) {
    if (letters) {
      out += static_cast<char>('A' + combo[i]);
    } else {
      if (i) out += '.';
      out += std::to_string(combo[i]);
    }
  }
  return out;
}

Combo decode_combo(std::string_view text) {
  Combo combo;
  if (text.empty()) return combo;
  if (text.find_first_of("0123456789") != std::string_view::npos) {
    for (auto part : text::split(text, '.')) {
      const auto v = text::parse_int(part);
      if (!v || *v < 0) throw Error(ErrorCode::MalformedRow, "bad combo '" + std::string(text) + "'");
      combo.push_back(static_cast<int>(*v));
    }
    return combo;
  }
  for (char c : text) {
    if (c < 'A' || c > 'Z') throw Error(ErrorCode::MalformedRow, "bad combo '" + std::string(text) + "'");
    combo.push_back(c - 'A');
  }
  return combo;
}

std::string PseudoPatient::id() const { return origin + "-" + encode_combo(combo); }

std::string_view to_string(AcquisitionMode mode) {
  return mode == AcquisitionMode::SingleAveraged ? "single" : "multiple";
}

AcquisitionMode parse_acquisition_mode(std::string_view text) {
  if (text == "single") return AcquisitionMode::SingleAveraged;
  if (text == "multiple") return AcquisitionMode::MultipleAugmented;
  throw Error(ErrorCode::InvalidConfig, "acquisition must be single or multiple, got '" + std::string(text) + "'");
}

AlignedSpectrum combine_ranges(std::span<const AlignedSpectrum> parts) {
  if (parts.size() == 1) return parts.front();
  return merge_ranges(parts);
}

void for_each_combo(std::span<const std::size_t> counts, std::size_t cap, const std::function<void(const Combo&)>& visit) {
  if (counts.empty()) return;
  for (auto c : counts)
    if (c == 0) throw Error(ErrorCode::EmptyRange, "a range has no retained acquisitions");
  Combo combo(counts.size(), 0);
  std::size_t emitted = 0;
  while (emitted < cap) {
    visit(combo);
    ++emitted;
    // Odometer increment, last range fastest.
    std::size_t pos = counts.size();
    while (pos > 0) {
      --pos;
      if (static_cast<std::size_t>(++combo[pos]) < counts[pos]) break;
      combo[pos] = 0;
      if (pos == 0) return;
    }
  }
}

std::size_t combo_count(std::span<const std::size_t> counts, std::size_t cap) {
  if (counts.empty()) return 0;
  std::size_t total = 1;
  for (auto c : counts) {
    if (c == 0) return 0;
    if (total > cap / c) return cap;
    total *= c;
  }
  return std::min(total, cap);
}

std::vector<PseudoPatient> augment_patient(const std::string& origin, Label label,
                                           std::span<const std::vector<AlignedSpectrum>> retained, std::size_t cap) {
  std::vector<std::size_t> counts;
  for (const auto& r : retained) counts.push_back(r.size());
  std::vector<PseudoPatient> out;
  out.reserve(combo_count(counts, cap));
  std::vector<AlignedSpectrum> parts(retained.size());
  for_each_combo(counts, cap, [&](const Combo& combo) {
    for (std::size_t i = 0; i < combo.size(); ++i) parts[i] = retained[i][static_cast<std::size_t>(combo[i])];
    out.push_back({origin, combo, combine_ranges(parts), label});
  });
  return out;
}

namespace {

std::vector<std::vector<AlignedSpectrum>> retained_of(const ProcessedPatient& p) {
  std::vector<std::vector<AlignedSpectrum>> retained;
  for (const auto& r : p.ranges) retained.push_back(r.processed_chosen);
  return retained;
}

}  // namespace

std::vector<PseudoPatient> augment_patient(const ProcessedPatient& p, std::size_t cap) {
  return augment_patient(p.patient_id, p.label, retained_of(p), cap);
}

AlignedSpectrum test_time_aggregate(const ProcessedPatient& p) {
  if (p.ranges.empty()) throw Error(ErrorCode::MissingRange, "patient " + p.patient_id + " has no processed ranges");
  std::vector<AlignedSpectrum> parts;
  for (const auto& r : p.ranges) parts.push_back(r.processed);
  return combine_ranges(parts);
}

FeatureMatrix build_training_matrix(std::span<const ProcessedPatient> cohort, AcquisitionMode mode, std::size_t cap) {
  if (cohort.empty()) throw Error(ErrorCode::EmptyCohort, "no patients to build a dataset from");

  const AlignedSpectrum first = test_time_aggregate(cohort.front());
  FeatureMatrix m;
  for (int mz = first.lo; mz <= first.hi; ++mz) m.feature_index.push_back(mz);

  std::size_t rows = 0;
  std::vector<std::vector<std::size_t>> counts(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    if (mode == AcquisitionMode::SingleAveraged) {
      ++rows;
      continue;
    }
    for (const auto& r : cohort[i].ranges) counts[i].push_back(r.processed_chosen.size());
    rows += combo_count(counts[i], cap);
  }
  m.values.resize(static_cast<Index>(rows), first.size());
  m.labels.reserve(rows);
  m.origins.reserve(rows);
  m.combos.reserve(rows);

  Index row = 0;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto& p = cohort[i];
    if (mode == AcquisitionMode::SingleAveraged) {
      const auto s = test_time_aggregate(p);
      if (s.size() != m.cols()) throw Error(ErrorCode::WidthMismatch, "patients processed on different grids");
      m.values.row(row++) = s.intensities.transpose();
      m.labels.push_back(p.label);
      m.origins.push_back(p.patient_id);
      m.combos.emplace_back();
      continue;
    }
    std::vector<AlignedSpectrum> parts(p.ranges.size());
    for_each_combo(counts[i], cap, [&](const Combo& combo) {
      for (std::size_t k = 0; k < combo.size(); ++k) parts[k] = p.ranges[k].processed_chosen[static_cast<std::size_t>(combo[k])];
      const auto s = combine_ranges(parts);
      if (s.size() != m.cols()) throw Error(ErrorCode::WidthMismatch, "patients processed on different grids");
      m.values.row(row++) = s.intensities.transpose();
      m.labels.push_back(p.label);
      m.origins.push_back(p.patient_id);
      m.combos.push_back(combo);
    });
  }
  return m;
}

}  // namespace breathms
