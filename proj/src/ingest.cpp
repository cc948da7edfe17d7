#include "breathms/ingest.hpp"

#include "breathms/text_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

namespace breathms {

namespace {

constexpr std::string_view kAcquisitionHeader = "patient_id,range,acq_index,mz,intensity";
constexpr std::string_view kDatasetMagic = "breathms-dataset";

struct AcquisitionBuilder {
  std::string patient_id;
  RangeId range;
  int index;
  std::vector<double> mz;
  std::vector<double> intensity;
};

RawAcquisition finish(AcquisitionBuilder&& b) {
  RawAcquisition acq;
  acq.patient_id = std::move(b.patient_id);
  acq.range = b.range;
  acq.index = b.index;
  acq.mz = Eigen::Map<const Vector>(b.mz.data(), static_cast<Index>(b.mz.size()));
  acq.intensity = Eigen::Map<const Vector>(b.intensity.data(), static_cast<Index>(b.intensity.size()));
  return acq;
}

auto acquisition_key(const RawAcquisition& a) { return std::tie(a.patient_id, a.range, a.index); }

void check_index_sequences(const std::vector<RawAcquisition>& sorted) {
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    int expected = 0;
    while (j < sorted.size() && sorted[j].patient_id == sorted[i].patient_id && sorted[j].range == sorted[i].range) {
      if (sorted[j].index != expected) {
        throw Error(ErrorCode::IndexGap, "patient " + sorted[i].patient_id + " range " +
                                             std::string(mass_range(sorted[i].range).name()) + ": expected acquisition " +
                                             std::to_string(expected) + ", found " + std::to_string(sorted[j].index));
      }
      ++expected;
      ++j;
    }
    i = j;
  }
}

}  // namespace

bool operator==(const RawAcquisition& a, const RawAcquisition& b) {
  return a.patient_id == b.patient_id && a.range == b.range && a.index == b.index && a.mz.size() == b.mz.size() &&
         a.intensity.size() == b.intensity.size() && a.mz == b.mz && a.intensity == b.intensity;
}

std::string_view to_string(PatientStatus status) {
  switch (status) {
    case PatientStatus::Ok: return "ok";
    case PatientStatus::NoPlateau: return "no_plateau";
    case PatientStatus::Outlier: return "outlier";
    case PatientStatus::Incomplete: return "incomplete";
  }
  return "unknown";
}

std::vector<RawAcquisition> parse_acquisitions(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw Error(ErrorCode::MalformedRow, "missing header", 1);
  ++line_no;
  if (text::trim(line) != kAcquisitionHeader)
    throw Error(ErrorCode::MalformedRow, "expected header '" + std::string(kAcquisitionHeader) + "'", line_no);

  std::vector<RawAcquisition> done;
  std::set<std::tuple<std::string, RangeId, int>> seen;
  std::optional<AcquisitionBuilder> current;

  while (std::getline(in, line)) {
    ++line_no;
    const auto row = text::trim(line);
    if (row.empty()) continue;
    const auto fields = text::split(row, ',');
    if (fields.size() != 5) throw Error(ErrorCode::MalformedRow, "expected 5 fields", line_no);

    const auto patient = text::trim(fields[0]);
    if (patient.empty()) throw Error(ErrorCode::MalformedRow, "empty patient_id", line_no);
    const auto range = parse_range(text::trim(fields[1]));
    if (!range) throw Error(ErrorCode::UnknownRange, "unknown range '" + std::string(fields[1]) + "'", line_no);
    const auto index = text::parse_int(fields[2]);
    if (!index || *index < 0 || *index > 1'000'000)
      throw Error(ErrorCode::MalformedRow, "bad acq_index '" + std::string(fields[2]) + "'", line_no);
    const auto mz = text::parse_double(fields[3]);
    if (!mz) throw Error(ErrorCode::MalformedRow, "bad mz '" + std::string(fields[3]) + "'", line_no);
    const auto intensity = text::parse_double(fields[4]);
    if (!intensity) throw Error(ErrorCode::MalformedRow, "bad intensity '" + std::string(fields[4]) + "'", line_no);
    if (*intensity < 0.0) throw Error(ErrorCode::NegativeIntensity, "intensity " + std::string(fields[4]), line_no);

    const auto& mr = mass_range(*range);
    if (*mz < mr.lo - 0.5 || *mz > mr.hi + 0.5)
      throw Error(ErrorCode::MzOutOfRange, "mz " + std::string(fields[3]) + " outside " + std::string(mr.name()), line_no);

    const int idx = static_cast<int>(*index);
    const bool same = current && current->patient_id == patient && current->range == *range && current->index == idx;
    if (!same) {
      if (current) done.push_back(finish(std::move(*current)));
      auto key = std::make_tuple(std::string(patient), *range, idx);
      if (!seen.insert(key).second)
        throw Error(ErrorCode::MalformedRow, "acquisition rows are not contiguous", line_no);
      current = AcquisitionBuilder{std::string(patient), *range, idx, {}, {}};
    } else if (*mz <= current->mz.back()) {
      throw Error(ErrorCode::NonMonotonicMz, "mz " + std::string(fields[3]) + " after " + text::format_double(current->mz.back()),
                  line_no);
    }
    current->mz.push_back(*mz);
    current->intensity.push_back(*intensity);
  }
  if (current) done.push_back(finish(std::move(*current)));

  std::sort(done.begin(), done.end(),
            [](const RawAcquisition& a, const RawAcquisition& b) { return acquisition_key(a) < acquisition_key(b); });
  check_index_sequences(done);
  return done;
}

std::vector<RawAcquisition> parse_acquisition_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string());
  return parse_acquisitions(in);
}

void write_acquisitions(std::ostream& out, std::span<const RawAcquisition> acqs) {
  out << kAcquisitionHeader << '\n';
  for (const auto& a : acqs) {
    const auto range = mass_range(a.range).name();
    for (Index i = 0; i < a.size(); ++i) {
      out << a.patient_id << ',' << range << ',' << a.index << ',' << text::format_double(a.mz[i]) << ','
          << text::format_double(a.intensity[i]) << '\n';
    }
  }
}

std::string serialize_acquisitions(std::span<const RawAcquisition> acqs) {
  std::ostringstream out;
  write_acquisitions(out, acqs);
  return out.str();
}

CohortManifest read_manifest(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::MissingFile, "manifest " + path.string() + " not found");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRow, "manifest is not valid JSON: " + std::string(e.what()));
  }
  CohortManifest manifest;
  manifest.base_dir = path.parent_path();
  try {
    manifest.format_version = doc.at("format_version").get<int>();
    if (manifest.format_version != CohortManifest::kFormatVersion)
      throw Error(ErrorCode::VersionMismatch, "manifest format_version " + std::to_string(manifest.format_version));
    for (const auto& p : doc.at("patients")) {
      ManifestEntry entry;
      entry.patient_id = p.at("id").get<std::string>();
      entry.label = parse_label(p.at("label").get<std::string>());
      entry.files = p.at("files").get<std::vector<std::string>>();
      manifest.patients.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRow, "manifest schema: " + std::string(e.what()));
  }
  return manifest;
}

void write_manifest(const CohortManifest& manifest, const std::filesystem::path& path) {
  nlohmann::json doc;
  doc["format_version"] = manifest.format_version;
  doc["patients"] = nlohmann::json::array();
  for (const auto& p : manifest.patients) {
    doc["patients"].push_back({{"id", p.patient_id}, {"label", std::string(to_string(p.label))}, {"files", p.files}});
  }
  text::write_file(path, doc.dump(2) + "\n");
}

std::vector<PatientRecord> group_by_patient(std::vector<RawAcquisition> acqs) {
  std::sort(acqs.begin(), acqs.end(),
            [](const RawAcquisition& a, const RawAcquisition& b) { return acquisition_key(a) < acquisition_key(b); });
  std::vector<PatientRecord> records;
  for (auto& a : acqs) {
    if (records.empty() || records.back().patient_id != a.patient_id) {
      records.emplace_back();
      records.back().patient_id = a.patient_id;
    }
    records.back().acquisitions[range_slot(a.range)].push_back(std::move(a));
  }
  return records;
}

std::string Cohort::summary() const {
  return std::to_string(positives) + " positive, " + std::to_string(negatives) + " negative";
}

Cohort load_cohort(const CohortManifest& manifest) {
  if (manifest.format_version != CohortManifest::kFormatVersion)
    throw Error(ErrorCode::VersionMismatch, "manifest format_version " + std::to_string(manifest.format_version));

  std::set<std::string> ids;
  for (const auto& p : manifest.patients)
    if (!ids.insert(p.patient_id).second) throw Error(ErrorCode::DuplicatePatient, p.patient_id);

  std::map<std::filesystem::path, std::vector<RawAcquisition>> parsed;
  Cohort cohort;
  for (const auto& entry : manifest.patients) {
    PatientRecord record;
    record.patient_id = entry.patient_id;
    record.label = entry.label;
    for (const auto& file : entry.files) {
      const auto path = manifest.base_dir / file;
      auto it = parsed.find(path);
      if (it == parsed.end()) {
        if (!std::filesystem::exists(path))
          throw Error(ErrorCode::MissingFile, path.string() + " (patient " + entry.patient_id + ")");
        it = parsed.emplace(path, parse_acquisition_file(path)).first;
      }
      for (const auto& acq : it->second) {
        if (acq.patient_id != entry.patient_id) continue;
        auto& list = record.acquisitions[range_slot(acq.range)];
        if (std::any_of(list.begin(), list.end(), [&](const RawAcquisition& x) { return x.index == acq.index; }))
          throw Error(ErrorCode::MalformedRow, "acquisition " + std::to_string(acq.index) + " of " + entry.patient_id +
                                                   " appears in more than one file");
        list.push_back(acq);
      }
    }
    for (auto& list : record.acquisitions)
      std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
    (record.label == Label::Positive ? cohort.positives : cohort.negatives)++;
    cohort.patients.push_back(std::move(record));
  }
  return cohort;
}

std::string serialize_dataset(const FeatureMatrix& m) {
  m.validate();
  std::string out;
  out.reserve(static_cast<std::size_t>(m.rows() * (m.cols() + 3) * 4 + 64));
  out += kDatasetMagic;
  out += ',';
  out += std::to_string(kDatasetFormatVersion);
  out += "\norigin,label,combo";
  for (int f : m.feature_index) {
    out += ',';
    out += std::to_string(f);
  }
  out += '\n';
  for (Index r = 0; r < m.rows(); ++r) {
    const auto i = static_cast<std::size_t>(r);
    out += m.origins[i];
    out += ',';
    out += to_string(m.labels[i]);
    out += ',';
    out += encode_combo(m.combos[i]);
    for (Index c = 0; c < m.cols(); ++c) {
      out += ',';
      out += text::format_double(m.values(r, c));
    }
    out += '\n';
  }
  return out;
}

FeatureMatrix parse_dataset(std::string_view contents) {
  std::vector<std::string_view> lines;
  for (auto line : text::split(contents, '\n')) {
    line = text::trim(line);
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty()) throw Error(ErrorCode::MalformedRow, "empty dataset", 1);
  const auto magic = text::split(lines[0], ',');
  if (magic.size() != 2 || magic[0] != kDatasetMagic) throw Error(ErrorCode::MalformedRow, "not a breathms dataset", 1);
  const auto version = text::parse_int(magic[1]);
  if (!version || *version != kDatasetFormatVersion)
    throw Error(ErrorCode::VersionMismatch, "dataset format_version " + std::string(magic[1]));
  if (lines.size() < 2) throw Error(ErrorCode::MalformedRow, "missing column header", 2);

  FeatureMatrix m;
  const auto header = text::split(lines[1], ',');
  if (header.size() < 3 || header[0] != "origin" || header[1] != "label" || header[2] != "combo")
    throw Error(ErrorCode::MalformedRow, "bad column header", 2);
  for (std::size_t i = 3; i < header.size(); ++i) {
    const auto f = text::parse_int(header[i]);
    if (!f) throw Error(ErrorCode::MalformedRow, "bad feature id '" + std::string(header[i]) + "'", 2);
    m.feature_index.push_back(static_cast<int>(*f));
  }
  const auto cols = static_cast<Index>(m.feature_index.size());
  const auto rows = static_cast<Index>(lines.size() - 2);
  m.values.resize(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const auto line_no = static_cast<std::size_t>(r) + 3;
    const auto fields = text::split(lines[static_cast<std::size_t>(r) + 2], ',');
    if (static_cast<Index>(fields.size()) != cols + 3) throw Error(ErrorCode::MalformedRow, "wrong field count", line_no);
    m.origins.emplace_back(fields[0]);
    try {
      m.labels.push_back(parse_label(fields[1]));
      m.combos.push_back(decode_combo(fields[2]));
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedRow, e.what(), line_no);
    }
    for (Index c = 0; c < cols; ++c) {
      const auto v = text::parse_double(fields[static_cast<std::size_t>(c) + 3]);
      if (!v) throw Error(ErrorCode::MalformedRow, "bad value", line_no);
      m.values(r, c) = *v;
    }
  }
  return m;
}

void save_dataset(const FeatureMatrix& matrix, const std::filesystem::path& path) {
  text::write_file(path, serialize_dataset(matrix));
}

FeatureMatrix load_dataset(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::IoFailure, path.string() + " not found");
  return parse_dataset(text::read_file(path));
}

}  // namespace breathms
