#include "breathms/core.hpp"

namespace breathms {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::NonMonotonicMz: return "NonMonotonicMz";
    case ErrorCode::NegativeIntensity: return "NegativeIntensity";
    case ErrorCode::UnknownRange: return "UnknownRange";
    case ErrorCode::MzOutOfRange: return "MzOutOfRange";
    case ErrorCode::IndexGap: return "IndexGap";
    case ErrorCode::DuplicatePatient: return "DuplicatePatient";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptySamples: return "EmptySamples";
    case ErrorCode::NoPlateau: return "NoPlateau";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::WindowTooLarge: return "WindowTooLarge";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::MissingRange: return "MissingRange";
    case ErrorCode::EmptyRange: return "EmptyRange";
    case ErrorCode::EmptyCohort: return "EmptyCohort";
    case ErrorCode::AllFeaturesConstant: return "AllFeaturesConstant";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::NonFiniteFeature: return "NonFiniteFeature";
    case ErrorCode::WidthMismatch: return "WidthMismatch";
    case ErrorCode::HeterogeneousMembers: return "HeterogeneousMembers";
    case ErrorCode::TooFewPatients: return "TooFewPatients";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

namespace {

std::string format_error(ErrorCode code, const std::string& message, std::optional<std::size_t> line) {
  std::string out(to_string(code));
  if (line) out += " (line " + std::to_string(*line) + ")";
  out += ": ";
  out += message;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message, std::optional<std::size_t> line)
    : std::runtime_error(format_error(code, message, line)), code_(code), line_(line) {}

std::string_view to_string(Label label) { return label == Label::Positive ? "positive" : "negative"; }

Label parse_label(std::string_view text) {
  if (text == "positive") return Label::Positive;
  if (text == "negative") return Label::Negative;
  throw Error(ErrorCode::MalformedRow, "unknown label '" + std::string(text) + "'");
}

const std::array<MassRange, kRangeCount>& mass_ranges() {
  static const std::array<MassRange, kRangeCount> ranges{{
      {RangeId::R1, 10, 51, 10.0, 1000.0},
      {RangeId::R2, 49, 151, 14.0, 1800.0},
      {RangeId::R3, 149, 251, 14.0, 1800.0},
      {RangeId::R4, 249, 351, 14.0, 1800.0},
  }};
  return ranges;
}

const MassRange& mass_range(RangeId id) { return mass_ranges()[range_slot(id)]; }

std::string_view MassRange::name() const {
  static constexpr std::array<std::string_view, kRangeCount> names{"R1", "R2", "R3", "R4"};
  return names[range_slot(id)];
}

std::optional<RangeId> parse_range(std::string_view text) {
  for (const auto& r : mass_ranges())
    if (r.name() == text) return r.id;
  return std::nullopt;
}

}  // namespace breathms
