#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace breathms {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

enum class ErrorCode {
  MalformedRow,
  NonMonotonicMz,
  NegativeIntensity,
  UnknownRange,
  MzOutOfRange,
  IndexGap,
  DuplicatePatient,
  MissingFile,
  IoFailure,
  VersionMismatch,
  EmptyInput,
  EmptySamples,
  NoPlateau,
  IndexOutOfRange,
  WindowTooLarge,
  InvalidParams,
  MissingRange,
  EmptyRange,
  EmptyCohort,
  AllFeaturesConstant,
  SingleClass,
  NonFiniteFeature,
  WidthMismatch,
  HeterogeneousMembers,
  TooFewPatients,
  InvalidSpec,
  InvalidConfig,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. `line` is set for file-format errors.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::optional<std::size_t> line = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> line_;
};

enum class Label : int { Negative = 0, Positive = 1 };

std::string_view to_string(Label label);
Label parse_label(std::string_view text);

inline int to_int(Label label) { return static_cast<int>(label); }

enum class RangeId : int { R1 = 0, R2 = 1, R3 = 2, R4 = 3 };

inline constexpr int kRangeCount = 4;

/// Instrument sweep configuration for one of the four mass ranges.
struct MassRange {
  RangeId id;
  int lo;
  int hi;
  double acquisition_time_s;
  double em_voltage;

  int bins() const { return hi - lo + 1; }
  std::string_view name() const;
};

const std::array<MassRange, kRangeCount>& mass_ranges();
const MassRange& mass_range(RangeId id);
std::optional<RangeId> parse_range(std::string_view text);
inline std::size_t range_slot(RangeId id) { return static_cast<std::size_t>(id); }

/// Merged whole-spectrum grid.
inline constexpr int kMergedLo = 10;
inline constexpr int kMergedHi = 351;

}  // namespace breathms
