#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace trialdesign {

/// Every failure the toolkit can report. The CLI maps each kind to exactly
/// one exit status (see `exit_status`).
enum class ErrorKind {
  kAllZeroWeights,
  kNegativeWeight,
  kValueOutOfSupport,
  kInvalidArgument,
  kEmptyCell,
  kZeroKernelMass,
  kPositivityViolation,
  kDegenerateVariability,
  kInsufficientCell,
  kInfeasibleDraw,
  kDegenerateFit,
  kSchemaError,
  kParseError,
  kIoError,
  kUsageError,
};

inline constexpr std::array<ErrorKind, 15> kAllErrorKinds = {
    ErrorKind::kAllZeroWeights,      ErrorKind::kNegativeWeight,
    ErrorKind::kValueOutOfSupport,   ErrorKind::kInvalidArgument,
    ErrorKind::kEmptyCell,           ErrorKind::kZeroKernelMass,
    ErrorKind::kPositivityViolation, ErrorKind::kDegenerateVariability,
    ErrorKind::kInsufficientCell,    ErrorKind::kInfeasibleDraw,
    ErrorKind::kDegenerateFit,       ErrorKind::kSchemaError,
    ErrorKind::kParseError,          ErrorKind::kIoError,
    ErrorKind::kUsageError,
};

std::string_view to_string(ErrorKind kind);

/// Exit status for the CLI: 1 for usage errors, 2 for data, positivity and
/// numerical failures.
int exit_status(ErrorKind kind);

class DesignError : public std::runtime_error {
 public:
  DesignError(ErrorKind kind, std::string message,
              std::optional<std::string> level = std::nullopt,
              std::optional<std::string> detail = std::nullopt);

  ErrorKind kind() const noexcept { return kind_; }
  /// Level identifier the failure refers to, when there is one.
  const std::optional<std::string>& level() const noexcept { return level_; }
  /// Secondary tag: the arm for InsufficientCell, the column for
  /// Schema/ParseError, the flag for UsageError.
  const std::optional<std::string>& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::optional<std::string> level_;
  std::optional<std::string> detail_;
};

[[noreturn]] void fail(ErrorKind kind, std::string message,
                       std::optional<std::string> level = std::nullopt,
                       std::optional<std::string> detail = std::nullopt);

}  // namespace trialdesign
