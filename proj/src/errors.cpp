#include "trialdesign/errors.hpp"

#include <utility>

namespace trialdesign {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kAllZeroWeights: return "AllZeroWeights";
    case ErrorKind::kNegativeWeight: return "NegativeWeight";
    case ErrorKind::kValueOutOfSupport: return "ValueOutOfSupport";
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kEmptyCell: return "EmptyCell";
    case ErrorKind::kZeroKernelMass: return "ZeroKernelMass";
    case ErrorKind::kPositivityViolation: return "PositivityViolation";
    case ErrorKind::kDegenerateVariability: return "DegenerateVariability";
    case ErrorKind::kInsufficientCell: return "InsufficientCell";
    case ErrorKind::kInfeasibleDraw: return "InfeasibleDraw";
    case ErrorKind::kDegenerateFit: return "DegenerateFit";
    case ErrorKind::kSchemaError: return "SchemaError";
    case ErrorKind::kParseError: return "ParseError";
    case ErrorKind::kIoError: return "IoError";
    case ErrorKind::kUsageError: return "UsageError";
  }
  return "Unknown";
}

int exit_status(ErrorKind kind) {
  return kind == ErrorKind::kUsageError ? 1 : 2;
}

DesignError::DesignError(ErrorKind kind, std::string message, std::optional<std::string> level,
                         std::optional<std::string> detail)
    : std::runtime_error(std::move(message)),
      kind_(kind),
      level_(std::move(level)),
      detail_(std::move(detail)) {}

void fail(ErrorKind kind, std::string message, std::optional<std::string> level,
          std::optional<std::string> detail) {
  throw DesignError(kind, std::move(message), std::move(level), std::move(detail));
}

}  // namespace trialdesign
