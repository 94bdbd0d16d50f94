#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace hydronet {

enum class ErrorCode {
  DuplicateId,
  DanglingEndpoint,
  SelfLoop,
  DisconnectedGraph,
  SyntaxError,
  UnknownNodeRef,
  MissingSection,
  NonNumericField,
  UnsupportedElement,
  SchemaMismatch,
  ShapeMismatch,
  IndexOutOfRange,
  NonFiniteValue,
  NonScalarLoss,
  NonPositiveInput,
  NoConvergence,
  NonPositiveResistance,
  RatioTooSmall,
  DegenerateRange,
  NonFiniteLoss,
  NonPositiveGroundTruth,
  EmptySensorSet,
  SingularSystem,
  ConfigError,
  IoError,
};

inline constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::DanglingEndpoint: return "DanglingEndpoint";
    case ErrorCode::SelfLoop: return "SelfLoop";
    case ErrorCode::DisconnectedGraph: return "DisconnectedGraph";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::UnknownNodeRef: return "UnknownNodeRef";
    case ErrorCode::MissingSection: return "MissingSection";
    case ErrorCode::NonNumericField: return "NonNumericField";
    case ErrorCode::UnsupportedElement: return "UnsupportedElement";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::NonScalarLoss: return "NonScalarLoss";
    case ErrorCode::NonPositiveInput: return "NonPositiveInput";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NonPositiveResistance: return "NonPositiveResistance";
    case ErrorCode::RatioTooSmall: return "RatioTooSmall";
    case ErrorCode::DegenerateRange: return "DegenerateRange";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::NonPositiveGroundTruth: return "NonPositiveGroundTruth";
    case ErrorCode::EmptySensorSet: return "EmptySensorSet";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure in the library is reported through this type. `what()` is a
/// single line of the form `<Code>: [line N: ]<detail>`.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail, std::optional<std::size_t> line = std::nullopt)
      : std::runtime_error(format(code, detail, line)), code_(code), detail_(detail), line_(line) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  static std::string format(ErrorCode code, const std::string& detail,
                            std::optional<std::size_t> line) {
    std::string out(to_string(code));
    out += ": ";
    if (line) out += "line " + std::to_string(*line) + ": ";
    for (char c : detail) out += (c == '\n' || c == '\r') ? ' ' : c;
    return out;
  }

  ErrorCode code_;
  std::string detail_;
  std::optional<std::size_t> line_;
};

}  // namespace hydronet
