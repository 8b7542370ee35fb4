#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace grafair {

enum class ErrorCode {
  IndexOutOfRange,
  NonBinaryColumn,
  EmptyGraph,
  NegativeStd,
  ShapeMismatch,
  NonScalarRoot,
  UnknownVariant,
  NonFiniteInput,
  EmptyTrainMask,
  InvalidBeta,
  EmptyMask,
  DegenerateGroup,
  NonFiniteLoss,
  MissingFile,
  ParseError,
  InvalidParameter,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by the trainer when the objective stops being finite.
class NonFiniteLossError : public Error {
 public:
  NonFiniteLossError(int epoch, double value)
      : Error(ErrorCode::NonFiniteLoss,
              "loss is " + std::to_string(value) + " at epoch " + std::to_string(epoch)),
        epoch_(epoch) {}

  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace grafair
