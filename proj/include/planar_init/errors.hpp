#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace planar_init {

enum class ErrorKind {
  kLabeledFrame,
  kBehindCamera,
  kInvalidPlane,
  kInsufficientData,
  kDegenerateEstimation,
  kDegenerateHomography,
  kInconsistentData,
  kStream,
  kNoSolution,
  kInvalidDisparity,
  kDegeneratePnp,
  kDegenerateTranslation,
  kHorizonSingularity,
  kZeroDepth,
  kUnobservableVelocity,
  kTime,
  kAlignment,
  kConfig,
  kIo,
};

std::string_view to_string(ErrorKind kind);

/// Typed failure raised by every module. The kind is stable and is what
/// tests and the pipeline dispatch on; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace planar_init
