#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bsmimo {

enum class ErrorCode {
  InvalidArgument,
  Validation,
  Parse,
  SingularConversion,
  SingularReduction,
  PoleAtFreeParameter,
  NonPskRatio,
  GridMismatch,
  DegenerateBasis,
  EmptyPathSet,
  ZeroEnsemble,
  LengthMismatch,
  InsufficientSamples,
  SingularTraining,
  SingularChannel,
};

std::string_view to_string(ErrorCode code);

// True for failures caused by bad input (files, configs, arguments) rather
// than by the numerics. The CLI maps these to exit code 2, the rest to 3.
bool is_input_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace bsmimo
