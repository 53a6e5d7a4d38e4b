#pragma once

#include <stdexcept>
#include <string>

namespace troplift {

// Input/schema problems. The CLI maps these to exit code 2.
struct InputError : std::runtime_error {
  explicit InputError(const std::string& m) : std::runtime_error(m) {}
};

// Mathematical failures (exit code 1). `kind` is a stable machine tag.
struct MathError : std::runtime_error {
  std::string kind;
  MathError(std::string k, const std::string& m)
      : std::runtime_error(m), kind(std::move(k)) {}
};

// A valuation needed by the computation was truncated away.
struct PrecisionError : MathError {
  explicit PrecisionError(const std::string& m)
      : MathError("InsufficientPrecision", m) {}
};

}  // namespace troplift
