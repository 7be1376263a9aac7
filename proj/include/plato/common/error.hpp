#pragma once

#include <stdexcept>
#include <string>

namespace plato {

/// Process exit codes shared by every CLI subcommand.
enum class ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kData = 3,
  kNumeric = 4,
};

/// Invalid configuration (bad ranges, unknown keys, overcrowded arena).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller passed malformed input (shape mismatch, non-finite action, ...).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operation used in the wrong state or with the wrong variant.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Dataset content unusable for the requested operation.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training diverged or produced a non-finite value.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary file or snapshot could not be decoded.
class FormatError : public std::runtime_error {
 public:
  enum class Kind { kMagic, kVersion, kTruncated, kDimMismatch, kMalformed, kIo };

  FormatError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace plato
