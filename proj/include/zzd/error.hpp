#pragma once

#include <stdexcept>
#include <string>

namespace zzd {

/// Base of every error the library throws. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data violates a documented precondition (labels, counts, schema).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid model, optimizer, scheduler or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value appeared where only finite values are allowed.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Binary file (embeddings or checkpoint) failed a structural check.
class FormatError : public Error {
 public:
  enum class Kind {
    bad_magic,
    unsupported_version,
    truncated,
    dimension,
    corrupt,
    config_mismatch,
    shape_mismatch,
    io,
  };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace zzd
