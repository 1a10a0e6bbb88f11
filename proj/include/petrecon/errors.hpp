#pragma once

#include <stdexcept>
#include <string>

namespace petrecon {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration (geometry, phantom, keys, ranges).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Operands whose shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values encountered during an iterative solve.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A pipeline step needs a file that an earlier subcommand should have written.
class MissingArtifactError : public Error {
 public:
  MissingArtifactError(const std::string& path, const std::string& producer)
      : Error("missing artifact '" + path + "'; run `petrecon " + producer + "` first"),
        path_(path),
        producer_(producer) {}

  const std::string& path() const { return path_; }
  const std::string& producer() const { return producer_; }

 private:
  std::string path_;
  std::string producer_;
};

}  // namespace petrecon
