#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qbar {

// Base of every error the library throws. code() is a stable machine-readable
// tag that the CLI reports verbatim.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& m) : Error("domain_error", m) {}
};

class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& m) : Error("argument_error", m) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& m) : Error("data_error", m) {}
};

class NormalizationError : public Error {
 public:
  explicit NormalizationError(const std::string& m) : Error("normalization_error", m) {}
};

class NoResonanceError : public Error {
 public:
  explicit NoResonanceError(const std::string& m) : Error("no_resonance", m) {}
};

class DegenerateFitError : public Error {
 public:
  explicit DegenerateFitError(const std::string& m) : Error("degenerate_fit", m) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error("config_error", m) {}
};

class InstabilityError : public Error {
 public:
  explicit InstabilityError(const std::string& m) : Error("instability", m) {}
};

class ResourceError : public Error {
 public:
  explicit ResourceError(const std::string& m) : Error("resource_error", m) {}
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& m)
      : Error("parse_error", "line " + std::to_string(line) + ": " + m), line_(line) {}

  // 1-based; 0 when the error is not tied to a line (e.g. empty input).
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace qbar
