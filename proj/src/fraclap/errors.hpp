#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fraclap {

// Base of every error raised by the library. `module()` names the component
// that failed so the CLI can report it.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(what), module_(std::move(module)) {}
  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

// Invalid user-facing input (bad config, out-of-range parameter).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

class InvalidArgument : public Error {
 public:
  InvalidArgument(std::string module, const std::string& what)
      : Error(std::move(module), what) {}
};

// Everything below is a numerical failure.
class NumericError : public Error {
 public:
  using Error::Error;
};

class AssemblyError : public NumericError {
 public:
  AssemblyError(const std::string& what, std::size_t band)
      : NumericError("fe_core", what + " (band " + std::to_string(band) + ")"), band_(band) {}
  std::size_t band() const noexcept { return band_; }

 private:
  std::size_t band_;
};

class SolveError : public NumericError {
 public:
  SolveError(std::string module, const std::string& what)
      : NumericError(std::move(module), what) {}
};

class DimensionError : public NumericError {
 public:
  DimensionError(std::string module, const std::string& what)
      : NumericError(std::move(module), what) {}
};

class OracleError : public NumericError {
 public:
  explicit OracleError(const std::string& what) : NumericError("heat_solver", what) {}
};

class MeshAlignmentError : public NumericError {
 public:
  explicit MeshAlignmentError(const std::string& what) : NumericError("exterior_control", what) {}
};

class NonConvergence : public NumericError {
 public:
  NonConvergence(std::string module, const std::string& what, double last_residual)
      : NumericError(std::move(module), what), last_residual_(last_residual) {}
  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

class Divergence : public NumericError {
 public:
  Divergence(std::string module, const std::string& what)
      : NumericError(std::move(module), what) {}
};

class BracketError : public NumericError {
 public:
  explicit BracketError(const std::string& what) : NumericError("constrained_control", what) {}
};

}  // namespace fraclap
