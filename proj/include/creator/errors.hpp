#pragma once

#include <stdexcept>
#include <string>

namespace creator {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A decomposition failed to converge.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

/// Input data carries no usable signal (constant columns, zero rank, ...).
class DegenerateData : public Error {
 public:
  using Error::Error;
};

/// Invalid parameters or unsupported options.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage could not proceed; `stage()` names it.
class StructuralFailure : public Error {
 public:
  StructuralFailure(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Malformed files, unreadable paths, ragged CSV rows.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Ground truth required but absent.
class MissingGroundTruth : public Error {
 public:
  using Error::Error;
};

}  // namespace creator
