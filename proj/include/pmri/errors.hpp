#pragma once

#include <stdexcept>
#include <string>

namespace pmri {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Array shapes of the operands do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf or otherwise out-of-domain numeric input.
class NumericDomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A pixel inside the declared support has no coil signal.
class DegenerateSupportError : public Error {
 public:
  using Error::Error;
};

/// Metric is undefined for the given inputs (zero reference energy, empty mask).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// Training loss became non-finite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Interpolation coefficients violate the convex-combination rules.
class InterpSpecError : public Error {
 public:
  using Error::Error;
};

/// Checkpoints cannot be combined; what() carries the mismatch report.
class IncompatibleModelsError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

// File-format errors. Each malformation has its own class so callers and
// tests can tell them apart.
class FormatError : public Error {
 public:
  using Error::Error;
};

class BadMagicError : public FormatError {
 public:
  using FormatError::FormatError;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncationError : public FormatError {
 public:
  using FormatError::FormatError;
};

class DescriptorError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace pmri
