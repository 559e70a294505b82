#pragma once

#include <stdexcept>
#include <string>

namespace cycletrans {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid specs, hyperparameters, or configuration files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed runtime inputs (shape mismatches, empty ranges, bad direction).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Filesystem and codec failures.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A file whose extension or magic bytes are not a supported format.
class UnknownFormatError : public IoError {
 public:
  using IoError::IoError;
};

/// A recognized file that cannot be decoded.
class CorruptFileError : public IoError {
 public:
  using IoError::IoError;
};

/// A decoded volume containing NaN or infinite voxels.
class NonFiniteVoxelError : public IoError {
 public:
  using IoError::IoError;
};

/// Checkpoint tag/spec mismatches.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss during training; message names the offending component.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Pearson correlation requested on a zero-variance histogram.
class ZeroVarianceError : public Error {
 public:
  using Error::Error;
};

}  // namespace cycletrans
