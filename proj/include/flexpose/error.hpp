// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace flexpose {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes or channel counts do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value appeared in an activation, loss or gradient.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A configuration or domain object violates its invariants.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Sequence lengths are too short or do not match.
class LengthError : public Error {
 public:
  using Error::Error;
};

/// Degenerate geometry such as a zero-length bone.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Malformed wire frame or stream.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// Calibration gesture rejected (degenerate range, unstable T-pose).
class CalibrationError : public Error {
 public:
  using Error::Error;
};

/// Training diverged; carries a diagnostic message.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// File could not be read, written or parsed.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace flexpose
