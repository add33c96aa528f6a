#pragma once

#include <stdexcept>
#include <string>

namespace graindeck {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or construction arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data is missing, malformed or inconsistent (layout, pairing,
/// decoding, shape mismatch).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Dataset directory does not follow the expected layout.
class LayoutError : public DataError {
 public:
  using DataError::DataError;
};

/// An image has no partner mask (or vice versa).
class PairingError : public DataError {
 public:
  using DataError::DataError;
};

/// Two arrays that must agree in shape do not.
class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

/// A class has too few samples to be split.
class InsufficientDataError : public DataError {
 public:
  using DataError::DataError;
};

/// Grains could not be placed on a synthetic canvas.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(int epoch, int batch)
      : Error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
              std::to_string(batch)),
        epoch_(epoch),
        batch_(batch) {}

  int epoch() const noexcept { return epoch_; }
  int batch() const noexcept { return batch_; }

 private:
  int epoch_;
  int batch_;
};

}  // namespace graindeck
