#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sparsereg {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible matrix/graph shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Argument outside the documented domain (tau <= 0, eta >= 1, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed file or text input (IDX, checkpoint, config, flip map).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Non-finite objective during training.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t epoch, std::size_t batch, const std::string& what)
      : Error("diverged at epoch " + std::to_string(epoch) + ", batch " +
              std::to_string(batch) + ": " + what),
        epoch_(epoch),
        batch_(batch) {}

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

}  // namespace sparsereg
