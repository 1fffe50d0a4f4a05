#pragma once

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace ctfem {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed arguments: empty or non-finite waveforms, bad segment sizes.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A file that does not follow its declared layout (WAV, prior file).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Well-formed file with values outside their domain.
class DataError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  static constexpr std::size_t kNoBand = std::numeric_limits<std::size_t>::max();

  explicit NumericalError(const std::string& what, std::size_t band = kNoBand)
      : Error(what), band_(band) {}

  /// Frequency band that failed, or kNoBand.
  std::size_t band() const noexcept { return band_; }

 private:
  std::size_t band_;
};

}  // namespace ctfem
