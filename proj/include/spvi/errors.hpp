#ifndef SPVI_ERRORS_HPP
#define SPVI_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spvi {

/// Raised when a covariance matrix cannot be factorized even after jitter retries.
class NotPositiveDefinite : public std::runtime_error {
 public:
  NotPositiveDefinite(const std::string& what, double nu, double jitter)
      : std::runtime_error(what), nu_(nu), jitter_(jitter) {}
  double nu() const { return nu_; }
  double jitter() const { return jitter_; }

 private:
  double nu_;
  double jitter_;
};

/// A Monte-Carlo estimator met a non-finite log weight.
class EstimatorError : public std::runtime_error {
 public:
  EstimatorError(const std::string& what, std::size_t draw)
      : std::runtime_error(what), draw_(draw) {}
  std::size_t draw() const { return draw_; }

 private:
  std::size_t draw_;
};

/// Malformed input data. `line` is 1-based; 0 when not tied to a line.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// A file could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace spvi

#endif  // SPVI_ERRORS_HPP
