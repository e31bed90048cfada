#ifndef PDL_ERRORS_HPP_
#define PDL_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pdl {

/// Precondition or domain violation on a caller-supplied value.
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// An iterative method or a loss evaluation did not produce a usable number.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Structure matrix too close to singular for the eigenvalue bounds.
class RankDeficient : public InvalidInput {
 public:
  RankDeficient(double lambda_min, double tol)
      : InvalidInput("structure matrix is rank deficient: lambda_min = " +
                     std::to_string(lambda_min) + " <= " + std::to_string(tol)),
        lambda_min_(lambda_min) {}

  double lambda_min() const noexcept { return lambda_min_; }

 private:
  double lambda_min_;
};

/// Malformed binary input file.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Invalid run configuration; `field` is a JSON-pointer-like path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(field) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace pdl

#endif  // PDL_ERRORS_HPP_
