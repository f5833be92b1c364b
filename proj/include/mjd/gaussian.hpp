#pragma once

#include <stdexcept>
#include <string>

namespace mjd {

/// Raised when an argument lies outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// A probability in [0, 1].
class Probability {
 public:
  constexpr Probability() = default;
  explicit Probability(double value);

  [[nodiscard]] constexpr double value() const noexcept { return value_; }
  constexpr operator double() const noexcept { return value_; }  // NOLINT

 private:
  double value_ = 0.0;
};

/// Standard normal density.
[[nodiscard]] double normal_pdf(double x) noexcept;

/// Standard normal upper tail P(Z > x). Throws DomainError for non-finite x.
[[nodiscard]] Probability q(double x);

/// Inverse of q on (0, 1): returns x with q(x) = p.
[[nodiscard]] double q_inv(double p);

}  // namespace mjd
