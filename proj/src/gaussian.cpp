#include "mjd/gaussian.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace mjd {

Probability::Probability(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw DomainError("probability outside [0, 1]: " + std::to_string(value));
  }
}

double normal_pdf(double x) noexcept {
  static const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

Probability q(double x) {
  if (!std::isfinite(x)) {
    throw DomainError("q: non-finite argument");
  }
  return Probability(0.5 * std::erfc(x / std::numbers::sqrt2));
}

namespace {

// Acklam's rational approximation of the lower-tail normal quantile,
// relative error about 1.15e-9 before refinement.
double acklam_lower_quantile(double p) {
  constexpr std::array<double, 6> a{-3.969683028665376e+01, 2.209460984245205e+02,
                                    -2.759285104469687e+02, 1.383577518672690e+02,
                                    -3.066479806614716e+01, 2.506628277459239e+00};
  constexpr std::array<double, 5> b{-5.447609879822406e+01, 1.615858368580409e+02,
                                    -1.556989798598866e+02, 6.680131188771972e+01,
                                    -1.328068155288572e+01};
  constexpr std::array<double, 6> c{-7.784894002430293e-03, -3.223964580411365e-01,
                                    -2.400758277161838e+00, -2.549732539343734e+00,
                                    4.374664141464968e+00,  2.938163982698783e+00};
  constexpr std::array<double, 4> d{7.784695709041462e-03, 3.224671290700398e-01,
                                    2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double kLow = 0.02425;

  if (p < kLow) {
    const double t = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]) * t + c[5]) /
           ((((d[0] * t + d[1]) * t + d[2]) * t + d[3]) * t + 1.0);
  }
  if (p <= 1.0 - kLow) {
    const double u = p - 0.5;
    const double s = u * u;
    return (((((a[0] * s + a[1]) * s + a[2]) * s + a[3]) * s + a[4]) * s + a[5]) * u /
           (((((b[0] * s + b[1]) * s + b[2]) * s + b[3]) * s + b[4]) * s + 1.0);
  }
  const double t = std::sqrt(-2.0 * std::log1p(-p));
  return -(((((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]) * t + c[5]) /
         ((((d[0] * t + d[1]) * t + d[2]) * t + d[3]) * t + 1.0);
}

}  // namespace

double q_inv(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("q_inv: p must lie in (0, 1)");
  }
  if (p == 0.5) {
    return 0.0;
  }
  // Work on the upper half so the refinement sees a small tail probability;
  // 1 - p is exact for p >= 0.5.
  if (p > 0.5) {
    return -q_inv(1.0 - p);
  }
  // q(x) = p  <=>  Phi(-x) = p, so x = -quantile(p).
  double x = -acklam_lower_quantile(p);
  for (int it = 0; it < 2; ++it) {
    // Halley step on f(x) = q(x) - p with f' = -phi(x), f'' = x phi(x).
    const double err = 0.5 * std::erfc(x / std::numbers::sqrt2) - p;
    const double u = -err / normal_pdf(x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

}  // namespace mjd
