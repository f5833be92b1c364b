#include "mjd/detection.hpp"

#include <cmath>
#include <limits>

namespace mjd {

namespace {

std::string describe(std::size_t index, const ThresholdBounds& b) {
  return "subchannel " + std::to_string(index) + " infeasible: gamma_min " +
         std::to_string(b.gamma_min) + " > gamma_max " + std::to_string(b.gamma_max);
}

}  // namespace

InfeasibleSubchannel::InfeasibleSubchannel(std::size_t index, const ThresholdBounds& bounds)
    : std::runtime_error(describe(index, bounds)), index_(index), bounds_(bounds) {}

void validate(const NoiseModel& noise) {
  if (!(noise.sigma_v2 > 0.0) || !std::isfinite(noise.sigma_v2)) {
    throw DomainError("noise variance sigma_v2 must be positive and finite");
  }
  if (noise.samples_m < 1) {
    throw DomainError("samples_m must be at least 1");
  }
}

void validate(const SubchannelParams& sub) {
  if (!(sub.gain_power >= 0.0) || !std::isfinite(sub.gain_power)) {
    throw DomainError("gain_power must be finite and >= 0");
  }
  if (!(sub.rate >= 0.0) || !std::isfinite(sub.rate)) {
    throw DomainError("rate must be finite and >= 0");
  }
  if (!(sub.cost >= 0.0) || !std::isfinite(sub.cost)) {
    throw DomainError("cost must be finite and >= 0");
  }
  if (!(sub.alpha > 0.0 && sub.alpha <= 0.5)) {
    throw DomainError("alpha must satisfy 0 < alpha <= 1/2 (convexity regime)");
  }
  if (!(sub.beta > 0.0 && sub.beta <= 0.5)) {
    throw DomainError("beta must satisfy 0 < beta <= 1/2 (convexity regime)");
  }
}

StatisticMoments statistic_moments(const SubchannelParams& sub, const NoiseModel& noise) {
  validate(noise);
  const double m = noise.samples_m;
  const double s2 = noise.sigma_v2;
  const double h2 = sub.gain_power;
  return {m * s2, 2.0 * m * s2 * s2, m * (s2 + h2), 2.0 * m * (s2 + 2.0 * h2) * s2};
}

TailCurve TailCurve::false_alarm(const NoiseModel& noise) {
  validate(noise);
  const double m = noise.samples_m;
  return {m * noise.sigma_v2, noise.sigma_v2 * std::sqrt(2.0 * m), Side::kUpper};
}

TailCurve TailCurve::miss(const SubchannelParams& sub, const NoiseModel& noise) {
  validate(noise);
  const double m = noise.samples_m;
  const double s2 = noise.sigma_v2;
  const double h2 = sub.gain_power;
  return {m * (s2 + h2), std::sqrt(s2) * std::sqrt(2.0 * m * (s2 + 2.0 * h2)), Side::kLower};
}

double TailCurve::value(double gamma) const {
  if (std::isinf(gamma)) {
    const bool high = gamma > 0;
    return (high == (side_ == Side::kUpper)) ? 0.0 : 1.0;
  }
  return q(standardized(gamma));
}

Derivatives TailCurve::derivatives(double gamma) const {
  const double zeta = standardized(gamma);
  const double sign = side_ == Side::kUpper ? 1.0 : -1.0;
  const double pdf = normal_pdf(zeta);
  return {-sign * pdf / stddev_, zeta * pdf / (stddev_ * stddev_)};
}

double TailCurve::inverse(double p) const {
  const double zeta = q_inv(p);
  const double z = side_ == Side::kUpper ? zeta : -zeta;
  return mean_ + stddev_ * z;
}

Probability prob_false_alarm(double gamma, const NoiseModel& noise) {
  return Probability(TailCurve::false_alarm(noise).value(gamma));
}

Probability prob_miss(double gamma, const SubchannelParams& sub, const NoiseModel& noise) {
  return Probability(TailCurve::miss(sub, noise).value(gamma));
}

Probability prob_detection(double gamma, const SubchannelParams& sub, const NoiseModel& noise) {
  const TailCurve miss = TailCurve::miss(sub, noise);
  if (std::isinf(gamma)) {
    return Probability(gamma > 0 ? 0.0 : 1.0);
  }
  return q((gamma - miss.mean()) / miss.stddev());
}

ThresholdBounds threshold_bounds(const SubchannelParams& sub, const NoiseModel& noise,
                                 std::size_t index) {
  validate(sub);
  validate(noise);
  const double m = noise.samples_m;
  const double s2 = noise.sigma_v2;
  const double h2 = sub.gain_power;
  ThresholdBounds b;
  b.gamma_min = s2 * (m + std::sqrt(2.0 * m) * q_inv(sub.beta));
  b.gamma_max = m * (s2 + h2) + std::sqrt(s2) * std::sqrt(2.0 * m * (s2 + 2.0 * h2)) * q_inv(1.0 - sub.alpha);
  if (b.gamma_min > b.gamma_max) {
    throw InfeasibleSubchannel(index, b);
  }
  return b;
}

Derivatives pf_derivatives(double gamma, const NoiseModel& noise) {
  return TailCurve::false_alarm(noise).derivatives(gamma);
}

Derivatives pm_derivatives(double gamma, const SubchannelParams& sub, const NoiseModel& noise) {
  return TailCurve::miss(sub, noise).derivatives(gamma);
}

}  // namespace mjd
