#pragma once

// Energy-detector statistics for one subchannel under the Gaussian (CLT)
// approximation of the summary statistic Y_k = sum_m |R_k(m)|^2.

#include <cstddef>
#include <stdexcept>
#include <string>

#include "mjd/gaussian.hpp"

namespace mjd {

struct NoiseModel {
  double sigma_v2 = 1.0;  ///< noise variance, linear power units
  int samples_m = 1;      ///< samples per detection interval
};

/// Per-band parameters. Transmitted power per subchannel is unity.
struct SubchannelParams {
  double gain_power = 0.0;  ///< |H_k|^2
  double rate = 0.0;        ///< r_k, kbps
  double cost = 0.0;        ///< c_k
  double alpha = 0.1;       ///< miss-probability cap, (0, 1/2]
  double beta = 0.5;        ///< false-alarm cap, (0, 1/2]
};

struct StatisticMoments {
  double mean_h0 = 0.0;
  double var_h0 = 0.0;
  double mean_h1 = 0.0;
  double var_h1 = 0.0;
};

struct ThresholdBounds {
  double gamma_min = 0.0;
  double gamma_max = 0.0;
};

/// First and second derivative of a probability with respect to the threshold.
struct Derivatives {
  double first = 0.0;
  double second = 0.0;
};

/// Thrown when gamma_min > gamma_max for a subchannel: no threshold meets both caps.
class InfeasibleSubchannel : public std::runtime_error {
 public:
  InfeasibleSubchannel(std::size_t index, const ThresholdBounds& bounds);
  [[nodiscard]] std::size_t index() const noexcept { return index_; }
  [[nodiscard]] const ThresholdBounds& bounds() const noexcept { return bounds_; }

 private:
  std::size_t index_;
  ThresholdBounds bounds_;
};

void validate(const NoiseModel& noise);
/// Checks gain/rate/cost signs and 0 < alpha, beta <= 1/2.
void validate(const SubchannelParams& sub);

[[nodiscard]] StatisticMoments statistic_moments(const SubchannelParams& sub, const NoiseModel& noise);

[[nodiscard]] Probability prob_false_alarm(double gamma, const NoiseModel& noise);
[[nodiscard]] Probability prob_detection(double gamma, const SubchannelParams& sub,
                                         const NoiseModel& noise);
/// 1 - prob_detection, evaluated on the lower tail so it keeps relative accuracy.
[[nodiscard]] Probability prob_miss(double gamma, const SubchannelParams& sub,
                                    const NoiseModel& noise);

/// Box [gamma_min, gamma_max] equivalent to Pf <= beta and Pm <= alpha.
/// `index` is only used to label an InfeasibleSubchannel error.
[[nodiscard]] ThresholdBounds threshold_bounds(const SubchannelParams& sub, const NoiseModel& noise,
                                               std::size_t index = 0);

[[nodiscard]] Derivatives pf_derivatives(double gamma, const NoiseModel& noise);
[[nodiscard]] Derivatives pm_derivatives(double gamma, const SubchannelParams& sub,
                                         const NoiseModel& noise);

/// A Gaussian tail probability of the threshold: Pf (upper tail of the H0
/// statistic) or Pm (lower tail of the H1 statistic). The optimizer works on
/// these without caring which one it holds.
class TailCurve {
 public:
  enum class Side { kUpper, kLower };

  TailCurve(double mean, double stddev, Side side) : mean_(mean), stddev_(stddev), side_(side) {}

  static TailCurve false_alarm(const NoiseModel& noise);
  static TailCurve miss(const SubchannelParams& sub, const NoiseModel& noise);

  [[nodiscard]] double value(double gamma) const;
  [[nodiscard]] Derivatives derivatives(double gamma) const;
  /// Threshold at which value() equals p.
  [[nodiscard]] double inverse(double p) const;

  [[nodiscard]] double mean() const noexcept { return mean_; }
  [[nodiscard]] double stddev() const noexcept { return stddev_; }
  [[nodiscard]] Side side() const noexcept { return side_; }

 private:
  [[nodiscard]] double standardized(double gamma) const {
    const double z = (gamma - mean_) / stddev_;
    return side_ == Side::kUpper ? z : -z;
  }

  double mean_;
  double stddev_;
  Side side_;
};

}  // namespace mjd
