#pragma once

// Monte Carlo generator for the per-band energy statistic.
//
// Each detection interval observes M independent frames. In frame m the
// primary transmits BPSK symbols S_k on occupied bands, the receiver forms
// R_k = H_k S_k + V_k and keeps the component of R_k in phase with H_k, so a
// frame contributes |H_k| S_k + n with n ~ N(0, sigma_v^2) and
// Y_k = sum_m (|H_k| S_k(m) + n(m))^2. These are exactly the moments
// M sigma^2 / 2 M sigma^4 (vacant) and M(sigma^2 + |H|^2) /
// 2 M (sigma^2 + 2|H|^2) sigma^2 (occupied) that the detector model assumes.

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "mjd/detection.hpp"

namespace mjd {

using Complex = std::complex<double>;

struct ChannelRealization {
  std::vector<Complex> taps;           ///< h(0..L-1)
  std::vector<Complex> freq_response;  ///< H_k, k = 0..K-1 (normalized DFT, N = K)

  [[nodiscard]] std::size_t bands() const noexcept { return freq_response.size(); }
  [[nodiscard]] std::vector<double> gain_powers() const;
};

/// Band gains given directly; H_k = sqrt(|H_k|^2) with zero phase.
struct ExplicitGains {
  std::vector<double> gain_power;
};

/// L circularly-symmetric complex Gaussian taps with E|h(l)|^2 = tap_power[l].
struct RandomTaps {
  std::size_t bands = 0;
  std::vector<double> tap_power;
};

using ChannelSpec = std::variant<ExplicitGains, RandomTaps>;

/// true = primary present on that band.
using OccupancyVector = std::vector<bool>;

struct TrialBatch {
  std::size_t trials = 0;
  std::size_t bands = 0;
  std::vector<double> energies;  ///< row-major, trials x bands
  OccupancyVector occupancy;
  std::uint64_t seed = 0;

  [[nodiscard]] double at(std::size_t trial, std::size_t band) const {
    return energies[trial * bands + band];
  }
};

enum class SimulationPath {
  kFrequencyDomain,  ///< draw the per-bin observation directly
  kTimeDomain,       ///< cyclic convolution + unitary DFT of each frame
};

struct SimulationOptions {
  unsigned threads = 1;
  SimulationPath path = SimulationPath::kFrequencyDomain;
};

/// Unitary DFT (forward sign -1) and its inverse.
[[nodiscard]] std::vector<Complex> unitary_dft(std::span<const Complex> x);
[[nodiscard]] std::vector<Complex> unitary_idft(std::span<const Complex> x);

[[nodiscard]] ChannelRealization make_channel(const ChannelSpec& spec, std::uint64_t seed);

/// sigma_v2 may be zero here (noiseless check); the detector model requires > 0.
[[nodiscard]] TrialBatch simulate_energies(const ChannelRealization& channel,
                                           const OccupancyVector& occupancy,
                                           const NoiseModel& noise, std::size_t trials,
                                           std::uint64_t seed, const SimulationOptions& options = {});

struct EmpiricalRate {
  bool occupied = false;  ///< true: rate estimates Pd, false: Pf
  double rate = 0.0;      ///< fraction of trials with Y_k > gamma_k
  double std_error = 0.0; ///< binomial standard error
};

[[nodiscard]] std::vector<EmpiricalRate> empirical_rates(const TrialBatch& batch,
                                                         std::span<const double> gamma);

}  // namespace mjd
