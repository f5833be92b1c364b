#include "mjd/signal_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

#include "mjd/rng.hpp"

namespace mjd {

namespace {

constexpr std::uint64_t kChannelStream = 0xC0FFEE0000000001ULL;

std::vector<Complex> dft_impl(std::span<const Complex> x, double sign) {
  const std::size_t n = x.size();
  std::vector<Complex> out(n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    Complex acc{0.0, 0.0};
    for (std::size_t t = 0; t < n; ++t) {
      // Reduce the index product first so the twiddle angle stays small.
      const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>((t * k) % n) /
                           static_cast<double>(n);
      acc += x[t] * Complex(std::cos(angle), std::sin(angle));
    }
    out[k] = acc * scale;
  }
  return out;
}

void validate_sim_noise(const NoiseModel& noise) {
  if (!(noise.sigma_v2 >= 0.0) || !std::isfinite(noise.sigma_v2)) {
    throw DomainError("noise variance must be finite and >= 0");
  }
  if (noise.samples_m < 1) {
    throw DomainError("samples_m must be at least 1");
  }
}

// Fills rows [begin, end) of the batch; every trial draws from its own stream.
class TrialKernel {
 public:
  TrialKernel(const ChannelRealization& channel, const OccupancyVector& occupancy,
              const NoiseModel& noise, std::uint64_t seed, SimulationPath path)
      : channel_(channel), occupancy_(occupancy), noise_(noise), seed_(seed), path_(path) {
    const std::size_t k = channel.bands();
    magnitude_.resize(k);
    phase_.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
      magnitude_[i] = std::abs(channel.freq_response[i]);
      phase_[i] = magnitude_[i] > 0.0 ? std::conj(channel.freq_response[i]) / magnitude_[i]
                                      : Complex{1.0, 0.0};
    }
    // Taps enter the cyclic convolution scaled so that each bin sees H_k.
    const double norm = 1.0 / std::sqrt(static_cast<double>(k));
    scaled_taps_.reserve(channel.taps.size());
    for (const Complex& h : channel.taps) {
      scaled_taps_.push_back(h * norm);
    }
  }

  void run(std::span<double> rows, std::size_t first_trial) const {
    const std::size_t k = channel_.bands();
    const std::size_t count = rows.size() / k;
    for (std::size_t t = 0; t < count; ++t) {
      RandomStream rng(seed_, first_trial + t);
      std::span<double> row = rows.subspan(t * k, k);
      if (path_ == SimulationPath::kFrequencyDomain) {
        frequency_trial(rng, row);
      } else {
        time_trial(rng, row);
      }
    }
  }

 private:
  void frequency_trial(RandomStream& rng, std::span<double> row) const {
    const double sigma = std::sqrt(noise_.sigma_v2);
    std::fill(row.begin(), row.end(), 0.0);
    for (int m = 0; m < noise_.samples_m; ++m) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        const double signal = occupancy_[i] ? magnitude_[i] * rng.sign() : 0.0;
        const double obs = signal + (sigma > 0.0 ? sigma * rng.normal() : 0.0);
        row[i] += obs * obs;
      }
    }
  }

  void time_trial(RandomStream& rng, std::span<double> row) const {
    const std::size_t n = row.size();
    const double sigma = std::sqrt(noise_.sigma_v2);
    std::vector<Complex> symbols(n);
    std::vector<Complex> received(n);
    std::fill(row.begin(), row.end(), 0.0);
    for (int m = 0; m < noise_.samples_m; ++m) {
      for (std::size_t i = 0; i < n; ++i) {
        symbols[i] = occupancy_[i] ? Complex{rng.sign(), 0.0} : Complex{0.0, 0.0};
      }
      const std::vector<Complex> tx = unitary_idft(symbols);
      for (std::size_t t = 0; t < n; ++t) {
        Complex acc{0.0, 0.0};
        for (std::size_t l = 0; l < scaled_taps_.size(); ++l) {
          acc += scaled_taps_[l] * tx[(t + n - l % n) % n];
        }
        if (sigma > 0.0) {
          const double re = sigma * rng.normal();
          const double im = sigma * rng.normal();
          acc += Complex{re, im};
        }
        received[t] = acc;
      }
      const std::vector<Complex> bins = unitary_dft(received);
      for (std::size_t i = 0; i < n; ++i) {
        const double obs = (bins[i] * phase_[i]).real();
        row[i] += obs * obs;
      }
    }
  }

  const ChannelRealization& channel_;
  const OccupancyVector& occupancy_;
  NoiseModel noise_;
  std::uint64_t seed_;
  SimulationPath path_;
  std::vector<double> magnitude_;
  std::vector<Complex> phase_;
  std::vector<Complex> scaled_taps_;
};

}  // namespace

std::vector<double> ChannelRealization::gain_powers() const {
  std::vector<double> out;
  out.reserve(freq_response.size());
  for (const Complex& h : freq_response) {
    out.push_back(std::norm(h));
  }
  return out;
}

std::vector<Complex> unitary_dft(std::span<const Complex> x) { return dft_impl(x, -1.0); }

std::vector<Complex> unitary_idft(std::span<const Complex> x) { return dft_impl(x, 1.0); }

ChannelRealization make_channel(const ChannelSpec& spec, std::uint64_t seed) {
  ChannelRealization channel;
  if (const auto* gains = std::get_if<ExplicitGains>(&spec)) {
    if (gains->gain_power.empty()) {
      throw DomainError("channel needs at least one band");
    }
    for (double g : gains->gain_power) {
      if (!(g >= 0.0) || !std::isfinite(g)) {
        throw DomainError("gain power must be finite and >= 0");
      }
      channel.freq_response.emplace_back(std::sqrt(g), 0.0);
    }
    channel.taps = unitary_idft(channel.freq_response);
    return channel;
  }

  const auto& random = std::get<RandomTaps>(spec);
  if (random.bands == 0) {
    throw DomainError("channel needs at least one band");
  }
  if (random.tap_power.empty() || random.tap_power.size() > random.bands) {
    throw DomainError("tap count L must satisfy 1 <= L <= N");
  }
  RandomStream rng(seed, kChannelStream);
  for (double p : random.tap_power) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw DomainError("tap power must be finite and >= 0");
    }
    const double s = std::sqrt(p / 2.0);
    const double re = rng.normal();
    const double im = rng.normal();
    channel.taps.emplace_back(s * re, s * im);
  }
  std::vector<Complex> padded(random.bands, Complex{0.0, 0.0});
  std::copy(channel.taps.begin(), channel.taps.end(), padded.begin());
  channel.freq_response = unitary_dft(padded);
  return channel;
}

TrialBatch simulate_energies(const ChannelRealization& channel, const OccupancyVector& occupancy,
                             const NoiseModel& noise, std::size_t trials, std::uint64_t seed,
                             const SimulationOptions& options) {
  validate_sim_noise(noise);
  const std::size_t k = channel.bands();
  if (k == 0) {
    throw DomainError("channel has no bands");
  }
  if (occupancy.size() != k) {
    throw DomainError("occupancy length does not match the number of bands");
  }
  if (trials < 1) {
    throw DomainError("trials must be at least 1");
  }

  TrialBatch batch;
  batch.trials = trials;
  batch.bands = k;
  batch.occupancy = occupancy;
  batch.seed = seed;
  batch.energies.assign(trials * k, 0.0);

  const TrialKernel kernel(channel, occupancy, noise, seed, options.path);
  const std::size_t workers = std::clamp<std::size_t>(options.threads, 1, trials);
  std::span<double> all(batch.energies);
  if (workers == 1) {
    kernel.run(all, 0);
    return batch;
  }
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (trials + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(trials, begin + chunk);
      if (begin >= end) {
        break;
      }
      pool.emplace_back([&kernel, all, begin, end, k] {
        kernel.run(all.subspan(begin * k, (end - begin) * k), begin);
      });
    }
  }
  return batch;
}

std::vector<EmpiricalRate> empirical_rates(const TrialBatch& batch, std::span<const double> gamma) {
  if (batch.trials == 0 || batch.bands == 0) {
    throw DomainError("empty trial batch");
  }
  if (gamma.size() != batch.bands) {
    throw DomainError("threshold vector length does not match the number of bands");
  }
  std::vector<std::size_t> hits(batch.bands, 0);
  for (std::size_t t = 0; t < batch.trials; ++t) {
    for (std::size_t k = 0; k < batch.bands; ++k) {
      if (batch.at(t, k) > gamma[k]) {
        ++hits[k];
      }
    }
  }
  std::vector<EmpiricalRate> out(batch.bands);
  const double n = static_cast<double>(batch.trials);
  for (std::size_t k = 0; k < batch.bands; ++k) {
    const double p = static_cast<double>(hits[k]) / n;
    out[k] = {batch.occupancy[k], p, std::sqrt(p * (1.0 - p) / n)};
  }
  return out;
}

}  // namespace mjd
