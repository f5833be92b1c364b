#include <cfloat>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "fixtures.hpp"
#include "mjd/rng.hpp"
#include "mjd/signal_sim.hpp"

using namespace mjd;

namespace {

const NoiseModel kNoise{1.0, 100};

struct Stats {
  double mean = 0.0;
  double var = 0.0;
};

Stats column_stats(const TrialBatch& b, std::size_t k) {
  Stats s;
  for (std::size_t t = 0; t < b.trials; ++t) s.mean += b.at(t, k);
  s.mean /= static_cast<double>(b.trials);
  for (std::size_t t = 0; t < b.trials; ++t) s.var += (b.at(t, k) - s.mean) * (b.at(t, k) - s.mean);
  s.var /= static_cast<double>(b.trials - 1);
  return s;
}

double correlation(const TrialBatch& b, std::size_t i, std::size_t j) {
  const Stats si = column_stats(b, i), sj = column_stats(b, j);
  double cov = 0.0;
  for (std::size_t t = 0; t < b.trials; ++t) cov += (b.at(t, i) - si.mean) * (b.at(t, j) - sj.mean);
  cov /= static_cast<double>(b.trials - 1);
  return cov / std::sqrt(si.var * sj.var);
}

ChannelRealization table_channel() { return make_channel(ExplicitGains{fixture::kGain}, 0); }

}  // namespace

TEST_SUITE("signal_sim") {

TEST_CASE("random streams are reproducible and distinct") {
  RandomStream a(7, 3), b(7, 3), c(7, 4);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    CHECK(x == b.normal());
    differs = differs || x != c.normal();
  }
  CHECK(differs);
  RandomStream u(1, 0);
  for (int i = 0; i < 10000; ++i) {
    const double v = u.uniform();
    REQUIRE(v >= 0.0);
    REQUIRE(v < 1.0);
    REQUIRE(u.uniform_open_low() > 0.0);
  }
}

TEST_CASE("normal draws have unit moments") {
  RandomStream s(11, 0);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = s.normal();
    sum += x;
    sq += x * x;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.015);
}

TEST_CASE("unitary DFT round trip and Parseval") {
  std::vector<Complex> x = {{1, 2}, {-0.5, 0.25}, {3, -1}, {0, 0}, {0.1, 0.7}};
  const auto X = unitary_dft(x);
  const auto back = unitary_idft(X);
  double ex = 0.0, eX = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(std::abs(back[i] - x[i]) < 1e-12);
    ex += std::norm(x[i]);
    eX += std::norm(X[i]);
  }
  CHECK(ex == doctest::Approx(eX).epsilon(1e-12));
}

TEST_CASE("explicit gains are reproduced exactly") {
  const auto ch = table_channel();
  REQUIRE(ch.bands() == 8);
  const auto g = ch.gain_powers();
  // H_k = sqrt(|H_k|^2), so squaring back is exact up to one rounding.
  for (std::size_t k = 0; k < 8; ++k) CHECK(std::abs(g[k] - fixture::kGain[k]) <= 2.0 * DBL_EPSILON * fixture::kGain[k]);
  const auto H = unitary_dft(ch.taps);
  for (std::size_t k = 0; k < 8; ++k) CHECK(std::abs(H[k] - ch.freq_response[k]) < 1e-12);
}

TEST_CASE("zero profile gives a zero response") {
  const auto ch = make_channel(ExplicitGains{std::vector<double>(8, 0.0)}, 0);
  for (const auto& h : ch.freq_response) CHECK(h == Complex{});
  const auto rt = make_channel(RandomTaps{8, {0.0, 0.0, 0.0}}, 3);
  for (const auto& h : rt.freq_response) CHECK(h == Complex{});
}

TEST_CASE("channel input errors") {
  CHECK_THROWS_AS((void)make_channel(ExplicitGains{{0.5, -0.1}}, 0), DomainError);
  CHECK_THROWS_AS((void)make_channel(RandomTaps{2, {1.0, 1.0, 1.0}}, 0), DomainError);
}

TEST_CASE("random taps obey Parseval on average") {
  const std::vector<double> power = {0.25, 0.25, 0.25, 0.25};
  double total = 0.0;
  const int seeds = 10000;
  for (int s = 0; s < seeds; ++s) {
    const auto ch = make_channel(RandomTaps{8, power}, static_cast<std::uint64_t>(s));
    const auto g = ch.gain_powers();
    total += std::accumulate(g.begin(), g.end(), 0.0);
  }
  CHECK(std::abs(total / seeds - 1.0) < 0.02);
}

TEST_CASE("vacant moments") {
  const auto batch = simulate_energies(table_channel(), OccupancyVector(8, false), kNoise, 100000, 1);
  for (std::size_t k = 0; k < 8; ++k) {
    const auto s = column_stats(batch, k);
    CHECK(std::abs(s.mean / 100.0 - 1.0) < 0.01);
    CHECK(std::abs(s.var / 200.0 - 1.0) < 0.03);
  }
  for (double e : batch.energies) REQUIRE(e >= 0.0);
}

TEST_CASE("occupied moments") {
  const auto batch = simulate_energies(table_channel(), OccupancyVector(8, true), kNoise, 100000, 2);
  for (std::size_t k = 0; k < 8; ++k) {
    const double h = fixture::kGain[k];
    const auto s = column_stats(batch, k);
    CHECK(std::abs(s.mean / (100.0 * (1.0 + h)) - 1.0) < 0.01);
    CHECK(std::abs(s.var / (200.0 * (1.0 + 2.0 * h)) - 1.0) < 0.03);
  }
}

TEST_CASE("noiseless vacant band is exactly zero") {
  const auto batch = simulate_energies(table_channel(), OccupancyVector(8, false), NoiseModel{0.0, 100}, 50, 3);
  for (double e : batch.energies) CHECK(e == 0.0);
}

TEST_CASE("empirical false alarm at the noise mean follows the exact chi-square tail") {
  // Below the CLT value of 0.5 by about 0.019 at M = 100.
  const auto batch = simulate_energies(table_channel(), OccupancyVector(8, false), kNoise, 100000, 4);
  const auto rates = empirical_rates(batch, std::vector<double>(8, 100.0));
  const double exact = ref::chi2_upper_even(100.0, 100);
  CHECK(exact == doctest::Approx(0.4812).epsilon(1e-3));
  for (const auto& r : rates) {
    CHECK_FALSE(r.occupied);
    CHECK(std::abs(r.rate - exact) <= 3.0 * r.std_error);
  }
}

TEST_CASE("negative thresholds are always exceeded") {
  const auto batch = simulate_energies(table_channel(), OccupancyVector(8, false), kNoise, 1000, 5);
  for (const auto& r : empirical_rates(batch, std::vector<double>(8, -1.0))) CHECK(r.rate == 1.0);
}

TEST_CASE("empirical detection at the miss cap") {
  const auto batch = simulate_energies(table_channel(), OccupancyVector(8, true), kNoise, 100000, 6);
  std::vector<double> gamma(8, 0.0);
  gamma[0] = 124.369;
  const auto r = empirical_rates(batch, gamma);
  CHECK(r[0].occupied);
  CHECK(std::abs(r[0].rate - 0.90) <= 0.01);
}

TEST_CASE("rate length mismatch") {
  const auto batch = simulate_energies(table_channel(), OccupancyVector(8, false), kNoise, 10, 7);
  CHECK_THROWS_AS((void)empirical_rates(batch, std::vector<double>(7, 1.0)), DomainError);
}

TEST_CASE("batches are deterministic and independent of the thread count") {
  OccupancyVector occ = {true, false, true, true, false, false, true, false};
  const auto a = simulate_energies(table_channel(), occ, kNoise, 5003, 99, {1});
  const auto b = simulate_energies(table_channel(), occ, kNoise, 5003, 99, {4});
  const auto c = simulate_energies(table_channel(), occ, kNoise, 5003, 99, {3});
  const auto d = simulate_energies(table_channel(), occ, kNoise, 5003, 100, {1});
  CHECK(a.energies == b.energies);
  CHECK(a.energies == c.energies);
  CHECK(a.energies != d.energies);
  CHECK(a.seed == 99);
  CHECK(a.occupancy == occ);
}

TEST_CASE("time-domain path agrees with the frequency-domain path") {
  OccupancyVector occ = {true, false, true, false, true, false, true, false};
  const std::size_t n = 20000;
  const auto f = simulate_energies(table_channel(), occ, kNoise, n, 8, {1, SimulationPath::kFrequencyDomain});
  const auto t = simulate_energies(table_channel(), occ, kNoise, n, 8, {2, SimulationPath::kTimeDomain});
  for (std::size_t k = 0; k < 8; ++k) {
    const double h = occ[k] ? fixture::kGain[k] : 0.0;
    const double mean = 100.0 * (1.0 + h), var = 200.0 * (1.0 + 2.0 * h);
    const auto sf = column_stats(f, k), st = column_stats(t, k);
    // Means within 4 standard errors of the difference; variances within 5%.
    const double se = std::sqrt(2.0 * var / n);
    CHECK(std::abs(sf.mean - st.mean) < 4.0 * se);
    CHECK(std::abs(st.mean - mean) < 4.0 * std::sqrt(var / n));
    CHECK(std::abs(st.var / var - 1.0) < 0.05);
  }
}

TEST_CASE("time-domain path on a random multipath channel") {
  const auto ch = make_channel(RandomTaps{8, {0.4, 0.3, 0.2, 0.1}}, 17);
  const auto g = ch.gain_powers();
  const std::size_t n = 20000;
  const auto t = simulate_energies(ch, OccupancyVector(8, true), kNoise, n, 9, {1, SimulationPath::kTimeDomain});
  for (std::size_t k = 0; k < 8; ++k) {
    const double mean = 100.0 * (1.0 + g[k]), var = 200.0 * (1.0 + 2.0 * g[k]);
    CHECK(std::abs(column_stats(t, k).mean - mean) < 4.0 * std::sqrt(var / n));
  }
}

TEST_CASE("bands are uncorrelated") {
  OccupancyVector occ = {true, false, true, true, false, true, false, true};
  const auto batch = simulate_energies(table_channel(), occ, kNoise, 100000, 10);
  for (std::size_t i = 0; i < 8; ++i) {
    for (std::size_t j = i + 1; j < 8; ++j) CHECK(std::abs(correlation(batch, i, j)) < 0.02);
  }
}

}  // TEST_SUITE
