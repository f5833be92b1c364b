#pragma once

// Parameter sweeps, Monte Carlo validation and their flat-file writers.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mjd/optimizer.hpp"
#include "mjd/signal_sim.hpp"

namespace mjd {

/// Fixed-format number for CSV output ("%.12g"; "nan" for non-finite values).
[[nodiscard]] std::string format_number(double v);

enum class SweepParameter {
  kEpsilon,  ///< every group budget set to the sweep value, P2
  kDelta,    ///< throughput floor, P3
};

[[nodiscard]] Problem problem_for(SweepParameter parameter) noexcept;

/// `steps` linearly spaced values from `from` to `to` inclusive.
/// Throws DomainError on an empty or reversed range or steps == 0.
[[nodiscard]] std::vector<double> linear_grid(double from, double to, std::size_t steps);

/// Range that brackets the whole feasible region: epsilon from the minimum
/// achievable interference to sum c alpha; delta from R(gamma_min) to R(gamma_max).
[[nodiscard]] std::pair<double, double> default_sweep_range(const ProblemSpec& spec,
                                                            SweepParameter parameter);

struct SweepRow {
  double value = 0.0;
  Solution joint;
  Solution uniform;
};

struct SweepResult {
  SweepParameter parameter = SweepParameter::kEpsilon;
  std::size_t bands = 0;
  std::vector<SweepRow> rows;
};

[[nodiscard]] ProblemSpec with_sweep_value(ProblemSpec spec, SweepParameter parameter, double value);

[[nodiscard]] SweepResult run_sweep(const ProblemSpec& spec, SweepParameter parameter,
                                    std::span<const double> values, const SolverOptions& options = {});

/// Header: sweep_value,objective_joint,objective_uniform,gamma_0..,pf_0..,pm_0..,status
void write_sweep_csv(std::ostream& out, const SweepResult& result);
/// Whitespace-delimited columns: sweep_value objective_joint objective_uniform.
void write_sweep_plot(std::ostream& out, const SweepResult& result);

struct BandValidation {
  double gamma = 0.0;
  double pf_analytic = 0.0;
  double pf_empirical = 0.0;
  double pf_std_error = 0.0;
  double pd_analytic = 0.0;
  double pd_empirical = 0.0;
  double pd_std_error = 0.0;
  bool flagged = false;
};

struct ValidationReport {
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  double tolerance = 0.015;
  std::vector<BandValidation> bands;

  [[nodiscard]] std::size_t flag_count() const;
  [[nodiscard]] double max_abs_error() const;
};

/// Runs one all-vacant and one all-occupied batch and compares the empirical
/// exceedance rates at `gamma` with the analytic Pf / Pd.
[[nodiscard]] ValidationReport validate_thresholds(const ProblemSpec& spec, const ThresholdVector& gamma,
                                                   std::size_t trials, std::uint64_t seed,
                                                   unsigned threads = 1, double tolerance = 0.015);

void write_validation_csv(std::ostream& out, const ValidationReport& report);

/// Header: trial,Y_0..Y_{K-1}
void write_energies_csv(std::ostream& out, const TrialBatch& batch);

/// Per-band table: k,gamma,gamma_min,gamma_max,pf,pm
void write_solution_table(std::ostream& out, const ProblemSpec& spec, const Solution& solution);

}  // namespace mjd
