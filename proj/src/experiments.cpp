#include "mjd/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "mjd/rng.hpp"

namespace mjd {

std::string format_number(double v) {
  if (!std::isfinite(v)) {
    return "nan";
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

Problem problem_for(SweepParameter parameter) noexcept {
  return parameter == SweepParameter::kEpsilon ? Problem::kP2 : Problem::kP3;
}

std::vector<double> linear_grid(double from, double to, std::size_t steps) {
  if (steps == 0) {
    throw DomainError("sweep needs at least one step");
  }
  if (!std::isfinite(from) || !std::isfinite(to) || !(to > from)) {
    throw DomainError("sweep range must satisfy from < to");
  }
  std::vector<double> out;
  out.reserve(steps);
  if (steps == 1) {
    out.push_back(from);
    return out;
  }
  for (std::size_t i = 0; i < steps; ++i) {
    const double w = static_cast<double>(i) / static_cast<double>(steps - 1);
    out.push_back(i + 1 == steps ? to : from + w * (to - from));
  }
  return out;
}

std::pair<double, double> default_sweep_range(const ProblemSpec& spec, SweepParameter parameter) {
  validate(spec);
  const auto box = all_threshold_bounds(spec);
  ThresholdVector lo;
  ThresholdVector hi;
  for (const ThresholdBounds& b : box) {
    lo.gamma.push_back(b.gamma_min);
    hi.gamma.push_back(b.gamma_max);
  }
  if (parameter == SweepParameter::kEpsilon) {
    const auto least = group_interference(spec, lo);
    const auto most = group_interference(spec, hi);
    return {*std::max_element(least.begin(), least.end()), *std::max_element(most.begin(), most.end())};
  }
  return {throughput(spec, lo), throughput(spec, hi)};
}

ProblemSpec with_sweep_value(ProblemSpec spec, SweepParameter parameter, double value) {
  if (parameter == SweepParameter::kEpsilon) {
    for (PrimaryUserGroup& g : spec.groups) {
      g.epsilon = value;
    }
  } else {
    spec.delta = value;
  }
  return spec;
}

SweepResult run_sweep(const ProblemSpec& spec, SweepParameter parameter, std::span<const double> values,
                      const SolverOptions& options) {
  SweepResult result;
  result.parameter = parameter;
  result.bands = spec.bands();
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const Problem problem = problem_for(parameter);
  for (double v : sorted) {
    const ProblemSpec point = with_sweep_value(spec, parameter, v);
    SweepRow row;
    row.value = v;
    row.joint = solve(point, problem, options);
    row.uniform = solve_uniform_baseline(point, problem, options);
    result.rows.push_back(std::move(row));
  }
  return result;
}

namespace {

double reported_objective(const Solution& s) {
  return s.status == SolveStatus::kInfeasible ? std::nan("") : s.objective;
}

}  // namespace

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  const std::size_t k = result.bands;
  out << "sweep_value,objective_joint,objective_uniform";
  for (const char* prefix : {"gamma_", "pf_", "pm_"}) {
    for (std::size_t i = 0; i < k; ++i) out << ',' << prefix << i;
  }
  out << ",status\n";
  for (const SweepRow& row : result.rows) {
    out << format_number(row.value) << ',' << format_number(reported_objective(row.joint)) << ','
        << format_number(reported_objective(row.uniform));
    const bool have = row.joint.gamma.size() == k;
    for (const std::vector<double>* column : {&row.joint.gamma.gamma, &row.joint.pf, &row.joint.pm}) {
      for (std::size_t i = 0; i < k; ++i) {
        out << ',' << (have ? format_number((*column)[i]) : std::string("nan"));
      }
    }
    out << ',' << to_string(row.joint.status) << '\n';
  }
}

void write_sweep_plot(std::ostream& out, const SweepResult& result) {
  out << "# sweep_value objective_joint objective_uniform\n";
  for (const SweepRow& row : result.rows) {
    out << format_number(row.value) << ' ' << format_number(reported_objective(row.joint)) << ' '
        << format_number(reported_objective(row.uniform)) << '\n';
  }
}

std::size_t ValidationReport::flag_count() const {
  return static_cast<std::size_t>(
      std::count_if(bands.begin(), bands.end(), [](const BandValidation& b) { return b.flagged; }));
}

double ValidationReport::max_abs_error() const {
  double worst = 0.0;
  for (const BandValidation& b : bands) {
    worst = std::max({worst, std::abs(b.pf_empirical - b.pf_analytic), std::abs(b.pd_empirical - b.pd_analytic)});
  }
  return worst;
}

ValidationReport validate_thresholds(const ProblemSpec& spec, const ThresholdVector& gamma, std::size_t trials,
                                     std::uint64_t seed, unsigned threads, double tolerance) {
  validate(spec);
  const std::size_t k = spec.bands();
  if (gamma.size() != k) {
    throw DomainError("threshold vector length does not match the number of subchannels");
  }
  std::vector<double> gains;
  for (const SubchannelParams& s : spec.subchannels) gains.push_back(s.gain_power);
  const ChannelRealization channel = make_channel(ExplicitGains{gains}, seed);
  const SimulationOptions opts{threads, SimulationPath::kFrequencyDomain};
  const TrialBatch vacant =
      simulate_energies(channel, OccupancyVector(k, false), spec.noise, trials, substream_seed(seed, 0), opts);
  const TrialBatch occupied =
      simulate_energies(channel, OccupancyVector(k, true), spec.noise, trials, substream_seed(seed, 1), opts);
  const auto pf = empirical_rates(vacant, gamma.gamma);
  const auto pd = empirical_rates(occupied, gamma.gamma);

  ValidationReport report;
  report.trials = trials;
  report.seed = seed;
  report.tolerance = tolerance;
  for (std::size_t i = 0; i < k; ++i) {
    BandValidation b;
    b.gamma = gamma[i];
    b.pf_analytic = prob_false_alarm(gamma[i], spec.noise);
    b.pd_analytic = prob_detection(gamma[i], spec.subchannels[i], spec.noise);
    b.pf_empirical = pf[i].rate;
    b.pf_std_error = pf[i].std_error;
    b.pd_empirical = pd[i].rate;
    b.pd_std_error = pd[i].std_error;
    b.flagged = std::abs(b.pf_empirical - b.pf_analytic) > tolerance ||
                std::abs(b.pd_empirical - b.pd_analytic) > tolerance;
    report.bands.push_back(b);
  }
  return report;
}

void write_validation_csv(std::ostream& out, const ValidationReport& report) {
  out << "k,gamma,pf_analytic,pf_empirical,pf_ci3,pd_analytic,pd_empirical,pd_ci3,flag\n";
  for (std::size_t i = 0; i < report.bands.size(); ++i) {
    const BandValidation& b = report.bands[i];
    out << i << ',' << format_number(b.gamma) << ',' << format_number(b.pf_analytic) << ','
        << format_number(b.pf_empirical) << ',' << format_number(3.0 * b.pf_std_error) << ','
        << format_number(b.pd_analytic) << ',' << format_number(b.pd_empirical) << ','
        << format_number(3.0 * b.pd_std_error) << ',' << (b.flagged ? "FLAG" : "ok") << '\n';
  }
}

void write_energies_csv(std::ostream& out, const TrialBatch& batch) {
  out << "trial";
  for (std::size_t k = 0; k < batch.bands; ++k) out << ",Y_" << k;
  out << '\n';
  for (std::size_t t = 0; t < batch.trials; ++t) {
    out << t;
    for (std::size_t k = 0; k < batch.bands; ++k) out << ',' << format_number(batch.at(t, k));
    out << '\n';
  }
}

void write_solution_table(std::ostream& out, const ProblemSpec& spec, const Solution& solution) {
  out << "k,gamma,gamma_min,gamma_max,pf,pm\n";
  if (solution.gamma.size() != spec.bands()) {
    return;
  }
  const auto box = all_threshold_bounds(spec);
  for (std::size_t i = 0; i < spec.bands(); ++i) {
    out << i << ',' << format_number(solution.gamma[i]) << ',' << format_number(box[i].gamma_min) << ','
        << format_number(box[i].gamma_max) << ',' << format_number(solution.pf[i]) << ','
        << format_number(solution.pm[i]) << '\n';
  }
}

}  // namespace mjd
