// Command-line front end: optimize, sweep, validate, simulate.
//
// Exit codes: 0 optimal, 1 not certified / unexpected failure, 2 infeasible,
// 3 validation error, 4 I/O or parse error.

#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "mjd/experiments.hpp"
#include "mjd/scenario.hpp"

namespace {

enum ExitCode : int {
  kOk = 0,
  kNotCertified = 1,
  kInfeasible = 2,
  kValidation = 3,
  kIoError = 4,
};

bool use_color() {
  return std::getenv("NO_COLOR") == nullptr && isatty(fileno(stdout)) != 0;
}

std::string paint(const std::string& text, const char* code) {
  return use_color() ? std::string("\033[") + code + "m" + text + "\033[0m" : text;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw mjd::ParseError("cannot open output file " + path);
  }
  return out;
}

int status_exit(mjd::SolveStatus s) {
  switch (s) {
    case mjd::SolveStatus::kOptimal:
      return kOk;
    case mjd::SolveStatus::kInfeasible:
      return kInfeasible;
    case mjd::SolveStatus::kMaxIterations:
      return kNotCertified;
  }
  return kNotCertified;
}

struct OptimizeArgs {
  std::string scenario;
  std::string problem = "p1";
  std::optional<double> epsilon;
  std::optional<double> delta;
  std::string out;
  std::string table;
};

int run_optimize(const OptimizeArgs& a) {
  mjd::Scenario sc = mjd::load_scenario(a.scenario);
  const mjd::Problem problem = a.problem == "p3" ? mjd::Problem::kP3 : mjd::Problem::kP2;
  if (a.epsilon) sc.spec = mjd::with_sweep_value(sc.spec, mjd::SweepParameter::kEpsilon, *a.epsilon);
  if (a.delta) sc.spec = mjd::with_sweep_value(sc.spec, mjd::SweepParameter::kDelta, *a.delta);
  mjd::validate(sc.spec);

  const mjd::Solution s = mjd::solve(sc.spec, problem, sc.solver);
  if (!a.out.empty()) {
    auto out = open_output(a.out);
    out << mjd::solution_to_json(s).dump(2) << '\n';
  }
  if (!a.table.empty()) {
    auto out = open_output(a.table);
    mjd::write_solution_table(out, sc.spec, s);
  }
  std::cout << "problem " << (problem == mjd::Problem::kP2 ? "p1" : "p3") << "  status "
            << paint(std::string(mjd::to_string(s.status)), s.status == mjd::SolveStatus::kOptimal ? "32" : "31")
            << '\n';
  if (!s.message.empty()) std::cout << "note " << s.message << '\n';
  if (s.status != mjd::SolveStatus::kInfeasible) {
    std::cout << "objective " << mjd::format_number(s.objective) << "  throughput "
              << mjd::format_number(s.throughput) << "  interference " << mjd::format_number(s.interference)
              << "  kkt " << mjd::format_number(s.kkt_residual) << '\n';
    mjd::write_solution_table(std::cout, sc.spec, s);
  }
  return status_exit(s.status);
}

struct SweepArgs {
  std::string scenario;
  std::string param = "epsilon";
  std::optional<double> from;
  std::optional<double> to;
  std::size_t steps = 25;
  std::string out;
  std::string plot;
};

int run_sweep(const SweepArgs& a) {
  const mjd::Scenario sc = mjd::load_scenario(a.scenario);
  const auto parameter = a.param == "delta" ? mjd::SweepParameter::kDelta : mjd::SweepParameter::kEpsilon;
  const auto range = mjd::default_sweep_range(sc.spec, parameter);
  const auto values = mjd::linear_grid(a.from.value_or(range.first), a.to.value_or(range.second), a.steps);
  const mjd::SweepResult result = mjd::run_sweep(sc.spec, parameter, values, sc.solver);
  {
    auto out = open_output(a.out);
    mjd::write_sweep_csv(out, result);
  }
  if (!a.plot.empty()) {
    auto out = open_output(a.plot);
    mjd::write_sweep_plot(out, result);
  }
  std::size_t feasible = 0;
  for (const auto& row : result.rows) {
    feasible += row.joint.status != mjd::SolveStatus::kInfeasible ? 1 : 0;
  }
  std::cout << "sweep " << a.param << ": " << result.rows.size() << " points, " << feasible << " feasible\n";
  if (feasible == 0) {
    std::cerr << "error: no feasible point in the sweep range\n";
    return kInfeasible;
  }
  return kOk;
}

struct ValidateArgs {
  std::string scenario;
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string gamma_file;
  std::string out;
};

int run_validate(const ValidateArgs& a) {
  const mjd::Scenario sc = mjd::load_scenario(a.scenario);
  mjd::ThresholdVector gamma;
  if (!a.gamma_file.empty()) {
    std::ifstream in(a.gamma_file);
    if (!in) throw mjd::ParseError("cannot open threshold file " + a.gamma_file);
    std::ostringstream buf;
    buf << in.rdbuf();
    gamma = mjd::parse_threshold_vector(buf.str());
  } else {
    const mjd::Solution s = mjd::solve_p2(sc.spec, sc.solver);
    if (s.status == mjd::SolveStatus::kInfeasible) {
      std::cerr << "error: " << s.message << '\n';
      return kInfeasible;
    }
    gamma = s.gamma;
  }
  const std::size_t trials = a.trials.value_or(sc.simulation.trials);
  const std::uint64_t seed = a.seed.value_or(sc.simulation.seed);
  const unsigned threads = a.threads.value_or(sc.simulation.threads);
  const mjd::ValidationReport report = mjd::validate_thresholds(sc.spec, gamma, trials, seed, threads);
  std::ostringstream csv;
  mjd::write_validation_csv(csv, report);
  if (!a.out.empty()) {
    auto out = open_output(a.out);
    out << csv.str();
  }
  std::cout << csv.str();
  std::cout << "trials " << trials << "  seed " << seed << "  max |analytic - empirical| "
            << mjd::format_number(report.max_abs_error()) << "  flagged "
            << paint(std::to_string(report.flag_count()), report.flag_count() ? "33" : "32") << " of "
            << report.bands.size() << " (tolerance " << mjd::format_number(report.tolerance) << ")\n";
  if (sc.spec.noise.samples_m < 30) {
    std::cout << "note: M = " << sc.spec.noise.samples_m
              << " is small; the Gaussian approximation of the energy statistic is coarse\n";
  }
  return kOk;
}

struct SimulateArgs {
  std::string scenario;
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string path = "frequency";
  std::string out;
};

int run_simulate(const SimulateArgs& a) {
  const mjd::Scenario sc = mjd::load_scenario(a.scenario);
  std::vector<double> gains;
  for (const auto& s : sc.spec.subchannels) gains.push_back(s.gain_power);
  const std::uint64_t seed = a.seed.value_or(sc.simulation.seed);
  const auto channel = mjd::make_channel(mjd::ExplicitGains{gains}, seed);
  mjd::OccupancyVector occupancy = sc.simulation.occupancy;
  if (occupancy.empty()) occupancy.assign(sc.spec.bands(), true);
  const mjd::SimulationOptions opts{a.threads.value_or(sc.simulation.threads),
                                    a.path == "time" ? mjd::SimulationPath::kTimeDomain
                                                     : mjd::SimulationPath::kFrequencyDomain};
  const auto batch = mjd::simulate_energies(channel, occupancy, sc.spec.noise,
                                            a.trials.value_or(sc.simulation.trials), seed, opts);
  auto out = open_output(a.out);
  mjd::write_energies_csv(out, batch);
  std::cout << "wrote " << batch.trials << " trials x " << batch.bands << " bands to " << a.out << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiband joint detection: threshold optimization and Monte Carlo validation"};
  app.require_subcommand(1);

  OptimizeArgs opt;
  auto* optimize = app.add_subcommand("optimize", "Solve P1 (throughput) or P3 (interference) for a scenario");
  optimize->add_option("--scenario", opt.scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  optimize->add_option("--problem", opt.problem, "p1 or p3")->check(CLI::IsMember({"p1", "p3"}));
  auto* eps = optimize->add_option("--epsilon", opt.epsilon, "Override every group budget");
  auto* del = optimize->add_option("--delta", opt.delta, "Override the throughput floor (kbps)");
  eps->excludes(del);
  optimize->add_option("--out", opt.out, "Solution JSON output");
  optimize->add_option("--table", opt.table, "Per-band CSV table output");

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep", "Sweep epsilon (P1) or delta (P3) against the uniform baseline");
  sweep->add_option("--scenario", sw.scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--param", sw.param, "epsilon or delta")->check(CLI::IsMember({"epsilon", "delta"}));
  sweep->add_option("--from", sw.from, "First sweep value");
  sweep->add_option("--to", sw.to, "Last sweep value");
  sweep->add_option("--steps", sw.steps, "Number of sweep points")->capture_default_str();
  sweep->add_option("--out", sw.out, "CSV output")->required();
  sweep->add_option("--plot", sw.plot, "Whitespace-delimited plot data");

  ValidateArgs va;
  auto* validate = app.add_subcommand("validate", "Monte Carlo check of analytic Pf / Pd at given thresholds");
  validate->add_option("--scenario", va.scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  validate->add_option("--trials", va.trials, "Monte Carlo trials");
  validate->add_option("--seed", va.seed, "Master seed");
  validate->add_option("--threads", va.threads, "Worker threads (output does not depend on it)");
  validate->add_option("--gamma-file", va.gamma_file, "Thresholds: JSON array or solution JSON")
      ->check(CLI::ExistingFile);
  validate->add_option("--out", va.out, "CSV output");

  SimulateArgs si;
  auto* simulate = app.add_subcommand("simulate", "Write per-trial energy statistics");
  simulate->add_option("--scenario", si.scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("--trials", si.trials, "Monte Carlo trials");
  simulate->add_option("--seed", si.seed, "Master seed");
  simulate->add_option("--threads", si.threads, "Worker threads (output does not depend on it)");
  simulate->add_option("--path", si.path, "frequency or time")->check(CLI::IsMember({"frequency", "time"}));
  simulate->add_option("--out", si.out, "CSV output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kIoError;
  }

  try {
    if (*optimize) return run_optimize(opt);
    if (*sweep) return run_sweep(sw);
    if (*validate) return run_validate(va);
    if (*simulate) return run_simulate(si);
  } catch (const mjd::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const mjd::InfeasibleSubchannel& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInfeasible;
  } catch (const mjd::DomainError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNotCertified;
  }
  return kNotCertified;
}
