// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the number
// of failed criteria (capped at 1).

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "mjd/experiments.hpp"
#include "mjd/optimizer.hpp"
#include "mjd/signal_sim.hpp"

using namespace mjd;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& title, const std::string& detail) {
  std::printf("AC%d %s  %s  [%s]\n", id, pass ? "PASS" : "FAIL", title.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += pass ? 0 : 1;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ThresholdVector corner(const ProblemSpec& spec, bool upper) {
  ThresholdVector g;
  for (const auto& b : all_threshold_bounds(spec)) g.gamma.push_back(upper ? b.gamma_max : b.gamma_min);
  return g;
}

double box_violation(const ProblemSpec& spec, const ThresholdVector& g) {
  double worst = 0.0;
  const auto bounds = all_threshold_bounds(spec);
  for (std::size_t k = 0; k < spec.bands(); ++k) {
    worst = std::max({worst, bounds[k].gamma_min - g[k], g[k] - bounds[k].gamma_max});
  }
  return worst;
}

double constraint_violation(const ProblemSpec& spec, Problem p, const Solution& s) {
  double worst = box_violation(spec, s.gamma);
  if (p == Problem::kP2) {
    const auto gi = group_interference(spec, s.gamma);
    for (std::size_t j = 0; j < gi.size(); ++j) worst = std::max(worst, gi[j] - spec.groups[j].epsilon);
  } else {
    worst = std::max(worst, spec.delta - throughput(spec, s.gamma));
  }
  return worst;
}

void ac1() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto spec = fixture::table1();
  const std::size_t trials = 100000;
  const std::size_t k = spec.bands();
  const auto channel = make_channel(ExplicitGains{fixture::kGain}, 0);
  const auto vacant = simulate_energies(channel, OccupancyVector(k, false), spec.noise, trials, 101);
  const auto occupied = simulate_energies(channel, OccupancyVector(k, true), spec.noise, trials, 202);
  const auto bounds = all_threshold_bounds(spec);

  double worst_pf = 0.0, worst_pd = 0.0;
  int over_pf = 0, over_pd = 0;
  for (int i = 0; i < 20; ++i) {
    std::vector<double> gamma(k);
    for (std::size_t b = 0; b < k; ++b) {
      gamma[b] = bounds[b].gamma_min + (bounds[b].gamma_max - bounds[b].gamma_min) * i / 19.0;
    }
    const auto pf = empirical_rates(vacant, gamma);
    const auto pd = empirical_rates(occupied, gamma);
    for (std::size_t b = 0; b < k; ++b) {
      const double ef = std::abs(pf[b].rate - prob_false_alarm(gamma[b], spec.noise));
      const double ed = std::abs(pd[b].rate - prob_detection(gamma[b], spec.subchannels[b], spec.noise));
      worst_pf = std::max(worst_pf, ef);
      worst_pd = std::max(worst_pd, ed);
      over_pf += ef > 0.015;
      over_pd += ed > 0.015;
    }
  }
  const double secs = seconds_since(t0);
  const bool pass = worst_pf <= 0.015 && worst_pd <= 0.015 && secs < 60.0;
  // The exact vacant statistic is sigma^2 chi^2_M; its tail at the noise mean
  // is the floor on any simulation-side improvement.
  const double clt_gap = 0.5 - ref::chi2_upper_even(100.0, 100);
  report(1, pass, "analytic vs empirical Pf/Pd, 8 bands x 20 thresholds, 1e5 trials, tol 0.015",
         "max|dPf| " + fmt("%.4f", worst_pf) + " (" + std::to_string(over_pf) + "/160 over)" + ", max|dPd| " +
             fmt("%.4f", worst_pd) + " (" + std::to_string(over_pd) + "/160 over)" + ", exact chi2 gap at gamma_min " +
             fmt("%.4f", clt_gap) + ", " + fmt("%.1f", secs) + " s");
}

void ac2() {
  const auto spec = fixture::table1();
  double worst = INFINITY;
  for (const auto& sub : spec.subchannels) {
    const auto mo = statistic_moments(sub, spec.noise);
    const double s0 = std::sqrt(mo.var_h0), s1 = std::sqrt(mo.var_h1);
    auto pf = [&](double g) { return static_cast<double>(prob_false_alarm(g, spec.noise)); };
    auto pm = [&](double g) { return static_cast<double>(prob_miss(g, sub, spec.noise)); };
    for (int i = 0; i < 1000; ++i) {
      const double gf = mo.mean_h0 + 6.0 * s0 * i / 999.0;
      const double gm = mo.mean_h1 - 6.0 * s1 * i / 999.0;
      const double hf = 1e-2 * s0, hm = 1e-2 * s1;
      worst = std::min(worst, (pf(gf + hf) - 2.0 * pf(gf) + pf(gf - hf)) / (hf * hf));
      worst = std::min(worst, (pm(gm + hm) - 2.0 * pm(gm) + pm(gm - hm)) / (hm * hm));
    }
  }
  report(2, worst >= -1e-9, "finite-difference second derivative of Pf (Pf<=1/2) and Pm (Pm<=1/2) >= -1e-9",
         "min " + fmt("%.3e", worst) + " over 8 bands x 2 x 1000 points");
}

void ac3() {
  const auto spec = fixture::table1();
  double worst = 0.0;
  for (const auto& base : spec.subchannels) {
    for (int i = 1; i <= 10; ++i) {
      for (int j = 1; j <= 10; ++j) {
        SubchannelParams sub = base;
        sub.alpha = 0.05 * i;
        sub.beta = 0.05 * j;
        ThresholdBounds b;
        try {
          b = threshold_bounds(sub, spec.noise);
        } catch (const InfeasibleSubchannel& e) {
          b = e.bounds();
        }
        worst = std::max(worst, std::abs(prob_false_alarm(b.gamma_min, spec.noise) - sub.beta));
        worst = std::max(worst, std::abs(prob_miss(b.gamma_max, sub, spec.noise) - sub.alpha));
      }
    }
  }
  report(3, worst <= 1e-9, "Pf(gamma_min) = beta and Pm(gamma_max) = alpha within 1e-9 on a 10x10 grid",
         "max error " + fmt("%.3e", worst));
}

void ac4() {
  const auto spec = fixture::table1();
  bool pass = true;
  std::string detail;
  for (Problem p : {Problem::kP2, Problem::kP3}) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto s = solve(spec, p);
    const double secs = seconds_since(t0);
    const auto o = oracle_solve(spec, p);
    const double rel = fixture::rel_diff(s.objective, o.objective);
    pass = pass && s.status == SolveStatus::kOptimal && rel <= 1e-6 && s.kkt_residual <= 1e-6 && secs < 1.0;
    detail += std::string(p == Problem::kP2 ? "P1 eps=1.25: " : "; P3 delta=3224: ") + "obj " +
              fmt("%.9g", s.objective) + " oracle " + fmt("%.9g", o.objective) + " rel " + fmt("%.1e", rel) +
              " kkt " + fmt("%.1e", s.kkt_residual) + " " + fmt("%.3f", secs) + " s";
  }
  report(4, pass, "solver matches oracle within 1e-6, KKT <= 1e-6, < 1 s", detail);
}

struct SweepOutcome {
  SweepResult eps;
  SweepResult delta;
};

SweepOutcome sweeps() {
  const auto spec = fixture::table1();
  SweepOutcome out;
  out.eps = run_sweep(spec, SweepParameter::kEpsilon, linear_grid(0.5, 2.0, 16));
  const auto [lo, hi] = default_sweep_range(spec, SweepParameter::kDelta);
  out.delta = run_sweep(spec, SweepParameter::kDelta, linear_grid(lo, hi, 16));
  return out;
}

void ac5(const SweepOutcome& sw) {
  bool dominated = true;
  int compared = 0, strict = 0, skipped = 0;
  for (const auto& row : sw.eps.rows) {
    if (row.joint.status != SolveStatus::kOptimal) {
      ++skipped;
      dominated = dominated && row.uniform.status != SolveStatus::kOptimal;
      continue;
    }
    ++compared;
    const double base = row.uniform.status == SolveStatus::kOptimal ? row.uniform.throughput : -INFINITY;
    dominated = dominated && row.joint.throughput >= base - 1e-8;
    strict += row.joint.throughput > base + 1e-6 * std::abs(row.joint.throughput);
  }
  for (const auto& row : sw.delta.rows) {
    if (row.joint.status != SolveStatus::kOptimal) {
      ++skipped;
      dominated = dominated && row.uniform.status != SolveStatus::kOptimal;
      continue;
    }
    ++compared;
    const double base = row.uniform.status == SolveStatus::kOptimal ? row.uniform.interference : INFINITY;
    dominated = dominated && row.joint.interference <= base + 1e-8;
    strict += row.joint.interference < base - 1e-6 * std::abs(row.joint.interference);
  }
  const double share = compared ? static_cast<double>(strict) / compared : 0.0;
  report(5, dominated && share >= 0.8, "joint >= uniform everywhere, strict on >= 80% of sweep points",
         std::to_string(strict) + "/" + std::to_string(compared) + " strict (" + fmt("%.0f", 100.0 * share) + "%), " +
             std::to_string(skipped) + " points infeasible for both schemes");
}

void ac6(const SweepOutcome& sw) {
  double worst = 0.0;
  double prev = -INFINITY;
  for (const auto& row : sw.eps.rows) {
    if (row.joint.status != SolveStatus::kOptimal) continue;
    worst = std::max(worst, prev - row.joint.objective);
    prev = row.joint.objective;
  }
  prev = -INFINITY;
  for (const auto& row : sw.delta.rows) {
    if (row.joint.status != SolveStatus::kOptimal) continue;
    worst = std::max(worst, prev - row.joint.objective);
    prev = row.joint.objective;
  }
  report(6, worst <= 1e-8, "R*(eps) and interference*(delta) nondecreasing (tol 1e-8)",
         "largest decrease " + fmt("%.3e", worst));
}

ProblemSpec random_spec(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ProblemSpec spec;
  spec.noise.sigma_v2 = 0.5 + 1.5 * u(rng);
  spec.noise.samples_m = 20 + static_cast<int>(180 * u(rng));
  const std::size_t k = 1 + static_cast<std::size_t>(8 * u(rng)) % 8;
  while (spec.subchannels.size() < k) {
    SubchannelParams s{0.05 + 0.95 * u(rng), 10.0 + 990.0 * u(rng), 0.1 + 9.9 * u(rng), 0.01 + 0.49 * u(rng),
                       0.01 + 0.49 * u(rng)};
    try {
      const auto b = threshold_bounds(s, spec.noise);
      if (b.gamma_max - b.gamma_min > 1e-3) spec.subchannels.push_back(s);
    } catch (const InfeasibleSubchannel&) {
    }
  }
  PrimaryUserGroup g;
  for (std::size_t i = 0; i < k; ++i) g.members.push_back(i);
  const auto lo = corner(spec, false), hi = corner(spec, true);
  double least = 0.0, most = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    least += spec.subchannels[i].cost * prob_miss(lo[i], spec.subchannels[i], spec.noise);
    most += spec.subchannels[i].cost * spec.subchannels[i].alpha;
  }
  g.epsilon = least + (most - least) * (0.02 + 0.96 * u(rng));
  spec.groups = {g};
  spec.delta = throughput(spec, lo) + (throughput(spec, hi) - throughput(spec, lo)) * (0.02 + 0.96 * u(rng));
  return spec;
}

void ac7() {
  std::mt19937_64 rng(20240601);
  double worst_rel = 0.0, worst_violation = 0.0;
  int uncertified = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto spec = random_spec(rng);
    for (Problem p : {Problem::kP2, Problem::kP3}) {
      const auto s = solve(spec, p);
      const auto o = oracle_solve(spec, p);
      uncertified += s.status != SolveStatus::kOptimal;
      worst_rel = std::max(worst_rel, fixture::rel_diff(s.objective, o.objective));
      worst_violation = std::max({worst_violation, constraint_violation(spec, p, s), constraint_violation(spec, p, o)});
    }
  }
  report(7, worst_rel <= 1e-5 && worst_violation <= 1e-8 && uncertified == 0,
         "100 random specs (K<=8, J=1), P1 and P3: solver vs oracle within 1e-5, violations <= 1e-8",
         "max rel " + fmt("%.2e", worst_rel) + ", max violation " + fmt("%.2e", worst_violation) + ", " +
             std::to_string(uncertified) + " uncertified");
}

void ac8() {
  ProblemSpec one;
  one.noise = {1.0, 100};
  one.subchannels = {{0.5, 612, 1.91, 0.1, 0.5}};
  one.groups = {{{0}, 10.0}};
  const auto s1 = solve_p2(one);
  const double e1 = std::abs(s1.gamma[0] - all_threshold_bounds(one)[0].gamma_max);

  const auto spec = fixture::table1(1.25, 0.0);
  const auto s3 = solve_p3(spec);
  const auto lo = corner(spec, false);
  double e3 = 0.0;
  for (std::size_t k = 0; k < spec.bands(); ++k) e3 = std::max(e3, std::abs(s3.gamma[k] - lo[k]));
  report(8, e1 <= 1e-9 && e3 <= 1e-9 && s1.status == SolveStatus::kOptimal && s3.status == SolveStatus::kOptimal,
         "K=1 slack budget -> gamma_max; delta=0 -> gamma_min (1e-9)",
         "|gamma - gamma_max| " + fmt("%.1e", e1) + ", max |gamma - gamma_min| " + fmt("%.1e", e3));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run(const std::string& args, const fs::path& stdout_file) {
  const std::string cmd = "NO_COLOR=1 '" + std::string(MJD_CLI_PATH) + "' " + args + " >'" +
                          stdout_file.string() + "' 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

void ac9() {
  const fs::path dir = fs::temp_directory_path() / ("mjd-acceptance-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string scenario = std::string(MJD_DATA_DIR) + "/table1.json";
  bool ok = true;
  std::vector<std::string> sweep_out;
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path csv = dir / ("sweep" + std::to_string(rep) + ".csv");
    const fs::path plot = dir / ("sweep" + std::to_string(rep) + ".dat");
    ok = ok && run("sweep --scenario " + scenario + " --param epsilon --out " + csv.string() + " --plot " +
                       plot.string(), dir / "log.txt") == 0;
    ok = ok && run("sweep --scenario " + scenario + " --param delta --out " + (dir / "d.csv").string(),
                   dir / "log.txt") == 0;
    sweep_out.push_back(slurp(csv) + slurp(plot) + slurp(dir / "d.csv"));
  }
  std::vector<std::string> validate_out;
  for (unsigned threads : {1u, 4u, 1u}) {
    const fs::path csv = dir / ("validate" + std::to_string(threads) + ".csv");
    const fs::path log = dir / "validate.log";
    ok = ok && run("validate --scenario " + scenario + " --threads " + std::to_string(threads) + " --out " +
                       csv.string(), log) == 0;
    validate_out.push_back(slurp(csv) + slurp(log));
  }
  const bool same_sweep = sweep_out[0] == sweep_out[1] && !sweep_out[0].empty();
  const bool same_validate =
      validate_out[0] == validate_out[1] && validate_out[0] == validate_out[2] && !validate_out[0].empty();
  fs::remove_all(dir);
  report(9, ok && same_sweep && same_validate, "sweep and validate outputs byte-identical across runs and thread counts",
         std::string("sweep ") + (same_sweep ? "identical" : "DIFFERENT") + ", validate (threads 1/4/1) " +
             (same_validate ? "identical" : "DIFFERENT") + (ok ? "" : ", a command failed"));
}

}  // namespace

int main() {
  ac1();
  ac2();
  ac3();
  ac4();
  const auto sw = sweeps();
  ac5(sw);
  ac6(sw);
  ac7();
  ac8();
  ac9();
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
