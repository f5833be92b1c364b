#pragma once

// Multiband threshold optimization.
//
//   P2 (throughput form):   min  sum_k r_k Pf_k(g_k)
//                           s.t. sum_{i in S_j} c_i Pm_i(g_i) <= eps_j   for every group j
//                                gamma_min,k <= g_k <= gamma_max,k
//   P3 (interference form): min  sum_k c_k Pm_k(g_k)
//                           s.t. sum_k r_k (1 - Pf_k(g_k)) >= delta,  same box
//
// With 0 < alpha, beta <= 1/2 every Pf_k and Pm_k is convex on its box, so
// both programs are convex and a KKT point is the global optimum.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mjd/detection.hpp"

namespace mjd {

struct PrimaryUserGroup {
  std::vector<std::size_t> members;
  double epsilon = 0.0;  ///< aggregate interference budget
};

struct ProblemSpec {
  std::vector<SubchannelParams> subchannels;
  NoiseModel noise;
  std::vector<PrimaryUserGroup> groups;
  double delta = 0.0;  ///< throughput floor for P3, kbps

  [[nodiscard]] std::size_t bands() const noexcept { return subchannels.size(); }
};

/// Throws DomainError naming the offending field and index.
void validate(const ProblemSpec& spec);

enum class Problem {
  kP2,  ///< maximize throughput under interference budgets (P1 via its P2 form)
  kP3,  ///< minimize interference under a throughput floor
};

[[nodiscard]] std::string_view to_string(Problem problem) noexcept;

struct ThresholdVector {
  std::vector<double> gamma;

  [[nodiscard]] std::size_t size() const noexcept { return gamma.size(); }
  double& operator[](std::size_t k) { return gamma[k]; }
  double operator[](std::size_t k) const { return gamma[k]; }
};

enum class SolveStatus { kOptimal, kInfeasible, kMaxIterations };

[[nodiscard]] std::string_view to_string(SolveStatus status) noexcept;

struct SolverOptions {
  double feasibility_tol = 1e-8;
  double kkt_tol = 1e-6;
  int max_iterations = 200;  ///< Newton steps per solve, all barrier stages together
  double mu_initial = 1.0;
  double mu_factor = 10.0;
  double gap_tol = 1e-9;
  double armijo = 1e-4;
  double backtrack = 0.5;
  bool polish = true;
};

struct Solution {
  Problem problem = Problem::kP2;
  SolveStatus status = SolveStatus::kInfeasible;
  ThresholdVector gamma;
  std::vector<double> pf;
  std::vector<double> pm;
  /// Throughput R(gamma) for P2, interference c^T Pm for P3.
  double objective = 0.0;
  double throughput = 0.0;
  double interference = 0.0;  ///< c^T Pm over all subchannels
  std::vector<double> group_interference;
  /// P2: eps_j - sum_{S_j} c Pm per group. P3: R(gamma) - delta.
  std::vector<double> slacks;
  /// One multiplier per coupling constraint (groups for P2, the floor for P3).
  std::vector<double> multipliers;
  double kkt_residual = 0.0;
  int iterations = 0;
  std::string message;
};

struct FeasibilityReport {
  enum class Reason { kNone, kEmptyBox, kGroupBudget, kThroughputFloor };

  bool feasible = true;
  Reason reason = Reason::kNone;
  std::size_t index = 0;  ///< subchannel (empty box) or group index
  double value = 0.0;     ///< best achievable left-hand side
  double limit = 0.0;
  std::string message;
};

[[nodiscard]] std::vector<ThresholdBounds> all_threshold_bounds(const ProblemSpec& spec);

[[nodiscard]] double throughput(const ProblemSpec& spec, const ThresholdVector& gamma);
[[nodiscard]] double total_interference(const ProblemSpec& spec, const ThresholdVector& gamma);
[[nodiscard]] std::vector<double> group_interference(const ProblemSpec& spec,
                                                     const ThresholdVector& gamma);

[[nodiscard]] FeasibilityReport check_feasibility(const ProblemSpec& spec, Problem problem);

[[nodiscard]] Solution solve_p2(const ProblemSpec& spec, const SolverOptions& options = {});
[[nodiscard]] Solution solve_p3(const ProblemSpec& spec, const SolverOptions& options = {});
[[nodiscard]] Solution solve(const ProblemSpec& spec, Problem problem,
                             const SolverOptions& options = {});

/// Best single threshold applied to every subchannel.
[[nodiscard]] Solution solve_uniform_baseline(const ProblemSpec& spec, Problem problem,
                                              const SolverOptions& options = {});

/// Independent reference solver. With one coupling constraint (P3, or P2 with
/// J = 1) it bisects the Lagrange multiplier over per-band scalar minimizations;
/// for P2 with J > 1 it nests one such bisection per group, limited to K <= 4
/// and J <= 3.
[[nodiscard]] Solution oracle_solve(const ProblemSpec& spec, Problem problem,
                                    const SolverOptions& options = {});

/// Max-norm of stationarity, primal feasibility, dual feasibility and
/// complementary slackness. Box multipliers are implied: for each coordinate
/// the best admissible one is used.
[[nodiscard]] double kkt_residual(const ProblemSpec& spec, Problem problem,
                                  const ThresholdVector& gamma,
                                  const std::vector<double>& multipliers);

}  // namespace mjd
