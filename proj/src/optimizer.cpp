#include "mjd/optimizer.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace mjd {

std::string_view to_string(Problem problem) noexcept {
  return problem == Problem::kP2 ? "p2" : "p3";
}

std::string_view to_string(SolveStatus status) noexcept {
  switch (status) {
    case SolveStatus::kOptimal:
      return "optimal";
    case SolveStatus::kInfeasible:
      return "infeasible";
    case SolveStatus::kMaxIterations:
      return "max-iterations";
  }
  return "unknown";
}

void validate(const ProblemSpec& spec) {
  validate(spec.noise);
  const std::size_t k = spec.bands();
  if (k == 0) {
    throw DomainError("problem needs at least one subchannel");
  }
  for (std::size_t i = 0; i < k; ++i) {
    try {
      validate(spec.subchannels[i]);
    } catch (const DomainError& e) {
      throw DomainError("subchannel " + std::to_string(i) + ": " + e.what());
    }
  }
  if (spec.groups.empty()) {
    throw DomainError("problem needs at least one primary-user group");
  }
  for (std::size_t j = 0; j < spec.groups.size(); ++j) {
    const PrimaryUserGroup& g = spec.groups[j];
    const std::string where = "group " + std::to_string(j) + ": ";
    if (g.members.empty()) {
      throw DomainError(where + "members must be nonempty");
    }
    std::set<std::size_t> seen;
    for (std::size_t m : g.members) {
      if (m >= k) {
        throw DomainError(where + "member index " + std::to_string(m) + " out of range");
      }
      if (!seen.insert(m).second) {
        throw DomainError(where + "duplicate member index " + std::to_string(m));
      }
    }
    if (!(g.epsilon >= 0.0) || !std::isfinite(g.epsilon)) {
      throw DomainError(where + "epsilon must be finite and >= 0");
    }
  }
  if (!(spec.delta >= 0.0) || !std::isfinite(spec.delta)) {
    throw DomainError("delta must be finite and >= 0");
  }
}

std::vector<ThresholdBounds> all_threshold_bounds(const ProblemSpec& spec) {
  std::vector<ThresholdBounds> out;
  out.reserve(spec.bands());
  for (std::size_t k = 0; k < spec.bands(); ++k) {
    out.push_back(threshold_bounds(spec.subchannels[k], spec.noise, k));
  }
  return out;
}

double throughput(const ProblemSpec& spec, const ThresholdVector& gamma) {
  double r = 0.0;
  for (std::size_t k = 0; k < spec.bands(); ++k) {
    r += spec.subchannels[k].rate * (1.0 - prob_false_alarm(gamma[k], spec.noise));
  }
  return r;
}

double total_interference(const ProblemSpec& spec, const ThresholdVector& gamma) {
  double c = 0.0;
  for (std::size_t k = 0; k < spec.bands(); ++k) {
    c += spec.subchannels[k].cost * prob_miss(gamma[k], spec.subchannels[k], spec.noise);
  }
  return c;
}

std::vector<double> group_interference(const ProblemSpec& spec, const ThresholdVector& gamma) {
  std::vector<double> out;
  out.reserve(spec.groups.size());
  for (const PrimaryUserGroup& g : spec.groups) {
    double c = 0.0;
    for (std::size_t i : g.members) {
      c += spec.subchannels[i].cost * prob_miss(gamma[i], spec.subchannels[i], spec.noise);
    }
    out.push_back(c);
  }
  return out;
}

namespace {

using Vec = std::vector<double>;

// min sum_k a_k F_k(x_k)  s.t.  sum_{i in S_j} b_i G_i(x_i) <= e_j,  l <= x <= u.
// P2: F = Pf, a = r, G = Pm, b = c, S_j = groups.
// P3: F = Pm, a = c, G = Pf, b = r, one group holding every band, e = sum r - delta.
struct Program {
  Vec lower;
  Vec upper;
  std::vector<TailCurve> objective_curve;
  std::vector<TailCurve> constraint_curve;
  Vec objective_weight;
  Vec constraint_weight;
  std::vector<std::vector<std::size_t>> groups;
  Vec budget;
  std::vector<std::vector<std::size_t>> groups_of;  // band -> groups containing it
  Vec corner;  // box end where the band's constraint term is smallest

  [[nodiscard]] bool corner_is_lower(std::size_t k) const {
    return constraint_curve[k].side() == TailCurve::Side::kLower;
  }
  [[nodiscard]] double far_end(std::size_t k) const {
    return corner_is_lower(k) ? upper[k] : lower[k];
  }

  [[nodiscard]] std::size_t size() const { return lower.size(); }

  [[nodiscard]] double objective_term(std::size_t k, double x) const {
    return objective_weight[k] * objective_curve[k].value(x);
  }
  [[nodiscard]] double objective(const Vec& x) const {
    double f = 0.0;
    for (std::size_t k = 0; k < size(); ++k) {
      f += objective_term(k, x[k]);
    }
    return f;
  }
  [[nodiscard]] double constraint_term(std::size_t k, double x) const {
    return constraint_weight[k] * constraint_curve[k].value(x);
  }
  /// g_j(x) = sum b G - e; feasible when <= 0.
  [[nodiscard]] double constraint(std::size_t j, const Vec& x) const {
    double g = 0.0;
    for (std::size_t i : groups[j]) {
      g += constraint_term(i, x[i]);
    }
    return g - budget[j];
  }
  /// Scale of constraint j for relative tolerances.
  [[nodiscard]] double constraint_scale(std::size_t j) const {
    double s = std::abs(budget[j]);
    for (std::size_t i : groups[j]) {
      s = std::max(s, constraint_weight[i]);
    }
    return std::max(1.0, s);
  }
  /// dL/dx_k without box multipliers.
  [[nodiscard]] double lagrangian_gradient(std::size_t k, double x, const Vec& lambda) const {
    double s = objective_weight[k] * objective_curve[k].derivatives(x).first;
    const double dg = constraint_weight[k] * constraint_curve[k].derivatives(x).first;
    for (std::size_t j : groups_of[k]) {
      s += lambda[j] * dg;
    }
    return s;
  }
};

Program build_program(const ProblemSpec& spec, Problem problem,
                      const std::vector<ThresholdBounds>& box) {
  Program p;
  const std::size_t k = spec.bands();
  const TailCurve pf = TailCurve::false_alarm(spec.noise);
  for (std::size_t i = 0; i < k; ++i) {
    const SubchannelParams& sub = spec.subchannels[i];
    p.lower.push_back(box[i].gamma_min);
    p.upper.push_back(box[i].gamma_max);
    const TailCurve pm = TailCurve::miss(sub, spec.noise);
    if (problem == Problem::kP2) {
      p.objective_curve.push_back(pf);
      p.objective_weight.push_back(sub.rate);
      p.constraint_curve.push_back(pm);
      p.constraint_weight.push_back(sub.cost);
    } else {
      p.objective_curve.push_back(pm);
      p.objective_weight.push_back(sub.cost);
      p.constraint_curve.push_back(pf);
      p.constraint_weight.push_back(sub.rate);
    }
  }
  if (problem == Problem::kP2) {
    for (const PrimaryUserGroup& g : spec.groups) {
      p.groups.push_back(g.members);
      p.budget.push_back(g.epsilon);
    }
  } else {
    std::vector<std::size_t> all(k);
    std::iota(all.begin(), all.end(), 0);
    p.groups.push_back(std::move(all));
    double total_rate = 0.0;
    for (const SubchannelParams& sub : spec.subchannels) {
      total_rate += sub.rate;
    }
    p.budget.push_back(total_rate - spec.delta);
  }
  for (std::size_t i = 0; i < k; ++i) {
    p.corner.push_back(p.corner_is_lower(i) ? p.lower[i] : p.upper[i]);
  }
  p.groups_of.assign(k, {});
  for (std::size_t j = 0; j < p.groups.size(); ++j) {
    for (std::size_t i : p.groups[j]) {
      p.groups_of[i].push_back(j);
    }
  }
  return p;
}

double box_width_tol(double lo, double hi) {
  return 1e-12 * std::max({1.0, std::abs(lo), std::abs(hi)});
}

// Residual computation shared by the public kkt_residual and the solvers.
double program_kkt_residual(const Program& p, const Vec& x, const Vec& lambda) {
  double res = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    res = std::max({res, p.lower[k] - x[k], x[k] - p.upper[k]});
  }
  for (std::size_t j = 0; j < p.groups.size(); ++j) {
    const double g = p.constraint(j, x);
    res = std::max({res, g, -lambda[j], std::abs(lambda[j] * g)});
  }
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double s = p.lagrangian_gradient(k, x[k], lambda);
    double r = std::abs(s);
    // A lower-bound multiplier absorbs s > 0, an upper-bound one absorbs s < 0,
    // at the price of complementary slackness s * distance.
    if (s > 0.0) {
      r = std::min(r, s * std::max(0.0, x[k] - p.lower[k]));
    } else if (s < 0.0) {
      r = std::min(r, -s * std::max(0.0, p.upper[k] - x[k]));
    }
    res = std::max(res, r);
  }
  return res;
}

Solution assemble(const ProblemSpec& spec, Problem problem, const Program& p, const Vec& x,
                  const Vec& lambda, SolveStatus status, int iterations, std::string message) {
  Solution s;
  s.problem = problem;
  s.status = status;
  s.gamma.gamma = x;
  s.iterations = iterations;
  s.message = std::move(message);
  s.multipliers = lambda;
  for (std::size_t k = 0; k < spec.bands(); ++k) {
    s.pf.push_back(prob_false_alarm(x[k], spec.noise));
    s.pm.push_back(prob_miss(x[k], spec.subchannels[k], spec.noise));
  }
  s.throughput = throughput(spec, s.gamma);
  s.interference = total_interference(spec, s.gamma);
  s.group_interference = group_interference(spec, s.gamma);
  if (problem == Problem::kP2) {
    s.objective = s.throughput;
    for (std::size_t j = 0; j < spec.groups.size(); ++j) {
      s.slacks.push_back(spec.groups[j].epsilon - s.group_interference[j]);
    }
  } else {
    s.objective = s.interference;
    s.slacks.push_back(s.throughput - spec.delta);
  }
  s.kkt_residual = program_kkt_residual(p, x, lambda);
  return s;
}

Solution infeasible_solution(const ProblemSpec& spec, Problem problem, std::string message) {
  Solution s;
  s.problem = problem;
  s.status = SolveStatus::kInfeasible;
  s.objective = std::numeric_limits<double>::quiet_NaN();
  s.throughput = s.objective;
  s.interference = s.objective;
  s.kkt_residual = std::numeric_limits<double>::infinity();
  s.message = std::move(message);
  (void)spec;
  return s;
}

// Multipliers for constraints whose members are all pinned at their corner:
// the smallest lambda_j >= 0 that gives every pinned member the right sign.
void settle_pinned_multipliers(const Program& p, const Vec& x, Vec& lambda,
                               const std::vector<bool>& settle) {
  for (std::size_t j = 0; j < p.groups.size(); ++j) {
    if (!settle[j]) {
      continue;
    }
    lambda[j] = 0.0;
    double need = 0.0;
    for (std::size_t k : p.groups[j]) {
      const double dg = p.constraint_weight[k] * p.constraint_curve[k].derivatives(x[k]).first;
      if (dg == 0.0 || std::abs(x[k] - p.corner[k]) > box_width_tol(p.lower[k], p.upper[k])) {
        continue;
      }
      // At a lower corner dg > 0 and s + lambda dg >= 0 is needed; at an upper
      // corner dg < 0 and s + lambda dg <= 0. Both read lambda >= -s / dg.
      const double s = p.lagrangian_gradient(k, x[k], lambda);
      need = std::max(need, -s / dg);
    }
    lambda[j] = need;
  }
}

// ---------------------------------------------------------------------------
// Log-barrier interior method.

struct BarrierOutcome {
  Vec x;
  Vec lambda;
  double mu = 1.0;
  int iterations = 0;
  bool converged = false;
  std::vector<bool> pinned;   // fixed: zero-width box, or at its corner under a degenerate constraint
  std::vector<bool> dropped;  // constraint not handled by the barrier
};

class BarrierSolver {
 public:
  BarrierSolver(const Program& p, const SolverOptions& opt) : p_(p), opt_(opt) {}

  BarrierOutcome run() {
    const std::size_t k = p_.size();
    BarrierOutcome out;
    out.x = p_.corner;
    out.lambda.assign(p_.groups.size(), 0.0);
    out.pinned.assign(k, false);
    out.dropped.assign(p_.groups.size(), false);

    for (std::size_t i = 0; i < k; ++i) {
      if (p_.upper[i] - p_.lower[i] <= box_width_tol(p_.lower[i], p_.upper[i])) {
        out.pinned[i] = true;
      }
    }
    // A constraint already tight at its best corner leaves no interior: its
    // members with a positive weight can only sit at that corner.
    for (std::size_t j = 0; j < p_.groups.size(); ++j) {
      const double g = p_.constraint(j, p_.corner);
      if (g >= -1e-12 * p_.constraint_scale(j)) {
        for (std::size_t i : p_.groups[j]) {
          if (p_.constraint_weight[i] > 0.0) {
            out.pinned[i] = true;
          }
        }
      }
    }
    for (std::size_t i = 0; i < k; ++i) {
      if (!out.pinned[i]) {
        free_.push_back(i);
      }
    }
    for (std::size_t j = 0; j < p_.groups.size(); ++j) {
      bool has_free = false;
      for (std::size_t i : p_.groups[j]) {
        has_free = has_free || (!out.pinned[i] && p_.constraint_weight[i] > 0.0);
      }
      out.dropped[j] = !has_free;
      if (has_free) {
        active_.push_back(j);
      }
    }
    if (free_.empty()) {
      out.converged = true;
      out.mu = 0.0;
      return out;
    }

    // Strictly feasible start on the segment from the best corner to the box
    // centre: the point farthest from the corner that keeps every coupling
    // constraint at no more than half its corner value.
    Vec x = p_.corner;
    auto place = [&](double tau) {
      for (std::size_t i : free_) {
        x[i] = p_.corner[i] + tau * (p_.far_end(i) - p_.corner[i]);
      }
    };
    auto margin_ok = [&] {
      for (std::size_t j : active_) {
        if (!(p_.constraint(j, x) <= 0.5 * p_.constraint(j, p_.corner))) return false;
      }
      return true;
    };
    place(0.5);
    if (!margin_ok()) {
      double ok = 0.0;
      double bad = 0.5;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (ok + bad);
        place(mid);
        (margin_ok() ? ok : bad) = mid;
      }
      place(ok > 0.0 ? ok : 1e-12);
    }

    // The barrier sees the objective divided by sum a_k, so the mu schedule
    // starts at the objective's own scale.
    const double weight_sum =
        std::accumulate(p_.objective_weight.begin(), p_.objective_weight.end(), 0.0);
    scale_ = weight_sum > 0.0 ? 1.0 / weight_sum : 1.0;
    const double m = static_cast<double>(2 * free_.size() + active_.size());
    double t = 1.0 / opt_.mu_initial;
    int iterations = 0;
    bool budget_left = true;
    // Duality gap of a central point, relative to sum a_k.
    auto gap = [&](double tt) { return m / tt; };
    for (;;) {
      const bool last = gap(t * opt_.mu_factor) < opt_.gap_tol || gap(t) < opt_.gap_tol;
      budget_left = center(x, t, last ? 2e-10 : 1e-6, iterations);
      if (!budget_left || gap(t) < opt_.gap_tol) {
        break;
      }
      t *= opt_.mu_factor;
    }
    out.x = x;
    out.mu = 1.0 / t;
    out.iterations = iterations;
    out.converged = budget_left;
    for (std::size_t j : active_) {
      out.lambda[j] = out.mu / (scale_ * -p_.constraint(j, x));
    }
    return out;
  }

 private:
  // Newton centering at barrier weight t, until the squared Newton decrement
  // drops below `tolerance`. Returns false when the iteration budget is exhausted.
  bool center(Vec& x, double t_unscaled, double tolerance, int& iterations) {
    const double t = t_unscaled * scale_;
    const std::size_t n = free_.size();
    Eigen::VectorXd grad(n);
    Eigen::MatrixXd hess(n, n);
    std::vector<double> slack(p_.groups.size(), 0.0);
    std::vector<double> dg(p_.size(), 0.0);
    std::vector<double> d2g(p_.size(), 0.0);

    for (;;) {
      for (std::size_t j : active_) {
        slack[j] = -p_.constraint(j, x);
      }
      grad.setZero();
      hess.setZero();
      for (std::size_t a = 0; a < n; ++a) {
        const std::size_t i = free_[a];
        const Derivatives f = p_.objective_curve[i].derivatives(x[i]);
        const Derivatives g = p_.constraint_curve[i].derivatives(x[i]);
        dg[i] = p_.constraint_weight[i] * g.first;
        d2g[i] = p_.constraint_weight[i] * g.second;
        const double lo = x[i] - p_.lower[i];
        const double hi = p_.upper[i] - x[i];
        grad[a] = t * p_.objective_weight[i] * f.first - 1.0 / lo + 1.0 / hi;
        hess(a, a) = t * p_.objective_weight[i] * f.second + 1.0 / (lo * lo) + 1.0 / (hi * hi);
      }
      for (std::size_t j : active_) {
        const double inv = 1.0 / slack[j];
        std::vector<std::size_t> pos;
        for (std::size_t a = 0; a < n; ++a) {
          const std::size_t i = free_[a];
          if (std::find(p_.groups[j].begin(), p_.groups[j].end(), i) != p_.groups[j].end()) {
            pos.push_back(a);
          }
        }
        for (std::size_t a : pos) {
          const std::size_t i = free_[a];
          grad[a] += dg[i] * inv;
          hess(a, a) += d2g[i] * inv;
          for (std::size_t b : pos) {
            hess(a, b) += dg[i] * dg[free_[b]] * inv * inv;
          }
        }
      }

      const Eigen::VectorXd step = hess.ldlt().solve(-grad);
      const double decrement = -grad.dot(step);
      if (!(decrement > tolerance) || !step.allFinite()) {
        return true;
      }
      if (iterations >= opt_.max_iterations) {
        return false;
      }
      ++iterations;

      double s = 1.0;
      for (std::size_t a = 0; a < n; ++a) {
        const std::size_t i = free_[a];
        if (step[a] > 0.0) {
          s = std::min(s, 0.99 * (p_.upper[i] - x[i]) / step[a]);
        } else if (step[a] < 0.0) {
          s = std::min(s, 0.99 * (x[i] - p_.lower[i]) / -step[a]);
        }
      }
      bool moved = false;
      Vec trial = x;
      while (s > 1e-16) {
        for (std::size_t a = 0; a < n; ++a) {
          trial[free_[a]] = x[free_[a]] + s * step[a];
        }
        const double change = merit_change(x, trial, slack, t);
        if (std::isfinite(change) && change <= opt_.armijo * s * -decrement) {
          moved = true;
          break;
        }
        s *= opt_.backtrack;
      }
      if (!moved) {
        return true;  // no further progress possible at this precision
      }
      x = trial;
    }
  }

  // phi(trial) - phi(x), summed term by term to limit cancellation.
  double merit_change(const Vec& x, const Vec& trial, const std::vector<double>& slack,
                      double t) const {
    double d = 0.0;
    for (std::size_t i : free_) {
      const double lo_new = trial[i] - p_.lower[i];
      const double hi_new = p_.upper[i] - trial[i];
      if (!(lo_new > 0.0) || !(hi_new > 0.0)) {
        return std::numeric_limits<double>::infinity();
      }
      d += t * (p_.objective_term(i, trial[i]) - p_.objective_term(i, x[i]));
      d -= std::log(lo_new / (x[i] - p_.lower[i]));
      d -= std::log(hi_new / (p_.upper[i] - x[i]));
    }
    for (std::size_t j : active_) {
      double change = 0.0;
      for (std::size_t i : p_.groups[j]) {
        change += p_.constraint_term(i, trial[i]) - p_.constraint_term(i, x[i]);
      }
      const double new_slack = slack[j] - change;
      if (!(new_slack > 0.0)) {
        return std::numeric_limits<double>::infinity();
      }
      d -= std::log(new_slack / slack[j]);
    }
    return d;
  }

  const Program& p_;
  const SolverOptions& opt_;
  std::vector<std::size_t> free_;
  std::vector<std::size_t> active_;
  double scale_ = 1.0;
};

// ---------------------------------------------------------------------------
// Active-set polish: Newton on the KKT equations restricted to a guessed
// active set, with the guess repaired until signs and feasibility verify.

struct Candidate {
  Vec x;
  Vec lambda;
};

class KktPolisher {
 public:
  KktPolisher(const Program& p, const BarrierOutcome& start) : p_(p), start_(start) {}

  std::optional<Candidate> run() {
    const std::size_t k = p_.size();
    const double root_mu = std::sqrt(std::max(start_.mu, 0.0));
    at_lower_.assign(k, false);
    at_upper_.assign(k, false);
    for (std::size_t i = 0; i < k; ++i) {
      if (start_.pinned[i]) {
        (p_.corner_is_lower(i) ? at_lower_[i] : at_upper_[i]) = true;
      } else if (start_.x[i] - p_.lower[i] < root_mu) {
        at_lower_[i] = true;
      } else if (p_.upper[i] - start_.x[i] < root_mu) {
        at_upper_[i] = true;
      }
    }
    active_.assign(p_.groups.size(), false);
    for (std::size_t j = 0; j < p_.groups.size(); ++j) {
      const double slack = -p_.constraint(j, start_.x);
      active_[j] = start_.dropped[j] ? slack <= 1e-12 * p_.constraint_scale(j)
                                     : start_.lambda[j] > slack;
    }

    for (int round = 0; round < 4 * static_cast<int>(k + p_.groups.size()) + 4; ++round) {
      Candidate c;
      c.x = start_.x;
      c.lambda = start_.lambda;
      for (std::size_t i = 0; i < k; ++i) {
        if (at_lower_[i]) c.x[i] = p_.lower[i];
        if (at_upper_[i]) c.x[i] = p_.upper[i];
      }
      for (std::size_t j = 0; j < p_.groups.size(); ++j) {
        if (!active_[j]) c.lambda[j] = 0.0;
      }
      bound_unpriced(c);
      if (!newton(c)) {
        return std::nullopt;
      }
      if (!repair(c)) {
        return c;
      }
    }
    return std::nullopt;
  }

 private:
  bool is_free(std::size_t i) const { return !at_lower_[i] && !at_upper_[i]; }

  // A free coordinate that no active constraint prices has a monotone reduced
  // objective, so it belongs on the bound its slope points to.
  void bound_unpriced(Candidate& c) {
    for (std::size_t i = 0; i < p_.size(); ++i) {
      if (!is_free(i)) continue;
      bool priced = false;
      if (p_.constraint_weight[i] > 0.0) {
        for (std::size_t j : p_.groups_of[i]) priced = priced || active_[j];
      }
      if (priced) continue;
      const double slope = p_.objective_weight[i] * p_.objective_curve[i].derivatives(c.x[i]).first;
      const bool upper = slope < 0.0 || (slope == 0.0 && !p_.corner_is_lower(i));
      (upper ? at_upper_[i] : at_lower_[i]) = true;
      c.x[i] = upper ? p_.upper[i] : p_.lower[i];
    }
  }

  bool has_free_member(std::size_t j) const {
    for (std::size_t i : p_.groups[j]) {
      if (is_free(i) && p_.constraint_weight[i] > 0.0) return true;
    }
    return false;
  }

  bool newton(Candidate& c) const {
    std::vector<std::size_t> fx;
    std::vector<std::size_t> fl;
    for (std::size_t i = 0; i < p_.size(); ++i) {
      if (is_free(i)) fx.push_back(i);
    }
    std::vector<bool> settle(p_.groups.size(), false);
    for (std::size_t j = 0; j < p_.groups.size(); ++j) {
      if (!active_[j]) continue;
      if (has_free_member(j)) {
        fl.push_back(j);
      } else {
        settle[j] = true;
      }
    }
    const std::size_t n = fx.size() + fl.size();
    if (n > 0) {
      bool converged = false;
      double prev = residual_norm(c, fx, fl);
      for (int it = 0; it < 60; ++it) {
        if (prev <= 1e-15) {
          converged = true;
          break;
        }
        Eigen::VectorXd r(n);
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
        fill_system(c, fx, fl, r, jac);
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
        if (lu.rank() < static_cast<Eigen::Index>(n)) {
          return false;
        }
        const Eigen::VectorXd step = lu.solve(-r);
        double s = 1.0;
        Candidate trial = c;
        double now = prev;
        for (int h = 0; h < 40; ++h) {
          for (std::size_t a = 0; a < fx.size(); ++a) trial.x[fx[a]] = c.x[fx[a]] + s * step[a];
          for (std::size_t b = 0; b < fl.size(); ++b) {
            trial.lambda[fl[b]] = c.lambda[fl[b]] + s * step[fx.size() + b];
          }
          now = residual_norm(trial, fx, fl);
          if (now < prev || now <= 1e-15) break;
          s *= 0.5;
        }
        if (!(now < prev)) {
          converged = prev <= 1e-10;
          break;
        }
        c = trial;
        prev = now;
      }
      if (!converged && prev > 1e-10) {
        return false;
      }
    }
    settle_pinned_multipliers(p_, c.x, c.lambda, settle);
    return true;
  }

  // Max-norm of the reduced KKT equations, in the units of the certificate.
  double residual_norm(const Candidate& c, const std::vector<std::size_t>& fx,
                       const std::vector<std::size_t>& fl) const {
    double worst = 0.0;
    for (std::size_t i : fx) {
      worst = std::max(worst, std::abs(p_.lagrangian_gradient(i, c.x[i], c.lambda)));
    }
    for (std::size_t j : fl) {
      worst = std::max(worst, std::abs(p_.constraint(j, c.x)));
    }
    return worst;
  }

  void fill_system(const Candidate& c, const std::vector<std::size_t>& fx,
                   const std::vector<std::size_t>& fl, Eigen::VectorXd& r,
                   Eigen::MatrixXd& jac) const {
    for (std::size_t a = 0; a < fx.size(); ++a) {
      const std::size_t i = fx[a];
      const Derivatives f = p_.objective_curve[i].derivatives(c.x[i]);
      const Derivatives g = p_.constraint_curve[i].derivatives(c.x[i]);
      double lam = 0.0;
      for (std::size_t j : p_.groups_of[i]) lam += c.lambda[j];
      const double w = p_.constraint_weight[i];
      r[a] = p_.objective_weight[i] * f.first + lam * w * g.first;
      jac(a, a) = p_.objective_weight[i] * f.second + lam * w * g.second;
      for (std::size_t b = 0; b < fl.size(); ++b) {
        const auto& members = p_.groups[fl[b]];
        if (std::find(members.begin(), members.end(), i) != members.end()) {
          jac(a, fx.size() + b) = w * g.first;
          jac(fx.size() + b, a) = w * g.first;
        }
      }
    }
    for (std::size_t b = 0; b < fl.size(); ++b) {
      r[fx.size() + b] = p_.constraint(fl[b], c.x);
    }
  }

  // Returns true when the active set had to change.
  bool repair(Candidate& c) {
    // Free coordinates that left the box go to the nearer violated bound.
    std::optional<std::size_t> worst_box;
    double worst_box_excess = 0.0;
    for (std::size_t i = 0; i < p_.size(); ++i) {
      if (!is_free(i)) continue;
      const double tol = box_width_tol(p_.lower[i], p_.upper[i]);
      const double excess = std::max(p_.lower[i] - c.x[i], c.x[i] - p_.upper[i]);
      if (excess > tol && excess > worst_box_excess) {
        worst_box_excess = excess;
        worst_box = i;
      } else if (excess > 0.0) {
        c.x[i] = std::clamp(c.x[i], p_.lower[i], p_.upper[i]);
      }
    }
    if (worst_box) {
      const std::size_t i = *worst_box;
      (c.x[i] < p_.lower[i] ? at_lower_[i] : at_upper_[i]) = true;
      return true;
    }
    for (std::size_t j = 0; j < p_.groups.size(); ++j) {
      if (active_[j] && c.lambda[j] < -1e-12) {
        active_[j] = false;
        return true;
      }
    }
    for (std::size_t j = 0; j < p_.groups.size(); ++j) {
      if (!active_[j] && p_.constraint(j, c.x) > 1e-12 * p_.constraint_scale(j)) {
        active_[j] = true;
        for (std::size_t i : p_.groups[j]) {
          if (!start_.pinned[i]) at_lower_[i] = at_upper_[i] = false;
        }
        return true;
      }
    }
    // Bound multipliers must have the right sign; release the worst offender.
    std::optional<std::size_t> release;
    double worst = 0.0;
    for (std::size_t i = 0; i < p_.size(); ++i) {
      if (is_free(i) || start_.pinned[i]) continue;
      const double s = p_.lagrangian_gradient(i, c.x[i], c.lambda);
      const double scale = 1e-10 * (p_.objective_weight[i] + p_.constraint_weight[i] + 1.0) / p_.objective_curve[i].stddev();
      const double wrong = at_lower_[i] ? -s : s;
      if (wrong > scale && wrong > worst) {
        worst = wrong;
        release = i;
      }
    }
    if (release) {
      at_lower_[*release] = false;
      at_upper_[*release] = false;
      return true;
    }
    return false;
  }

  const Program& p_;
  const BarrierOutcome& start_;
  std::vector<bool> at_lower_;
  std::vector<bool> at_upper_;
  std::vector<bool> active_;
};

bool constraints_hold(const Program& p, const Vec& x, double tol) {
  for (std::size_t j = 0; j < p.groups.size(); ++j) {
    if (p.constraint(j, x) > tol * p.constraint_scale(j)) return false;
  }
  return true;
}

// Where the objective does not depend on a band, prefer its largest threshold.
void break_flat_ties(const Program& p, Vec& x, const Vec& lambda) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.objective_weight[i] != 0.0 || x[i] == p.upper[i]) continue;
    bool priced = false;
    for (std::size_t j : p.groups_of[i]) {
      priced = priced || (lambda[j] > 0.0 && p.constraint_weight[i] > 0.0);
    }
    if (priced) continue;
    const double old = x[i];
    x[i] = p.upper[i];
    if (!constraints_hold(p, x, 0.0)) {
      x[i] = old;
    }
  }
}

Solution finish(const ProblemSpec& spec, Problem problem, const Program& p, Vec x, Vec lambda,
                bool budget_ok, int iterations, const SolverOptions& opt, std::string note) {
  break_flat_ties(p, x, lambda);
  Solution s = assemble(spec, problem, p, x, lambda, SolveStatus::kOptimal, iterations, std::move(note));
  const bool feasible = constraints_hold(p, x, 0.0) ||
                        std::all_of(s.slacks.begin(), s.slacks.end(),
                                    [&](double v) { return v >= -opt.feasibility_tol; });
  if (!budget_ok || !feasible || !(s.kkt_residual <= opt.kkt_tol)) {
    s.status = SolveStatus::kMaxIterations;
    if (s.message.empty()) {
      s.message = budget_ok ? "optimality not certified" : "iteration limit reached";
    }
  }
  return s;
}

Solution solve_program(const ProblemSpec& spec, Problem problem, const SolverOptions& opt) {
  validate(spec);
  const FeasibilityReport report = check_feasibility(spec, problem);
  if (!report.feasible) {
    return infeasible_solution(spec, problem, report.message);
  }
  const Program p = build_program(spec, problem, all_threshold_bounds(spec));
  BarrierOutcome barrier = BarrierSolver(p, opt).run();

  std::vector<bool> settle(p.groups.size(), false);
  for (std::size_t j = 0; j < p.groups.size(); ++j) settle[j] = barrier.dropped[j];
  settle_pinned_multipliers(p, barrier.x, barrier.lambda, settle);

  Vec x = barrier.x;
  Vec lambda = barrier.lambda;
  if (opt.polish) {
    if (auto polished = KktPolisher(p, barrier).run()) {
      const double before = p.objective(x);
      const double after = p.objective(polished->x);
      const double r_before = program_kkt_residual(p, x, lambda);
      const double r_after = program_kkt_residual(p, polished->x, polished->lambda);
      if (constraints_hold(p, polished->x, 1e-12) &&
          after <= before + 1e-9 * (1.0 + std::abs(before)) && r_after <= std::max(r_before, 1e-9)) {
        x = polished->x;
        lambda = polished->lambda;
      }
    }
  }
  return finish(spec, problem, p, x, lambda, barrier.converged, barrier.iterations, opt, "");
}

// ---------------------------------------------------------------------------
// Dual bisection oracle (one coupling constraint).

// argmin over [l, u] of a F(x) + lambda b G(x) for one band.
double minimize_band(const Program& p, std::size_t i, double lambda) {
  const double a = p.objective_weight[i];
  const double b = lambda * p.constraint_weight[i];
  const double lo = p.lower[i];
  const double hi = p.upper[i];
  if (a == 0.0 && b == 0.0) {
    return hi;
  }
  auto slope = [&](double x) {
    return a * p.objective_curve[i].derivatives(x).first + b * p.constraint_curve[i].derivatives(x).first;
  };
  if (slope(lo) >= 0.0) return lo;
  if (slope(hi) <= 0.0) return hi;
  double left = lo;
  double right = hi;
  for (int it = 0; it < 200 && right - left > 0.0; ++it) {
    const double mid = 0.5 * (left + right);
    if (mid <= left || mid >= right) break;
    (slope(mid) < 0.0 ? left : right) = mid;
  }
  return 0.5 * (left + right);
}

Vec minimize_lagrangian(const Program& p, std::size_t group, double lambda) {
  Vec x(p.size());
  const auto& members = p.groups[group];
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool member = std::find(members.begin(), members.end(), i) != members.end();
    x[i] = minimize_band(p, i, member ? lambda : 0.0);
  }
  return x;
}

Solution dual_bisection(const ProblemSpec& spec, Problem problem, const Program& p,
                        const SolverOptions& opt) {
  Vec x = minimize_lagrangian(p, 0, 0.0);
  int evaluations = 1;
  if (p.constraint(0, x) <= 0.0) {
    return finish(spec, problem, p, x, {0.0}, true, evaluations, opt, "");
  }
  double lo = 0.0;
  double hi = 1.0;
  Vec x_hi = minimize_lagrangian(p, 0, hi);
  while (p.constraint(0, x_hi) > 0.0 && evaluations < 2000) {
    lo = hi;
    hi *= 2.0;
    x_hi = minimize_lagrangian(p, 0, hi);
    ++evaluations;
  }
  if (p.constraint(0, x_hi) > 0.0) {
    // Only the best corner is feasible.
    Vec corner = p.corner;
    Vec lambda{0.0};
    settle_pinned_multipliers(p, corner, lambda, {true});
    return finish(spec, problem, p, corner, lambda, true, evaluations, opt, "");
  }
  for (int it = 0; it < 300; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const Vec xm = minimize_lagrangian(p, 0, mid);
    ++evaluations;
    if (p.constraint(0, xm) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
      x_hi = xm;
    }
  }
  return finish(spec, problem, p, x_hi, {hi}, true, evaluations, opt, "");
}

// ---------------------------------------------------------------------------
// Nested dual bisection oracle for several coupling constraints, small K.

class NestedDual {
 public:
  explicit NestedDual(const Program& p) : p_(p), lambda_(p.groups.size(), 0.0) {}

  // Fixes lambda_j for j >= level given lambda_0 .. lambda_{level-1}.
  Vec solve(std::size_t level) {
    if (level == p_.groups.size()) return primal();
    lambda_[level] = 0.0;
    Vec x = solve(level + 1);
    if (p_.constraint(level, x) <= 0.0) return x;
    double lo = 0.0, hi = 1.0;
    Vec x_hi = at(level, hi);
    for (int i = 0; i < 1000 && p_.constraint(level, x_hi) > 0.0; ++i) {
      lo = hi;
      hi *= 2.0;
      x_hi = at(level, hi);
    }
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi || hi - lo <= 1e-13 * hi) break;
      const Vec xm = at(level, mid);
      if (p_.constraint(level, xm) > 0.0) {
        lo = mid;
      } else {
        hi = mid;
        x_hi = xm;
      }
    }
    // Re-solve the inner levels at the accepted multiplier.
    x_hi = at(level, hi);
    return x_hi;
  }

  const Vec& lambda() const { return lambda_; }
  long evaluations() const { return evaluations_; }

 private:
  Vec at(std::size_t level, double value) {
    lambda_[level] = value;
    return solve(level + 1);
  }

  Vec primal() {
    ++evaluations_;
    Vec x(p_.size());
    for (std::size_t i = 0; i < p_.size(); ++i) {
      double price = 0.0;
      for (std::size_t j : p_.groups_of[i]) price += lambda_[j];
      x[i] = minimize_band(p_, i, price);
    }
    return x;
  }

  const Program& p_;
  Vec lambda_;
  long evaluations_ = 0;
};

Solution nested_dual(const ProblemSpec& spec, Problem problem, const Program& p,
                     const SolverOptions& opt) {
  NestedDual dual(p);
  const Vec x = dual.solve(0);
  const int evaluations = static_cast<int>(std::min<long>(dual.evaluations(), std::numeric_limits<int>::max()));
  return finish(spec, problem, p, x, dual.lambda(), true, evaluations, opt, "nested dual bisection");
}

// Scalar P2/P3 restriction gamma_k = t for all k, solved by bisection on the
// monotone constraint. The returned multipliers refer to the scalar problem.
struct UniformProgram {
  const Program& p;

  double objective(double t) const {
    double f = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) f += p.objective_term(i, t);
    return f;
  }
  double worst_constraint(double t) const {
    const Vec x(p.size(), t);
    double w = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < p.groups.size(); ++j) w = std::max(w, p.constraint(j, x));
    return w;
  }
};

}  // namespace

FeasibilityReport check_feasibility(const ProblemSpec& spec, Problem problem) {
  validate(spec);
  FeasibilityReport r;
  std::vector<ThresholdBounds> box;
  try {
    box = all_threshold_bounds(spec);
  } catch (const InfeasibleSubchannel& e) {
    r.feasible = false;
    r.reason = FeasibilityReport::Reason::kEmptyBox;
    r.index = e.index();
    r.value = e.bounds().gamma_min;
    r.limit = e.bounds().gamma_max;
    r.message = e.what();
    return r;
  }
  const Program p = build_program(spec, problem, box);
  if (problem == Problem::kP2) {
    for (std::size_t j = 0; j < p.groups.size(); ++j) {
      const double best = p.constraint(j, p.lower) + p.budget[j];
      if (best > p.budget[j]) {
        r.feasible = false;
        r.reason = FeasibilityReport::Reason::kGroupBudget;
        r.index = j;
        r.value = best;
        r.limit = p.budget[j];
        r.message = "group " + std::to_string(j) + " infeasible: minimum interference " +
                    std::to_string(best) + " exceeds epsilon " + std::to_string(p.budget[j]);
        return r;
      }
    }
  } else {
    ThresholdVector top{p.upper};
    const double best = throughput(spec, top);
    if (best < spec.delta) {
      r.feasible = false;
      r.reason = FeasibilityReport::Reason::kThroughputFloor;
      r.index = 0;
      r.value = best;
      r.limit = spec.delta;
      r.message = "throughput floor infeasible: maximum throughput " + std::to_string(best) +
                  " below delta " + std::to_string(spec.delta);
      return r;
    }
  }
  return r;
}

Solution solve_p2(const ProblemSpec& spec, const SolverOptions& options) {
  return solve_program(spec, Problem::kP2, options);
}

Solution solve_p3(const ProblemSpec& spec, const SolverOptions& options) {
  return solve_program(spec, Problem::kP3, options);
}

Solution solve(const ProblemSpec& spec, Problem problem, const SolverOptions& options) {
  return solve_program(spec, problem, options);
}

Solution oracle_solve(const ProblemSpec& spec, Problem problem, const SolverOptions& options) {
  validate(spec);
  const FeasibilityReport report = check_feasibility(spec, problem);
  if (!report.feasible) {
    return infeasible_solution(spec, problem, report.message);
  }
  const Program p = build_program(spec, problem, all_threshold_bounds(spec));
  if (p.groups.size() == 1) {
    return dual_bisection(spec, problem, p, options);
  }
  if (p.size() > 4 || p.groups.size() > 3) {
    throw DomainError("oracle_solve: several groups are only supported for K <= 4 and J <= 3");
  }
  return nested_dual(spec, problem, p, options);
}

Solution solve_uniform_baseline(const ProblemSpec& spec, Problem problem,
                                const SolverOptions& options) {
  validate(spec);
  std::vector<ThresholdBounds> box;
  try {
    box = all_threshold_bounds(spec);
  } catch (const InfeasibleSubchannel& e) {
    return infeasible_solution(spec, problem, e.what());
  }
  const Program p = build_program(spec, problem, box);
  const double lo = *std::max_element(p.lower.begin(), p.lower.end());
  const double hi = *std::min_element(p.upper.begin(), p.upper.end());
  if (lo > hi) {
    return infeasible_solution(spec, problem, "no common threshold satisfies every box");
  }
  const UniformProgram u{p};
  // P2: objective falls and the constraints rise with t, so the best feasible
  // t is the largest one. P3: the reverse, the smallest.
  const bool take_largest = problem == Problem::kP2;
  double t = 0.0;
  bool all_flat = std::all_of(p.objective_weight.begin(), p.objective_weight.end(),
                              [](double w) { return w == 0.0; });
  if (take_largest || all_flat) {
    if (u.worst_constraint(lo) > 0.0 && !all_flat) {
      return infeasible_solution(spec, problem, "uniform threshold cannot meet the interference budget");
    }
    if (u.worst_constraint(hi) <= 0.0) {
      t = hi;
    } else if (all_flat && u.worst_constraint(lo) > 0.0) {
      return infeasible_solution(spec, problem, "uniform threshold cannot meet the constraint");
    } else {
      double a = lo;
      double b = hi;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (a + b);
        if (mid <= a || mid >= b) break;
        (u.worst_constraint(mid) <= 0.0 ? a : b) = mid;
      }
      t = a;
    }
  } else {
    if (u.worst_constraint(hi) > 0.0) {
      return infeasible_solution(spec, problem, "uniform threshold cannot meet the throughput floor");
    }
    if (u.worst_constraint(lo) <= 0.0) {
      t = lo;
    } else {
      double a = lo;
      double b = hi;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (a + b);
        if (mid <= a || mid >= b) break;
        (u.worst_constraint(mid) <= 0.0 ? b : a) = mid;
      }
      t = b;
    }
  }

  const Vec x(p.size(), t);
  Solution s = assemble(spec, problem, p, x, Vec(p.groups.size(), 0.0), SolveStatus::kOptimal, 0,
                        "uniform threshold");
  // Certificate of the scalar problem: d/dt objective + sum lambda_j d/dt g_j.
  double df = 0.0;
  Vec dg(p.groups.size(), 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    df += p.objective_weight[i] * p.objective_curve[i].derivatives(t).first;
    const double d = p.constraint_weight[i] * p.constraint_curve[i].derivatives(t).first;
    for (std::size_t j : p.groups_of[i]) dg[j] += d;
  }
  Vec lambda(p.groups.size(), 0.0);
  std::optional<std::size_t> binding;
  double tightest = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < p.groups.size(); ++j) {
    const double g = p.constraint(j, x);
    if (g > -1e-9 * p.constraint_scale(j) && g > tightest) {
      tightest = g;
      binding = j;
    }
  }
  double stationarity = df;
  if (binding && dg[*binding] != 0.0 && t > lo && t < hi) {
    lambda[*binding] = std::max(0.0, -df / dg[*binding]);
    stationarity = df + lambda[*binding] * dg[*binding];
  }
  double res = 0.0;
  for (std::size_t j = 0; j < p.groups.size(); ++j) {
    const double g = p.constraint(j, x);
    res = std::max({res, g, std::abs(lambda[j] * g)});
  }
  if (stationarity > 0.0) {
    res = std::max(res, std::min(stationarity, stationarity * (t - lo)));
  } else if (stationarity < 0.0) {
    res = std::max(res, std::min(-stationarity, -stationarity * (hi - t)));
  }
  s.multipliers = lambda;
  s.kkt_residual = res;
  if (!(res <= options.kkt_tol)) {
    s.status = SolveStatus::kMaxIterations;
    s.message = "uniform threshold not certified";
  }
  return s;
}

double kkt_residual(const ProblemSpec& spec, Problem problem, const ThresholdVector& gamma,
                    const std::vector<double>& multipliers) {
  validate(spec);
  const Program p = build_program(spec, problem, all_threshold_bounds(spec));
  if (gamma.size() != p.size()) {
    throw DomainError("kkt_residual: threshold vector length mismatch");
  }
  if (multipliers.size() != p.groups.size()) {
    throw DomainError("kkt_residual: expected " + std::to_string(p.groups.size()) + " multipliers");
  }
  return program_kkt_residual(p, gamma.gamma, multipliers);
}

}  // namespace mjd
