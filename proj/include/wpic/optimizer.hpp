#pragma once

// Outer alternating optimization: the (x, p) block is handled by inner
// surrogate iterations, the time split tau by its closed form. Covers the
// sum-throughput and max-min problems, all EH/CSI models, and the power-only
// baseline (incoherent combining, phases unused).

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "wpic/problem.hpp"
#include "wpic/solver.hpp"
#include "wpic/surrogate.hpp"

namespace wpic {

class TauInfeasible : public std::runtime_error {
 public:
  TauInfeasible(int pair_, double zeta1_, double zeta2_, const std::string& context)
      : std::runtime_error(make_message(pair_, zeta1_, zeta2_, context)),
        pair(pair_),
        zeta1(zeta1_),
        zeta2(zeta2_) {}
  int pair;
  double zeta1;
  double zeta2;

 private:
  static std::string make_message(int pair, double z1, double z2, const std::string& ctx) {
    std::ostringstream os;
    os << "no feasible tau" << (ctx.empty() ? "" : " (" + ctx + ")") << ": pair " << pair
       << " requires tau >= " << z1 << " but the tightest storage bound allows tau <= " << z2;
    return os.str();
  }
};

// Per-pair tau interval implied by C3 (lower) and C4 (upper) at fixed (x, p).
struct TauBounds {
  VectorXd zeta1;
  VectorXd zeta2;

  double lo() const { return std::max(0.0, zeta1.maxCoeff()); }
  double hi() const { return std::min(1.0, zeta2.minCoeff()); }
  bool feasible() const { return lo() <= hi(); }
  int binding_pair() const {
    int k;
    zeta1.maxCoeff(&k);
    return k;
  }
  int cap_pair() const {
    int k;
    zeta2.minCoeff(&k);
    return k;
  }
};

inline TauBounds compute_tau_bounds(const VectorXcd& x, const VectorXd& p,
                                    const NetworkConfig& config, const HarvestModel& harvest) {
  const int K = config.num_pairs;
  const double inf = std::numeric_limits<double>::infinity();
  TauBounds tb;
  tb.zeta1.resize(K);
  tb.zeta2.resize(K);
  for (int k = 0; k < K; ++k) {
    const double f = harvest.harvest_rate(k, x);  // E_k(x, tau) / tau
    const double num1 = config.p_circuit[k] + config.amp_eff[k] * p[k] - config.e_initial[k];
    const double den1 = config.amp_eff[k] * p[k] + f;
    if (den1 > 0.0)
      tb.zeta1[k] = num1 / den1;
    else
      tb.zeta1[k] = (num1 <= 0.0) ? 0.0 : inf;
    tb.zeta2[k] = (f > 0.0) ? (config.e_max[k] - config.e_initial[k]) / f : inf;
  }
  return tb;
}

inline double optimal_tau_model(const VectorXcd& x, const VectorXd& p,
                                const NetworkConfig& config, const HarvestModel& harvest,
                                const std::string& context = "") {
  const TauBounds tb = compute_tau_bounds(x, p, config, harvest);
  const double tau = tb.lo();
  if (tau > tb.hi())
    throw TauInfeasible(tb.binding_pair(), tb.zeta1[tb.binding_pair()],
                        std::min(1.0, tb.zeta2[tb.cap_pair()]), context);
  return tau;
}

// Closed-form tau update: the smallest tau satisfying every C3 maximizes the
// remaining WIT time (1 - tau).
inline double optimal_tau(const VectorXcd& x, const VectorXd& p, const NetworkConfig& config,
                          const ChannelSet& channels) {
  const HarvestModel hm =
      make_harvest_model(config, channels, Combining::Coherent, infer_csi_mode(channels));
  return optimal_tau_model(x, p, config, hm, "");
}

struct TauInit {
  enum class Kind { Random, Fixed };
  Kind kind = Kind::Random;
  std::uint64_t seed = 0;
  double value = 0.25;
};

struct OuterOptions {
  double xi = 1e-5;            // outer stop on |g(k+1) - g(k)|
  int max_outer = 100;
  int max_inner = 50;
  double inner_tol = 1e-6;     // relative surrogate-objective change
  TauInit tau_init;
  bool baseline = false;       // power-only design (no phase freedom)
  double feasibility_tol = 1e-7;

  // Optional per-iteration surrogate validation (dominance + touching).
  bool check_surrogates = false;
  int check_points = 200;
  std::uint64_t check_seed = 20240901;
  SurrogateCheckReport* check_report = nullptr;
  double* worst_chain_violation = nullptr;  // expansion-point feasibility across iterations
};

struct RunOutput {
  DesignVariables vars;
  RunTrace trace;
};

namespace detail {

// Full-power start; phases aligned to the channel of the weakest harvester so
// that collaborative combining favors the pair most likely to bind C3.
inline VectorXcd aligned_waveform(const NetworkConfig& config, const HarvestModel& harvest,
                                  int align_to) {
  const int K = config.num_pairs;
  VectorXcd x(K);
  for (int j = 0; j < K; ++j) {
    cplx dir(1.0, 0.0);
    if (harvest.combining == Combining::Coherent) {
      const cplx hj = harvest.h_vec[align_to][j];
      if (std::abs(hj) > 0.0) dir = hj / std::abs(hj);
    }
    // kept a hair inside C2 so the unit-phase rounding cannot overshoot the cap
    x[j] = std::sqrt(config.p_max[j]) * (1.0 - 1e-12) * dir;
  }
  return x;
}

inline int weakest_harvester(const HarvestModel& harvest) {
  int kmin = 0;
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < harvest.num_pairs(); ++k) {
    const double n = harvest.h_vec[k].norm();
    if (n < best) {
      best = n;
      kmin = k;
    }
  }
  return kmin;
}

// Initial waveform with a fallback: when the tau interval at p = 0 is empty
// for the default alignment, try aligning to each pair and two fixed phase
// patterns, keeping the widest interval.
inline VectorXcd initial_waveform(const NetworkConfig& config, const HarvestModel& harvest) {
  const int K = config.num_pairs;
  const VectorXd p0 = VectorXd::Zero(K);
  VectorXcd x = aligned_waveform(config, harvest, weakest_harvester(harvest));
  TauBounds tb = compute_tau_bounds(x, p0, config, harvest);
  if (tb.feasible()) return x;
  double best_width = tb.hi() - tb.lo();
  auto consider = [&](const VectorXcd& cand) {
    const TauBounds tbk = compute_tau_bounds(cand, p0, config, harvest);
    const double w = tbk.hi() - tbk.lo();
    if (w > best_width) {
      best_width = w;
      x = cand;
    }
  };
  for (int k = 0; k < K; ++k) consider(aligned_waveform(config, harvest, k));
  VectorXcd flat(K), spread(K);
  for (int j = 0; j < K; ++j) {
    const double a = std::sqrt(config.p_max[j]) * (1.0 - 1e-12);
    flat[j] = a;
    spread[j] = std::polar(a, 2.399963229728653 * j);
  }
  consider(flat);
  consider(spread);
  return x;
}

// Largest equal-power vector satisfying every C3 at fixed (x, tau).
inline VectorXd equal_power_init(const NetworkConfig& config, const HarvestModel& harvest,
                                 const VectorXcd& x, double tau) {
  const int K = config.num_pairs;
  if (tau >= 1.0) return VectorXd::Zero(K);
  double pbar = std::numeric_limits<double>::infinity();
  for (int k = 0; k < K; ++k) {
    const double budget =
        harvest.energy(k, x, tau) + config.e_initial[k] - config.p_circuit[k];
    pbar = std::min(pbar, budget / (config.amp_eff[k] * (1.0 - tau)));
  }
  return VectorXd::Constant(K, std::max(0.0, pbar));
}

inline ConvexSubproblem build_subproblem(ProblemKind kind, const RateCoefficients& coeffs,
                                         const HarvestModel& harvest,
                                         const NetworkConfig& config,
                                         const DesignVariables& prev, double tau) {
  return kind == ProblemKind::SumThroughput
             ? build_sum_subproblem(coeffs, harvest, config, prev, tau)
             : build_maxmin_subproblem(coeffs, harvest, config, prev, tau);
}

// Largest min-rate achievable over the power box [0, pbar] at fixed tau:
// bisection on the rate target with the monotone interference fixed-point
// iteration. Returns the balanced power vector through p_out.
inline double maxmin_box_value(double tau, const VectorXd& pbar, const RateCoefficients& rc,
                               VectorXd* p_out) {
  const int K = rc.num_pairs();
  VectorXd p_best = VectorXd::Zero(K);
  double best = min_throughput(p_best, tau, rc);
  if (tau < 1.0) {
    double hi = std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k)
      hi = std::min(hi, (1.0 - tau) * std::log2(1.0 + rc.a[k] * pbar[k] / rc.sigma2[k]));
    double lo = 0.0;
    if (hi > 0.0) {
      for (int step = 0; step < 60; ++step) {
        const double alpha = 0.5 * (lo + hi);
        VectorXd s(K);
        for (int k = 0; k < K; ++k) s[k] = std::exp2(alpha / (1.0 - tau)) - 1.0;
        VectorXd p = VectorXd::Zero(K);
        bool feasible = true;
        for (int it = 0; it < 2000 && feasible; ++it) {
          VectorXd pn(K);
          double delta = 0.0;
          for (int k = 0; k < K; ++k) {
            if (rc.a[k] <= 0.0) {
              feasible = (s[k] <= 0.0);
              pn[k] = 0.0;
              continue;
            }
            pn[k] = s[k] * (rc.b.row(k).dot(p.transpose()) + rc.sigma2[k]) / rc.a[k];
            if (pn[k] > pbar[k] * (1.0 + 1e-12) + 1e-300) feasible = false;
            delta = std::max(delta, std::abs(pn[k] - p[k]) / std::max(pbar[k], 1e-300));
          }
          p = pn;
          if (delta < 1e-13) break;
        }
        if (feasible) {
          for (int k = 0; k < K; ++k)
            if (sinr(p, rc, k) < s[k] * (1.0 - 1e-9)) feasible = false;
        }
        if (feasible) {
          lo = alpha;
          const double v = min_throughput(p.cwiseMin(pbar), tau, rc);
          if (v > best) {
            best = v;
            p_best = p.cwiseMin(pbar);
          }
        } else {
          hi = alpha;
        }
      }
    }
  }
  if (p_out) *p_out = p_best;
  return best;
}

// tau block. With (x, p) fixed, any tau down to max_k zeta1 is feasible and
// the closed form picks the smallest. That alone cannot escape the fixed
// point where C3 is tight at the current tau, so the block first maximizes
// the exact objective over tau with the powers retuned inside the budget box
// [0, pbar(tau)] -- via the budget-scaled family for the sum problem and via
// exact rate balancing for max-min -- and then applies the closed-form slide
// at the new power vector. Every step ascends.
struct TauBlockResult {
  double tau;
  VectorXd p;
};

inline TauBlockResult tau_block_update(const NetworkConfig& config, const HarvestModel& harvest,
                                       const RateCoefficients& coeffs, ProblemKind kind,
                                       const DesignVariables& cur, const std::string& context) {
  const int K = config.num_pairs;
  VectorXd f(K);
  for (int k = 0; k < K; ++k) f[k] = harvest.harvest_rate(k, cur.x);

  double lo = 0.0, hi = 1.0;
  for (int k = 0; k < K; ++k) {
    const double need = config.p_circuit[k] - config.e_initial[k];
    if (f[k] > 0.0) {
      lo = std::max(lo, need / f[k]);
      hi = std::min(hi, (config.e_max[k] - config.e_initial[k]) / f[k]);
    } else if (need > 0.0) {
      lo = std::numeric_limits<double>::infinity();
    }
  }
  if (!(lo <= hi)) {
    // the storage cap can pinch the interval to a point up to roundoff
    if (lo - hi <= 1e-9 * std::max(1.0, lo)) {
      lo = hi;
    } else {
      const TauBounds tb = compute_tau_bounds(cur.x, VectorXd::Zero(K), config, harvest);
      throw TauInfeasible(tb.binding_pair(), tb.zeta1[tb.binding_pair()], hi, context);
    }
  }
  hi = std::min(hi, 1.0 - 1e-12);
  if (lo > hi) lo = hi;

  auto pbar = [&](double tau, int k) {
    return (tau * f[k] + config.e_initial[k] - config.p_circuit[k]) /
           (config.amp_eff[k] * (1.0 - tau));
  };
  VectorXd ratio(K);
  for (int k = 0; k < K; ++k) {
    const double pb = pbar(cur.tau, k);
    ratio[k] = (pb > 1e-300) ? std::min(1.0, cur.p[k] / pb) : 1.0;
  }
  auto power_at = [&](double tau) {
    VectorXd p(K);
    if (kind == ProblemKind::MaxMin) {
      VectorXd pb(K);
      for (int k = 0; k < K; ++k) pb[k] = std::max(0.0, pbar(tau, k));
      maxmin_box_value(tau, pb, coeffs, &p);
      return p;
    }
    for (int k = 0; k < K; ++k) p[k] = std::max(0.0, ratio[k] * pbar(tau, k));
    return p;
  };
  auto value = [&](double tau) {
    if (kind == ProblemKind::MaxMin) {
      VectorXd pb(K);
      for (int k = 0; k < K; ++k) pb[k] = std::max(0.0, pbar(tau, k));
      return maxmin_box_value(tau, pb, coeffs, nullptr);
    }
    return sum_throughput(power_at(tau), tau, coeffs);
  };

  double best_tau = std::clamp(cur.tau, lo, hi);
  double best_val = value(best_tau);
  const int grid = 512;
  for (int i = 0; i <= grid; ++i) {
    const double tau = lo + (hi - lo) * i / grid;
    const double v = value(tau);
    if (v > best_val) {
      best_val = v;
      best_tau = tau;
    }
  }
  // local ternary refinement around the best grid cell
  double a = std::max(lo, best_tau - (hi - lo) / grid);
  double b = std::min(hi, best_tau + (hi - lo) / grid);
  for (int it = 0; it < 80 && b - a > 1e-13; ++it) {
    const double m1 = a + (b - a) / 3.0, m2 = b - (b - a) / 3.0;
    if (value(m1) < value(m2))
      a = m1;
    else
      b = m2;
  }
  const double tau_mid = 0.5 * (a + b);
  if (value(tau_mid) > best_val) best_tau = tau_mid;

  TauBlockResult out;
  out.p = power_at(best_tau);
  // closed-form slide to the smallest feasible tau at the new powers; the
  // slide cannot exceed best_tau (the powers are feasible there), so clamp
  // instead of re-validating against the pinched storage bound
  const TauBounds tbp = compute_tau_bounds(cur.x, out.p, config, harvest);
  out.tau = std::min(best_tau, std::max(0.0, tbp.zeta1.maxCoeff()));
  return out;
}

}  // namespace detail

inline RunOutput run_design(const NetworkConfig& config, const ChannelSet& channels,
                            ProblemKind kind, const OuterOptions& outer,
                            const SolverOptions& solver_opts) {
  const Combining combining = outer.baseline ? Combining::Incoherent : Combining::Coherent;
  ProblemInstance inst = make_problem(config, channels, kind, combining);
  const RateCoefficients& coeffs = inst.coeffs;
  const HarvestModel& harvest = inst.harvest;

  RunOutput out;
  RunTrace& trace = out.trace;
  std::mt19937_64 check_rng(outer.check_seed);

  DesignVariables cur;
  cur.x = detail::initial_waveform(config, harvest);
  {
    const TauBounds tb =
        compute_tau_bounds(cur.x, VectorXd::Zero(config.num_pairs), config, harvest);
    if (!tb.feasible())
      throw TauInfeasible(tb.binding_pair(), tb.zeta1[tb.binding_pair()],
                          std::min(1.0, tb.zeta2[tb.cap_pair()]), "initialization");
    double tau = 0.0;
    if (outer.tau_init.kind == TauInit::Kind::Random) {
      std::mt19937_64 rng(outer.tau_init.seed);
      tau = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    } else {
      tau = outer.tau_init.value;
    }
    // Projection keeps a small interior offset: at the exact endpoint the
    // first subproblem has no strictly feasible point.
    const double off = 1e-3 * (tb.hi() - tb.lo());
    cur.tau = std::clamp(tau, tb.lo() + off, tb.hi() - off);
    if (!(cur.tau >= 0.0 && cur.tau <= 1.0)) cur.tau = std::clamp(tau, tb.lo(), tb.hi());
  }
  cur.p = detail::equal_power_init(config, harvest, cur.x, cur.tau);

  double g_prev = inst.objective(cur);
  trace.rows.push_back({0, 0, g_prev, g_prev, cur.tau, inst.max_violation(cur)});

  std::string termination = "max_outer_iterations";
  int outer_done = 0;
  for (int kappa = 1; kappa <= outer.max_outer; ++kappa) {
    // (x, p) block: surrogate iterations at fixed tau.
    double surr_prev = std::numeric_limits<double>::quiet_NaN();
    for (int i = 1; i <= outer.max_inner; ++i) {
      ConvexSubproblem sub =
          detail::build_subproblem(kind, coeffs, harvest, config, cur, cur.tau);
      if (outer.check_surrogates) {
        if (outer.check_report) {
          const SurrogateCheckReport rep =
              check_surrogate(sub, inst, cur.tau, outer.check_points, check_rng);
          outer.check_report->worst_dominance_slack =
              std::min(outer.check_report->worst_dominance_slack, rep.worst_dominance_slack);
          outer.check_report->worst_touching_gap =
              std::max(outer.check_report->worst_touching_gap, rep.worst_touching_gap);
          outer.check_report->points += rep.points;
        }
        if (outer.worst_chain_violation) {
          for (size_t ci = 0; ci < sub.constraints.size(); ++ci) {
            const double v =
                constraint_value(sub, sub.constraints[ci], sub.expansion) /
                sub.constraint_scales[ci];
            *outer.worst_chain_violation = std::max(*outer.worst_chain_violation, v);
          }
        }
      }

      const SolverResult res = solve(sub, solver_opts);
      const double surr_at_expansion = objective_value(sub, sub.expansion);
      double surr_new = objective_value(sub, res.z);
      DesignVariables cand = cur;
      if (res.status != SolveStatus::Infeasible && surr_new >= surr_at_expansion) {
        cand.x = sub.x_of(res.z);
        cand.p = sub.p_of(res.z);
      } else {
        surr_new = surr_at_expansion;  // keep the expansion point
      }
      cur = cand;
      trace.rows.push_back(
          {kappa, i, inst.objective(cur), surr_new, cur.tau, inst.max_violation(cur)});
      ++trace.inner_iterations;
      const bool converged =
          i >= 2 && std::abs(surr_new - surr_prev) <= outer.inner_tol * std::max(1.0, std::abs(surr_new));
      surr_prev = surr_new;
      if (converged) break;
    }

    // tau block: objective line search along the budget-scaled power family,
    // then the closed-form slide; kept only if it does not descend.
    {
      const detail::TauBlockResult tb = detail::tau_block_update(
          config, harvest, coeffs, kind, cur, "outer iteration " + std::to_string(kappa));
      DesignVariables cand = cur;
      cand.tau = tb.tau;
      cand.p = tb.p;
      if (inst.objective(cand) >= inst.objective(cur)) cur = cand;
    }
    const double g = inst.objective(cur);
    trace.rows.push_back({kappa, 0, g, g, cur.tau, inst.max_violation(cur)});
    outer_done = kappa;
    if (std::abs(g - g_prev) <= outer.xi) {
      termination = "objective_change_below_xi";
      break;
    }
    g_prev = g;
  }

  trace.termination = termination;
  trace.outer_iterations = outer_done;
  if (outer.baseline) {
    // Phases carry no information under incoherent combining.
    for (int j = 0; j < config.num_pairs; ++j) cur.x[j] = std::abs(cur.x[j]);
  }
  cur.feasible = inst.feasible(cur, outer.feasibility_tol);
  out.vars = cur;
  return out;
}

inline RunOutput run_sum_throughput(const NetworkConfig& config, const ChannelSet& channels,
                                    const OuterOptions& outer, const SolverOptions& solver) {
  return run_design(config, channels, ProblemKind::SumThroughput, outer, solver);
}

inline RunOutput run_maxmin(const NetworkConfig& config, const ChannelSet& channels,
                            const OuterOptions& outer, const SolverOptions& solver) {
  return run_design(config, channels, ProblemKind::MaxMin, outer, solver);
}

inline RunOutput run_baseline_power_only(const NetworkConfig& config, const ChannelSet& channels,
                                         const OuterOptions& outer,
                                         const SolverOptions& solver) {
  OuterOptions o = outer;
  o.baseline = true;
  return run_design(config, channels, ProblemKind::SumThroughput, o, solver);
}

}  // namespace wpic
