#pragma once

// Brute-force verification at desk scale: exhaustive grid search over the
// joint design space for K <= 2, evaluating the original objective and
// constraints only (no surrogates). The dominant cost structure: the
// objective depends on the waveform only through the per-pair harvest rates,
// which are monotone budget enlargers, so each tau slice reduces the waveform
// grid to the Pareto staircase of feasible harvest-rate pairs before the
// power grid runs. A two-round coordinate search refines the best cell.

#include <algorithm>
#include <mutex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "wpic/problem.hpp"
#include "wpic/util.hpp"

namespace wpic {

struct OracleResolution {
  int tau_points = 200;
  int amp_points = 50;
  int phase_points = 72;
  int power_points = 50;
  int max_frontier = 256;
};

struct OracleResult {
  bool feasible = false;
  double objective = 0.0;
  DesignVariables vars;
};

struct OraclePair {
  OracleResult sum;
  OracleResult maxmin;
};

namespace oracle_detail {

struct Candidate {
  double tau = 0.0;
  double a1 = 0.0, a2 = 0.0, theta = 0.0;
  VectorXd p;
  double value = -std::numeric_limits<double>::infinity();
};

inline VectorXcd waveform_of(int K, double a1, double a2, double theta) {
  VectorXcd x(K);
  x[0] = cplx(a1, 0.0);
  if (K == 2) x[1] = std::polar(a2, theta);
  return x;
}

struct Evaluator {
  const NetworkConfig* cfg;
  const ProblemInstance* inst;

  // Budget cap per pair at (tau, harvest rates); negative means infeasible.
  double pbar(double tau, double f, int k) const {
    return (tau * f + cfg->e_initial[k] - cfg->p_circuit[k]) /
           (cfg->amp_eff[k] * (1.0 - tau));
  }

  bool tuple_feasible(double tau, const VectorXd& f, VectorXd& pb) const {
    if (!(tau >= 0.0 && tau < 1.0)) return false;
    const int K = cfg->num_pairs;
    pb.resize(K);
    for (int k = 0; k < K; ++k) {
      if (tau * f[k] + cfg->e_initial[k] > cfg->e_max[k] + 1e-18) return false;
      pb[k] = pbar(tau, f[k], k);
      if (pb[k] < 0.0) return false;
    }
    return true;
  }

  double rate_objective(const VectorXd& p, double tau, ProblemKind kind) const {
    return kind == ProblemKind::SumThroughput ? sum_throughput(p, tau, inst->coeffs)
                                              : min_throughput(p, tau, inst->coeffs);
  }

  // Clips p into the budget box implied by (tau, x); -inf when infeasible.
  double clipped_value(double tau, double a1, double a2, double theta, const VectorXd& p,
                       ProblemKind kind, VectorXd* p_used = nullptr) const {
    const int K = cfg->num_pairs;
    if (a1 < 0.0 || a1 * a1 > cfg->p_max[0] * (1.0 + 1e-12)) return -1e300;
    if (K == 2 && (a2 < 0.0 || a2 * a2 > cfg->p_max[1] * (1.0 + 1e-12))) return -1e300;
    const VectorXcd x = waveform_of(K, a1, a2, theta);
    VectorXd f(K), pb;
    for (int k = 0; k < K; ++k) f[k] = inst->harvest.harvest_rate(k, x);
    if (!tuple_feasible(tau, f, pb)) return -1e300;
    VectorXd pc = p.cwiseMax(0.0).cwiseMin(pb);
    if (p_used) *p_used = pc;
    return rate_objective(pc, tau, kind);
  }
};

inline void refine(const Evaluator& ev, Candidate& best, ProblemKind kind, double dtau,
                   double damp1, double damp2, double dphase, double dpow_frac) {
  const int K = ev.cfg->num_pairs;
  auto budget = [&](const Candidate& c, int k) {
    const VectorXcd x = waveform_of(K, c.a1, c.a2, c.theta);
    VectorXd f(K), pb;
    for (int j = 0; j < K; ++j) f[j] = ev.inst->harvest.harvest_rate(j, x);
    if (!ev.tuple_feasible(c.tau, f, pb)) return 0.0;
    return pb[k];
  };
  // successive rounds at 1/10, 1/100, 1/1000 of the original grid steps
  for (int round = 0; round < 3; ++round) {
    const double div = std::pow(10.0, round + 1);
    const double st = dtau / div;
    const double sa1 = damp1 / div, sa2 = damp2 / div;
    const double sph = dphase / div;
    const double spf = dpow_frac / div;
    bool improved = true;
    int guard = 0;
    while (improved && guard++ < 400) {
      improved = false;
      auto try_move = [&](double tau, double a1, double a2, double th, VectorXd p) {
        VectorXd pu;
        const double v = ev.clipped_value(tau, a1, a2, th, p, kind, &pu);
        if (v > best.value) {
          best = {tau, a1, a2, th, pu, v};
          improved = true;
        }
      };
      // Moves that change the budgets rescale p along with them, otherwise the
      // search stalls across the flat valley where tau and p trade off.
      auto try_budget_move = [&](double tau, double a1, double a2, double th) {
        Candidate cand{tau, a1, a2, th, best.p, 0.0};
        VectorXd p = best.p;
        for (int k = 0; k < K; ++k) {
          const double pb_old = budget(best, k);
          const double pb_new = budget(cand, k);
          if (pb_old > 1e-300) p[k] *= pb_new / pb_old;
        }
        try_move(tau, a1, a2, th, p);
        try_move(tau, a1, a2, th, best.p);
      };
      for (const double s : {+st, -st}) try_budget_move(best.tau + s, best.a1, best.a2, best.theta);
      for (const double s : {+sa1, -sa1})
        try_budget_move(best.tau, best.a1 + s, best.a2, best.theta);
      if (K == 2) {
        for (const double s : {+sa2, -sa2})
          try_budget_move(best.tau, best.a1, best.a2 + s, best.theta);
        for (const double s : {+sph, -sph})
          try_budget_move(best.tau, best.a1, best.a2, best.theta + s);
      }
      // diagonal moves break the wedge between tau and the waveform shape
      for (const double s : {+st, -st}) {
        for (const double sa : {+sa1, -sa1})
          try_budget_move(best.tau + s, best.a1 + sa, best.a2, best.theta);
        if (K == 2) {
          for (const double sa : {+sa2, -sa2})
            try_budget_move(best.tau + s, best.a1, best.a2 + sa, best.theta);
          for (const double sp : {+sph, -sph})
            try_budget_move(best.tau + s, best.a1, best.a2, best.theta + sp);
        }
      }
      for (int k = 0; k < K; ++k) {
        const double pb = budget(best, k);
        for (const double s : {+spf, -spf}) {
          VectorXd p = best.p;
          p[k] += s * std::max(pb, 1e-12);
          try_move(best.tau, best.a1, best.a2, best.theta, p);
        }
      }
    }
  }
  // Final stage: trace the value function V(tau) through the valley. Each tau
  // sample re-polishes the waveform shape and powers by coordinate search,
  // warm-started from the previous sample (continuation), which removes the
  // wedge between tau and the shape that single-coordinate moves cannot cross.
  {
    auto polish_at_tau = [&](Candidate& c) {
      auto attempt = [&](double a1, double a2, double th, const VectorXd& p) {
        VectorXd pu;
        const double v = ev.clipped_value(c.tau, a1, a2, th, p, kind, &pu);
        if (v > c.value) {
          c = {c.tau, a1, a2, th, pu, v};
          return true;
        }
        return false;
      };
      auto attempt_budget = [&](double a1, double a2, double th) {
        Candidate cand{c.tau, a1, a2, th, c.p, 0.0};
        VectorXd p = c.p;
        for (int k = 0; k < K; ++k) {
          const double pb_old = budget(c, k);
          const double pb_new = budget(cand, k);
          if (pb_old > 1e-300) p[k] *= pb_new / pb_old;
        }
        return attempt(a1, a2, th, p);
      };
      for (int round = 0; round < 3; ++round) {
        if (K == 2) {
          // the waveform trade-off at fixed tau is effectively one-dimensional
          // in the relative phase (amplitudes sit at their caps), so sweep it
          // densely and refine
          double best_th = c.theta;
          for (int i = 0; i < 360; ++i)
            if (attempt_budget(c.a1, c.a2, 2.0 * M_PI * i / 360.0)) best_th = c.theta;
          double lo_th = best_th - 2.0 * M_PI / 360.0, hi_th = best_th + 2.0 * M_PI / 360.0;
          for (int it = 0; it < 40; ++it) {
            const double m1 = lo_th + (hi_th - lo_th) / 3.0;
            const double m2 = hi_th - (hi_th - lo_th) / 3.0;
            const bool i1 = attempt_budget(c.a1, c.a2, m1);
            const bool i2 = attempt_budget(c.a1, c.a2, m2);
            if (i2 || (!i1 && c.theta >= m1))
              lo_th = m1;
            else
              hi_th = m2;
          }
        }
        // small amplitude probes (active only when the storage cap binds)
        for (const double s : {+damp1 / 100.0, -damp1 / 100.0})
          attempt_budget(c.a1 + s, c.a2, c.theta);
        if (K == 2)
          for (const double s : {+damp2 / 100.0, -damp2 / 100.0})
            attempt_budget(c.a1, c.a2 + s, c.theta);
        // power polish
        bool improved = true;
        int guard = 0;
        while (improved && guard++ < 120) {
          improved = false;
          for (int k = 0; k < K; ++k) {
            const double pb = budget(c, k);
            for (const double s : {+dpow_frac / 100.0, -dpow_frac / 100.0}) {
              VectorXd p = c.p;
              p[k] += s * std::max(pb, 1e-12);
              if (attempt(c.a1, c.a2, c.theta, p)) improved = true;
            }
          }
        }
      }
    };

    const double span = 4.0 * dtau / 10.0;
    const int npts = 160;
    Candidate walker = best;
    for (int dir : {+1, -1}) {
      Candidate w = best;
      for (int i = 1; i <= npts / 2; ++i) {
        const double tau = best.tau + dir * span * i / (npts / 2);
        if (!(tau > 0.0 && tau < 1.0)) break;
        Candidate cand{tau, w.a1, w.a2, w.theta, w.p, -1e300};
        VectorXd p = w.p;
        for (int k = 0; k < K; ++k) {
          const double pb_old = budget(w, k);
          Candidate probe{tau, w.a1, w.a2, w.theta, w.p, 0.0};
          const double pb_new = budget(probe, k);
          if (pb_old > 1e-300) p[k] *= pb_new / pb_old;
        }
        VectorXd pu;
        const double direct = ev.clipped_value(tau, w.a1, w.a2, w.theta, p, kind, &pu);
        if (direct > -1e300) {
          cand.value = direct;
          cand.p = pu;
        }
        // the carried shape may violate a harvest floor at the new tau; the
        // theta sweep inside the polish can repair it
        polish_at_tau(cand);
        if (cand.value <= -1e300) break;  // no feasible shape anywhere near
        w = cand;
        if (cand.value > walker.value) walker = cand;
      }
    }
    if (walker.value > best.value) best = walker;
    polish_at_tau(best);
  }
}

}  // namespace oracle_detail

// Exhaustive search for both objectives in one sweep (they share all grid
// evaluations). Throws for K > 2.
inline OraclePair grid_oracle_both(const NetworkConfig& config, const ChannelSet& channels,
                                   const OracleResolution& res = {}, int threads = 0) {
  using namespace oracle_detail;
  const int K = config.num_pairs;
  if (K > 2) throw std::invalid_argument("grid_oracle supports K <= 2");

  ProblemInstance inst = make_problem(config, channels, ProblemKind::SumThroughput);
  Evaluator ev{&config, &inst};

  // Stage 1: waveform grid -> harvest-rate tuples.
  const int na = res.amp_points;
  const int nth = (K == 2) ? res.phase_points : 1;
  struct XPoint {
    float f1, f2;
    int ia1, ia2, ith;
  };
  std::vector<XPoint> pts;
  pts.reserve(static_cast<size_t>(na) * (K == 2 ? na * nth : 1));
  const double amax1 = std::sqrt(config.p_max[0]);
  const double amax2 = (K == 2) ? std::sqrt(config.p_max[1]) : 0.0;
  for (int i1 = 0; i1 < na; ++i1) {
    const double a1 = amax1 * i1 / (na - 1);
    if (K == 1) {
      const VectorXcd x = waveform_of(K, a1, 0, 0);
      pts.push_back({static_cast<float>(inst.harvest.harvest_rate(0, x)), 0.f, i1, 0, 0});
      continue;
    }
    for (int i2 = 0; i2 < na; ++i2) {
      const double a2 = amax2 * i2 / (na - 1);
      for (int it = 0; it < nth; ++it) {
        const double th = 2.0 * M_PI * it / nth;
        const VectorXcd x = waveform_of(K, a1, a2, th);
        pts.push_back({static_cast<float>(inst.harvest.harvest_rate(0, x)),
                       static_cast<float>(inst.harvest.harvest_rate(1, x)), i1, i2, it});
      }
    }
  }
  // sorted by f1 descending for the per-tau staircase scan
  std::sort(pts.begin(), pts.end(), [](const XPoint& a, const XPoint& b) { return a.f1 > b.f1; });

  Candidate best_sum, best_min;
  std::mutex merge_mutex;

  const int ntau = res.tau_points;
  parallel_for(
      ntau,
      [&](int ti) {
        const double tau = (ti + 0.5) / ntau;  // interior grid; endpoints useless
        Candidate loc_sum, loc_min;
        // Pareto staircase of feasible harvest-rate tuples at this tau.
        std::vector<const XPoint*> frontier;
        double best_f2 = -1.0;
        VectorXd fv(K), pb;
        for (const XPoint& pt : pts) {
          fv[0] = pt.f1;
          if (K == 2) fv[1] = pt.f2;
          if (!ev.tuple_feasible(tau, fv, pb)) continue;
          if (K == 1) {
            frontier.push_back(&pt);
            break;  // sorted: first feasible has max f1
          }
          if (pt.f2 > best_f2) {
            best_f2 = pt.f2;
            frontier.push_back(&pt);
          }
        }
        if (frontier.empty()) return;
        if (static_cast<int>(frontier.size()) > res.max_frontier) {
          std::vector<const XPoint*> keep;
          keep.reserve(res.max_frontier);
          const double stride =
              static_cast<double>(frontier.size() - 1) / (res.max_frontier - 1);
          for (int i = 0; i < res.max_frontier; ++i)
            keep.push_back(frontier[static_cast<size_t>(i * stride)]);
          frontier.swap(keep);
        }

        const int np = res.power_points;
        VectorXd p(K);
        for (const XPoint* pt : frontier) {
          fv[0] = pt->f1;
          if (K == 2) fv[1] = pt->f2;
          if (!ev.tuple_feasible(tau, fv, pb)) continue;
          const double a1 = amax1 * pt->ia1 / (na - 1);
          const double a2 = (K == 2) ? amax2 * pt->ia2 / (na - 1) : 0.0;
          const double th = (K == 2) ? 2.0 * M_PI * pt->ith / nth : 0.0;
          for (int i1 = 0; i1 <= np; ++i1) {
            p[0] = pb[0] * i1 / np;
            const int lim2 = (K == 2) ? np : 0;
            for (int i2 = 0; i2 <= lim2; ++i2) {
              if (K == 2) p[1] = pb[1] * i2 / np;
              const VectorXd r = throughput(p, tau, inst.coeffs);
              const double vs = r.sum(), vm = r.minCoeff();
              if (vs > loc_sum.value) loc_sum = {tau, a1, a2, th, p, vs};
              if (vm > loc_min.value) loc_min = {tau, a1, a2, th, p, vm};
            }
          }
        }
        std::lock_guard<std::mutex> lk(merge_mutex);
        if (loc_sum.value > best_sum.value) best_sum = loc_sum;
        if (loc_min.value > best_min.value) best_min = loc_min;
      },
      threads);

  OraclePair out;
  auto finish = [&](Candidate& cand, ProblemKind kind, OracleResult& res_out) {
    if (!std::isfinite(cand.value) || cand.value < 0.0) {
      res_out.feasible = false;
      return;
    }
    refine(ev, cand, kind, 1.0 / ntau, amax1 / (na - 1),
           (K == 2) ? amax2 / (na - 1) : 0.0, 2.0 * M_PI / nth, 1.0 / res.power_points);
    res_out.feasible = true;
    res_out.objective = cand.value;
    res_out.vars.x = waveform_of(K, cand.a1, cand.a2, cand.theta);
    res_out.vars.p = cand.p;
    res_out.vars.tau = cand.tau;
    res_out.vars.feasible = true;
  };
  finish(best_sum, ProblemKind::SumThroughput, out.sum);
  finish(best_min, ProblemKind::MaxMin, out.maxmin);
  return out;
}

inline OracleResult grid_oracle(const NetworkConfig& config, const ChannelSet& channels,
                                ProblemKind problem, const OracleResolution& res = {},
                                int threads = 0) {
  const OraclePair both = grid_oracle_both(config, channels, res, threads);
  return problem == ProblemKind::SumThroughput ? both.sum : both.maxmin;
}

}  // namespace wpic
