#pragma once

// Log-barrier interior-point solver for the inner concave-maximization
// subproblems: maximize a smooth concave objective subject to smooth convex
// inequality constraints over stacked real variables.
//
// Newton centering with backtracking line search; constraints are kept
// strictly feasible at every iterate. A slack-variable feasibility phase runs
// when the supplied start lies on the boundary.

#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "wpic/surrogate.hpp"

namespace wpic {

struct SolverOptions {
  double t0 = 1.0;              // initial barrier weight
  double mu_barrier = 20.0;     // barrier weight multiplier per stage
  double newton_tol = 1e-10;    // stop centering when lambda^2/2 drops below
  int max_newton = 60;          // Newton steps per centering
  double gap_target = 1e-8;     // terminate when m/t < gap_target
  double ls_alpha = 0.1;        // Armijo fraction
  double ls_beta = 0.5;         // backtracking factor
  int max_stages = 64;
  std::vector<double>* centering_trace = nullptr;  // test hook: barrier obj per step

  void validate() const {
    auto req = [](bool ok, const char* msg) {
      if (!ok) throw std::invalid_argument(msg);
    };
    req(t0 > 0.0, "solver t0 out of (0,inf)");
    req(mu_barrier > 1.0, "solver mu_barrier out of (1,inf)");
    req(newton_tol > 0.0, "solver newton_tol out of (0,inf)");
    req(max_newton > 0, "solver max_newton out of [1,inf)");
    req(gap_target > 0.0, "solver gap_target out of (0,inf)");
    req(ls_alpha > 0.0 && ls_alpha < 0.5, "solver ls_alpha out of (0,0.5)");
    req(ls_beta > 0.0 && ls_beta < 1.0, "solver ls_beta out of (0,1)");
  }
};

enum class SolveStatus { Optimal, MaxIters, Infeasible };

struct SolverResult {
  VectorXd z;
  double objective = 0.0;
  double gap = std::numeric_limits<double>::infinity();
  int newton_iterations = 0;
  int barrier_stages = 0;
  SolveStatus status = SolveStatus::MaxIters;
};

namespace detail {

// Generic view of "maximize obj s.t. f_i <= 0" consumed by the barrier loop.
struct BarrierView {
  int n = 0;
  int m = 0;
  std::function<double(const VectorXd&)> obj;
  std::function<void(const VectorXd&, VectorXd&)> obj_grad;
  std::function<void(const VectorXd&, MatrixXd&)> obj_neghess_add;
  std::function<double(const VectorXd&, int)> con;
  std::function<void(const VectorXd&, int, VectorXd&)> con_grad;
  std::function<void(const VectorXd&, int, double, MatrixXd&)> con_hess_add;
};

// All constraints strictly negative, evaluated in order with short-circuit so
// that domain guards (p >= 0) run before log-based constraints.
inline bool strictly_feasible_view(const BarrierView& v, const VectorXd& z) {
  for (int i = 0; i < v.m; ++i) {
    const double fi = v.con(z, i);
    if (!std::isfinite(fi) || fi >= 0.0) return false;
  }
  return true;
}

// Equilibrated LDLT solve of H d = -g with a ridge fallback.
inline bool solve_newton_system(const MatrixXd& H, const VectorXd& g, VectorXd& d) {
  const int n = static_cast<int>(H.rows());
  VectorXd scale(n);
  for (int i = 0; i < n; ++i) scale[i] = 1.0 / std::sqrt(std::max(H(i, i), 1e-300));
  MatrixXd Hs = scale.asDiagonal() * H * scale.asDiagonal();
  const VectorXd gs = scale.asDiagonal() * g;
  double ridge = 0.0;
  for (int attempt = 0; attempt < 4; ++attempt) {
    MatrixXd Ht = Hs;
    if (ridge > 0.0) Ht.diagonal().array() += ridge;
    Eigen::LDLT<MatrixXd> ldlt(Ht);
    if (ldlt.info() == Eigen::Success) {
      const VectorXd y = ldlt.solve(-gs);
      if (y.allFinite()) {
        d = scale.asDiagonal() * y;
        if (g.dot(d) < 0.0) return true;  // descent direction for the minimization
      }
    }
    ridge = (ridge == 0.0) ? 1e-12 : ridge * 100.0;
  }
  return false;
}

// Barrier function Phi_t(z) = -t*obj(z) - sum log(-f_i(z)); minimized.
inline double barrier_value(const BarrierView& v, double t, const VectorXd& z) {
  double phi = -t * v.obj(z);
  for (int i = 0; i < v.m; ++i) phi -= std::log(-v.con(z, i));
  return phi;
}

struct CenterOutcome {
  int steps = 0;
  bool stalled = false;
};

inline CenterOutcome newton_center(const BarrierView& v, double t, VectorXd& z,
                                   const SolverOptions& opts,
                                   const std::function<bool(const VectorXd&)>& early_stop) {
  CenterOutcome out;
  VectorXd grad(v.n), cg(v.n), d(v.n);
  MatrixXd H(v.n, v.n);
  for (int it = 0; it < opts.max_newton; ++it) {
    // gradient and Hessian of Phi_t
    v.obj_grad(z, grad);
    grad *= -t;
    H.setZero();
    v.obj_neghess_add(z, H);
    H *= t;
    for (int i = 0; i < v.m; ++i) {
      const double fi = v.con(z, i);
      v.con_grad(z, i, cg);
      grad += cg / (-fi);
      H += (cg * cg.transpose()) / (fi * fi);
      v.con_hess_add(z, i, 1.0 / (-fi), H);
    }

    if (!solve_newton_system(H, grad, d)) {
      out.stalled = true;
      return out;
    }
    const double decrement = -grad.dot(d);  // lambda^2
    if (0.5 * decrement <= opts.newton_tol) return out;

    const double phi0 = barrier_value(v, t, z);
    double step = 1.0;
    bool moved = false;
    while (step > 1e-16) {
      const VectorXd zt = z + step * d;
      if (strictly_feasible_view(v, zt)) {
        const double phit = barrier_value(v, t, zt);
        if (std::isfinite(phit) && phit <= phi0 + opts.ls_alpha * step * grad.dot(d)) {
          z = zt;
          moved = true;
          break;
        }
      }
      step *= opts.ls_beta;
    }
    ++out.steps;
    if (opts.centering_trace) opts.centering_trace->push_back(barrier_value(v, t, z));
    if (!moved) {
      out.stalled = true;
      return out;
    }
    if (early_stop && early_stop(z)) return out;
  }
  return out;
}

// Minimizes the worst normalized constraint violation via a slack variable;
// returns true when a strictly feasible point was found (written into z).
// A generous trust-region box around the start keeps the feasibility problem
// bounded: without it, coordinates that appear one-sidedly (the epigraph
// variable) drift to -inf along the barrier.
inline bool phase_one(const BarrierView& v, const std::vector<double>& scales, VectorXd& z,
                      const SolverOptions& opts) {
  const int n = v.n;
  const VectorXd z0 = z;
  VectorXd radius(n);
  for (int j = 0; j < n; ++j) radius[j] = 100.0 * (1.0 + std::abs(z0[j]));

  BarrierView p1;
  p1.n = n + 1;
  p1.m = v.m + 2 * n;
  p1.obj = [](const VectorXd& w) { return -w[w.size() - 1]; };
  p1.obj_grad = [](const VectorXd& w, VectorXd& g) {
    g.setZero(w.size());
    g[w.size() - 1] = -1.0;
  };
  p1.obj_neghess_add = [](const VectorXd&, MatrixXd&) {};
  p1.con = [&, n](const VectorXd& w, int i) {
    if (i < v.m) return v.con(w.head(n), i) - w[n] * scales[i];
    const int j = (i - v.m) / 2;
    const double sgn = ((i - v.m) % 2 == 0) ? 1.0 : -1.0;
    return sgn * (w[j] - z0[j]) - radius[j];
  };
  p1.con_grad = [&, n](const VectorXd& w, int i, VectorXd& g) {
    g.setZero(n + 1);
    if (i < v.m) {
      VectorXd gz(n);
      v.con_grad(w.head(n), i, gz);
      g.head(n) = gz;
      g[n] = -scales[i];
    } else {
      const int j = (i - v.m) / 2;
      g[j] = ((i - v.m) % 2 == 0) ? 1.0 : -1.0;
    }
  };
  p1.con_hess_add = [&, n](const VectorXd& w, int i, double wgt, MatrixXd& H) {
    if (i < v.m) {
      MatrixXd Hz = MatrixXd::Zero(n, n);
      v.con_hess_add(w.head(n), i, wgt, Hz);
      H.topLeftCorner(n, n) += Hz;
    }
  };

  double worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < v.m; ++i) {
    const double fi = v.con(z, i);
    if (!std::isfinite(fi)) return false;
    worst = std::max(worst, fi / scales[i]);
  }
  const double margin = 1e-9;
  if (worst <= -margin) return true;

  VectorXd w(n + 1);
  w.head(n) = z;
  w[n] = worst + 1.0;

  auto feasible_enough = [&](const VectorXd& wc) {
    double wv = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < v.m; ++i) wv = std::max(wv, v.con(wc.head(n), i) / scales[i]);
    return wv <= -margin;
  };

  SolverOptions p1opts = opts;
  p1opts.centering_trace = nullptr;
  double t = opts.t0;
  for (int stage = 0; stage < opts.max_stages; ++stage) {
    newton_center(p1, t, w, p1opts, feasible_enough);
    if (feasible_enough(w)) {
      z = w.head(n);
      return true;
    }
    if (static_cast<double>(p1.m) / t < 1e-10) break;
    t *= opts.mu_barrier;
  }
  // Accept any strict interior point even below the preferred margin.
  double final_worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < v.m; ++i) final_worst = std::max(final_worst, v.con(w.head(n), i) / scales[i]);
  if (final_worst < 0.0) {
    z = w.head(n);
    return true;
  }
  return false;
}

// Deterministic inward perturbation of a boundary start: shrink the waveform
// and powers a hair and drop the epigraph variable below its touching value.
inline VectorXd nudged_start(const ConvexSubproblem& sub) {
  VectorXd z = sub.expansion;
  for (int j = 0; j < 2 * sub.dim_x; ++j) z[j] *= (1.0 - 1e-9);
  for (int j = 0; j < sub.dim_p; ++j) z[sub.ip(j)] *= (1.0 - 1e-6);
  if (sub.has_alpha) z[sub.ia()] -= 1e-6 * std::max(1.0, std::abs(z[sub.ia()]));
  return z;
}

inline BarrierView make_view(const ConvexSubproblem& sub) {
  BarrierView v;
  v.n = sub.dim();
  v.m = static_cast<int>(sub.constraints.size());
  v.obj = [&sub](const VectorXd& z) { return objective_value(sub, z); };
  v.obj_grad = [&sub](const VectorXd& z, VectorXd& g) { objective_grad(sub, z, g); };
  v.obj_neghess_add = [&sub](const VectorXd& z, MatrixXd& H) {
    objective_neg_hess(sub, z, 1.0, H);
  };
  v.con = [&sub](const VectorXd& z, int i) {
    return constraint_value(sub, sub.constraints[i], z);
  };
  v.con_grad = [&sub](const VectorXd& z, int i, VectorXd& g) {
    constraint_grad(sub, sub.constraints[i], z, g);
  };
  v.con_hess_add = [&sub](const VectorXd& z, int i, double w, MatrixXd& H) {
    constraint_hess(sub, sub.constraints[i], z, w, H);
  };
  return v;
}

}  // namespace detail

inline SolverResult solve(const ConvexSubproblem& sub, const SolverOptions& opts) {
  opts.validate();
  detail::BarrierView view = detail::make_view(sub);
  SolverResult res;

  auto margin_of = [&](const VectorXd& z) {
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < view.m; ++i) {
      const double fi = view.con(z, i);
      if (!std::isfinite(fi)) return std::numeric_limits<double>::infinity();
      worst = std::max(worst, fi / sub.constraint_scales[i]);
    }
    return worst;
  };

  res.z = sub.expansion;
  if (margin_of(res.z) > -1e-12) {
    const VectorXd nudged = detail::nudged_start(sub);
    if (margin_of(nudged) <= -1e-12) {
      res.z = nudged;
    } else if (!detail::phase_one(view, sub.constraint_scales, res.z, opts)) {
      res.status = SolveStatus::Infeasible;
      res.z = sub.expansion;
      res.objective = objective_value(sub, res.z);
      return res;
    }
  }

  double t = opts.t0;
  int consecutive_stalls = 0;
  for (int stage = 0; stage < opts.max_stages; ++stage) {
    const auto out = detail::newton_center(view, t, res.z, opts, nullptr);
    res.newton_iterations += out.steps;
    ++res.barrier_stages;
    res.gap = static_cast<double>(view.m) / t;
    if (res.gap < opts.gap_target) break;
    consecutive_stalls = (out.stalled && out.steps == 0) ? consecutive_stalls + 1 : 0;
    if (consecutive_stalls >= 2) break;  // at the numerical floor
    t *= opts.mu_barrier;
  }
  res.status = (res.gap < opts.gap_target) ? SolveStatus::Optimal : SolveStatus::MaxIters;
  res.objective = objective_value(sub, res.z);
  return res;
}

}  // namespace wpic
