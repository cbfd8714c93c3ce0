#pragma once

// Minorizer/majorizer construction and assembly of the convex subproblem
// solved at each inner iteration, for both design problems and all EH models.
//
// Subproblem variables are stacked real: z = [Re x; Im x; p; alpha?]. The
// objective is concave and every constraint convex in z by construction.

#include <cmath>
#include <optional>
#include <random>
#include <sstream>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "wpic/problem.hpp"

namespace wpic {

inline constexpr double kLn2 = 0.6931471805599453094;

// --- elementary minorizers ---------------------------------------------------

// Affine lower bound of -log2(b^T p + sigma2), tight at p_prev:
//   constant + bhat^T p <= -log2(b^T p + sigma2) for all p >= 0.
struct LogMinorizer {
  VectorXd bhat;
  double constant;
};

inline LogMinorizer log_minorizer(const VectorXd& b, const VectorXd& p_prev, double sigma2) {
  const double t0 = b.dot(p_prev) + sigma2;
  LogMinorizer m;
  m.bhat = -b / (t0 * kLn2);
  m.constant = -std::log2(t0) + b.dot(p_prev) / (t0 * kLn2);
  return m;
}

// Real affine form over complex x: value(x) = 2 Re{w^H x} + c.
struct AffineRealForm {
  VectorXcd w;
  double c;

  double value(const VectorXcd& x) const {
    const cplx v = w.adjoint() * x;
    return 2.0 * v.real() + c;
  }
};

// Affine lower bound of x^H A x (A Hermitian PSD), tight at x_prev.
inline AffineRealForm minorize_quadratic_form(const MatrixXcd& A, const VectorXcd& x_prev) {
  AffineRealForm f;
  f.w = A * x_prev;
  const cplx q0 = x_prev.adjoint() * A * x_prev;
  f.c = -q0.real();
  return f;
}

inline AffineRealForm quadratic_minorizer(const VectorXcd& h_k, const VectorXcd& x_prev) {
  const cplx y = h_k.adjoint() * x_prev;
  AffineRealForm f;
  f.w = h_k * y;  // (h h^H) x_prev
  f.c = -std::norm(y);
  return f;
}

// --- subproblem representation ----------------------------------------------

struct PowerCap {  // |x_k|^2 <= cap
  int k;
  double cap;
};

struct NonNegPower {  // -p_k <= 0
  int k;
};

// c0 + cx^T zx + cp^T p + ridge ||zx||^2 <= 0. Carries the linearized harvest
// constraint (ridge = beta/2 under the sigmoidal model, 0 otherwise) and
// doubles as a generic affine constraint.
struct LinearizedHarvest {
  int k;
  VectorXd cx;
  VectorXd cp;
  double ridge = 0.0;
  double c0 = 0.0;
};

struct StorageCap {  // zx^T Qr zx + c0 <= 0 (Qr includes mu*tau)
  int k;
  MatrixXd Qr;
  double c0;
};

// tau*Lambda(zx^T Qr zx) + 0.5*beta*||zx||^2 + cx^T zx + c0 <= 0,
// with Lambda the sigmoidal harvest rate; convex for beta above the ridge bound.
struct StorageCapNonlinear {
  int k;
  MatrixXd Qr;  // raw |h^H x|^2 quadratic
  NonlinearPair prm;
  double tau;
  double beta;
  VectorXd cx;
  double c0;
};

// alpha - wt*log2(q^T p + sigma2) + cp^T p + c0 <= 0.
struct RateFloor {
  int k;
  VectorXd q;
  double sigma2;
  double wt;  // 1 - tau
  VectorXd cp;
  double c0;
};

using Constraint =
    std::variant<PowerCap, NonNegPower, LinearizedHarvest, StorageCap, StorageCapNonlinear,
                 RateFloor>;

// wt * sum_k [log2(q_k^T p + sigma2_k) + bhat_k^T p] + constant.
struct SumRateObjective {
  std::vector<VectorXd> q;
  VectorXd sigma2;
  std::vector<VectorXd> bhat;
  double wt;
  double constant = 0.0;
};

struct EpigraphObjective {};

using Objective = std::variant<SumRateObjective, EpigraphObjective>;

struct ConvexSubproblem {
  int dim_x = 0;  // complex waveform entries
  int dim_p = 0;
  bool has_alpha = false;

  Objective objective;
  std::vector<Constraint> constraints;
  std::vector<double> constraint_scales;  // per-constraint magnitude for normalization

  VectorXd expansion;   // z0, feasible by construction
  double p_char = 1.0;  // characteristic uplink power for sampling/scaling

  int dim() const { return 2 * dim_x + dim_p + (has_alpha ? 1 : 0); }
  int ix_re(int j) const { return j; }
  int ix_im(int j) const { return dim_x + j; }
  int ip(int j) const { return 2 * dim_x + j; }
  int ia() const { return 2 * dim_x + dim_p; }

  VectorXcd x_of(const VectorXd& z) const {
    VectorXcd x(dim_x);
    for (int j = 0; j < dim_x; ++j) x[j] = cplx(z[ix_re(j)], z[ix_im(j)]);
    return x;
  }
  VectorXd p_of(const VectorXd& z) const { return z.segment(2 * dim_x, dim_p); }
  double alpha_of(const VectorXd& z) const { return has_alpha ? z[ia()] : 0.0; }

  VectorXd pack(const VectorXcd& x, const VectorXd& p, std::optional<double> alpha = {}) const {
    VectorXd z(dim());
    for (int j = 0; j < dim_x; ++j) {
      z[ix_re(j)] = x[j].real();
      z[ix_im(j)] = x[j].imag();
    }
    z.segment(2 * dim_x, dim_p) = p;
    if (has_alpha) z[ia()] = alpha.value_or(0.0);
    return z;
  }
};

// --- evaluation --------------------------------------------------------------

inline double objective_value(const ConvexSubproblem& s, const VectorXd& z) {
  return std::visit(
      [&](const auto& o) -> double {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, SumRateObjective>) {
          const VectorXd p = s.p_of(z);
          double v = o.constant;
          for (size_t k = 0; k < o.q.size(); ++k)
            v += o.wt * (std::log2(o.q[k].dot(p) + o.sigma2[k]) + o.bhat[k].dot(p));
          return v;
        } else {
          return s.alpha_of(z);
        }
      },
      s.objective);
}

inline void objective_grad(const ConvexSubproblem& s, const VectorXd& z, VectorXd& grad) {
  grad.setZero(s.dim());
  std::visit(
      [&](const auto& o) {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, SumRateObjective>) {
          const VectorXd p = s.p_of(z);
          for (size_t k = 0; k < o.q.size(); ++k) {
            const double t = o.q[k].dot(p) + o.sigma2[k];
            for (int j = 0; j < s.dim_p; ++j)
              grad[s.ip(j)] += o.wt * (o.q[k][j] / (t * kLn2) + o.bhat[k][j]);
          }
        } else {
          grad[s.ia()] = 1.0;
        }
      },
      s.objective);
}

// Adds -hess(F) (positive semidefinite) scaled by w into H.
inline void objective_neg_hess(const ConvexSubproblem& s, const VectorXd& z, double w,
                               Eigen::MatrixXd& H) {
  std::visit(
      [&](const auto& o) {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, SumRateObjective>) {
          const VectorXd p = s.p_of(z);
          for (size_t k = 0; k < o.q.size(); ++k) {
            const double t = o.q[k].dot(p) + o.sigma2[k];
            const double c = w * o.wt / (t * t * kLn2);
            for (int a = 0; a < s.dim_p; ++a)
              for (int b = 0; b < s.dim_p; ++b)
                H(s.ip(a), s.ip(b)) += c * o.q[k][a] * o.q[k][b];
          }
        }
      },
      s.objective);
}

inline double constraint_value(const ConvexSubproblem& s, const Constraint& c,
                               const VectorXd& z) {
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, PowerCap>) {
          const double xr = z[s.ix_re(f.k)], xi = z[s.ix_im(f.k)];
          return xr * xr + xi * xi - f.cap;
        } else if constexpr (std::is_same_v<T, NonNegPower>) {
          return -z[s.ip(f.k)];
        } else if constexpr (std::is_same_v<T, LinearizedHarvest>) {
          const auto zx = z.head(2 * s.dim_x);
          double v = f.c0 + f.cx.dot(zx) + f.cp.dot(s.p_of(z));
          if (f.ridge != 0.0) v += f.ridge * zx.squaredNorm();
          return v;
        } else if constexpr (std::is_same_v<T, StorageCap>) {
          const auto zx = z.head(2 * s.dim_x);
          return zx.dot(f.Qr * zx) + f.c0;
        } else if constexpr (std::is_same_v<T, StorageCapNonlinear>) {
          const auto zx = z.head(2 * s.dim_x);
          const double p_in = zx.dot(f.Qr * zx);
          return f.tau * harvest_rate_nonlinear(p_in, f.prm) +
                 0.5 * f.beta * zx.squaredNorm() + f.cx.dot(zx) + f.c0;
        } else {  // RateFloor
          const VectorXd p = s.p_of(z);
          return s.alpha_of(z) - f.wt * std::log2(f.q.dot(p) + f.sigma2) + f.cp.dot(p) + f.c0;
        }
      },
      c);
}

inline void constraint_grad(const ConvexSubproblem& s, const Constraint& c, const VectorXd& z,
                            VectorXd& grad) {
  grad.setZero(s.dim());
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, PowerCap>) {
          grad[s.ix_re(f.k)] = 2.0 * z[s.ix_re(f.k)];
          grad[s.ix_im(f.k)] = 2.0 * z[s.ix_im(f.k)];
        } else if constexpr (std::is_same_v<T, NonNegPower>) {
          grad[s.ip(f.k)] = -1.0;
        } else if constexpr (std::is_same_v<T, LinearizedHarvest>) {
          grad.head(2 * s.dim_x) = f.cx;
          if (f.ridge != 0.0) grad.head(2 * s.dim_x) += 2.0 * f.ridge * z.head(2 * s.dim_x);
          for (int j = 0; j < s.dim_p; ++j) grad[s.ip(j)] = f.cp[j];
        } else if constexpr (std::is_same_v<T, StorageCap>) {
          grad.head(2 * s.dim_x) = 2.0 * (f.Qr * z.head(2 * s.dim_x));
        } else if constexpr (std::is_same_v<T, StorageCapNonlinear>) {
          const auto zx = z.head(2 * s.dim_x);
          const VectorXd Qz = f.Qr * zx;
          const double p_in = zx.dot(Qz);
          const double d1 = f.tau * harvest_rate_nonlinear_deriv(p_in, f.prm);
          grad.head(2 * s.dim_x) = 2.0 * d1 * Qz + f.beta * zx + f.cx;
        } else {  // RateFloor
          const VectorXd p = s.p_of(z);
          const double t = f.q.dot(p) + f.sigma2;
          for (int j = 0; j < s.dim_p; ++j)
            grad[s.ip(j)] = -f.wt * f.q[j] / (t * kLn2) + f.cp[j];
          grad[s.ia()] = 1.0;
        }
      },
      c);
}

// Adds w * hess(f) into H.
inline void constraint_hess(const ConvexSubproblem& s, const Constraint& c, const VectorXd& z,
                            double w, Eigen::MatrixXd& H) {
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, PowerCap>) {
          H(s.ix_re(f.k), s.ix_re(f.k)) += 2.0 * w;
          H(s.ix_im(f.k), s.ix_im(f.k)) += 2.0 * w;
        } else if constexpr (std::is_same_v<T, LinearizedHarvest>) {
          if (f.ridge != 0.0)
            for (int j = 0; j < 2 * s.dim_x; ++j) H(j, j) += 2.0 * f.ridge * w;
        } else if constexpr (std::is_same_v<T, StorageCap>) {
          H.topLeftCorner(2 * s.dim_x, 2 * s.dim_x) += 2.0 * w * f.Qr;
        } else if constexpr (std::is_same_v<T, StorageCapNonlinear>) {
          const auto zx = z.head(2 * s.dim_x);
          const VectorXd Qz = f.Qr * zx;
          const double p_in = zx.dot(Qz);
          const double d1 = f.tau * harvest_rate_nonlinear_deriv(p_in, f.prm);
          const double d2 = f.tau * harvest_rate_nonlinear_deriv2(p_in, f.prm);
          auto blk = H.topLeftCorner(2 * s.dim_x, 2 * s.dim_x);
          blk += (2.0 * w * d1) * f.Qr;
          blk += (4.0 * w * d2) * (Qz * Qz.transpose());
          for (int j = 0; j < 2 * s.dim_x; ++j) H(j, j) += w * f.beta;
        } else if constexpr (std::is_same_v<T, RateFloor>) {
          const VectorXd p = s.p_of(z);
          const double t = f.q.dot(p) + f.sigma2;
          const double cc = w * f.wt / (t * t * kLn2);
          for (int a = 0; a < s.dim_p; ++a)
            for (int b = 0; b < s.dim_p; ++b) H(s.ip(a), s.ip(b)) += cc * f.q[a] * f.q[b];
        }
      },
      c);
}

// Real-composite representation of a Hermitian matrix: z^T M z == x^H A x.
inline MatrixXd real_composite(const MatrixXcd& A) {
  const int n = static_cast<int>(A.rows());
  MatrixXd M(2 * n, 2 * n);
  M.topLeftCorner(n, n) = A.real();
  M.topRightCorner(n, n) = -A.imag();
  M.bottomLeftCorner(n, n) = A.imag();
  M.bottomRightCorner(n, n) = A.real();
  return M;
}

// Gradient coefficients of 2 Re{w^H x} in [Re x; Im x] coordinates.
inline VectorXd real_linear_coeff(const VectorXcd& w) {
  const int n = static_cast<int>(w.size());
  VectorXd c(2 * n);
  for (int j = 0; j < n; ++j) {
    c[j] = 2.0 * w[j].real();
    c[n + j] = 2.0 * w[j].imag();
  }
  return c;
}

// Coefficients of Re{u x} for a row vector u (no conjugation).
inline VectorXd real_row_coeff(const Eigen::RowVectorXcd& u) {
  const int n = static_cast<int>(u.size());
  VectorXd c(2 * n);
  for (int j = 0; j < n; ++j) {
    c[j] = u[j].real();
    c[n + j] = -u[j].imag();
  }
  return c;
}

// --- builders ----------------------------------------------------------------

namespace detail {

// Shared constraint block: C2 power caps, p >= 0, surrogate C3, C4.
inline void add_common_constraints(ConvexSubproblem& sub, const RateCoefficients& coeffs,
                                   const HarvestModel& harvest, const NetworkConfig& config,
                                   const DesignVariables& prev, double tau) {
  const int K = config.num_pairs;
  const double one_mt = 1.0 - tau;
  for (int k = 0; k < K; ++k) {
    sub.constraints.push_back(PowerCap{k, config.p_max[k]});
    sub.constraint_scales.push_back(std::max(config.p_max[k], 1e-12));
  }
  for (int k = 0; k < K; ++k) {
    sub.constraints.push_back(NonNegPower{k});
    sub.constraint_scales.push_back(sub.p_char);
  }

  const bool nonlinear = harvest.kind == EhModelKind::NonLinear;
  for (int k = 0; k < K; ++k) {
    const double e_scale =
        std::max({config.e_max[k] - config.e_initial[k], config.p_circuit[k],
                  config.amp_eff[k] * one_mt * sub.p_char, 1e-15});
    if (!nonlinear) {
      // C3: pc + eps (1-tau) p_k - mu tau L(x) - E0 <= 0 with L the affine
      // minorizer of x^H A_k x at the expansion waveform.
      const AffineRealForm lin = minorize_quadratic_form(harvest.recv_quad[k], prev.x);
      LinearizedHarvest c3;
      c3.k = k;
      c3.cx = -harvest.mu[k] * tau * real_linear_coeff(lin.w);
      c3.cp = VectorXd::Zero(K);
      c3.cp[k] = config.amp_eff[k] * one_mt;
      c3.ridge = 0.0;
      c3.c0 = config.p_circuit[k] - config.e_initial[k] - harvest.mu[k] * tau * lin.c;
      sub.constraints.push_back(std::move(c3));
      sub.constraint_scales.push_back(e_scale);

      StorageCap c4;
      c4.k = k;
      c4.Qr = harvest.mu[k] * tau * real_composite(harvest.recv_quad[k]);
      c4.c0 = config.e_initial[k] - config.e_max[k];
      sub.constraints.push_back(std::move(c4));
      sub.constraint_scales.push_back(e_scale);
    } else {
      const NonlinearPair prm = nl_pair(*harvest.nl, k);
      const VectorXcd& hk = harvest.h_vec[k];
      const double beta =
          1.05 * beta_lower_bound(prm, hk, tau, config.total_power_budget());
      const Eigen::RowVectorXcd u =
          nonlinear_ridge_gradient_row(prev.x, hk, prm, tau, beta);
      const double e_prev = tau * harvest_rate_nonlinear(received_power(prev.x, hk), prm);
      const double x0_sq = prev.x.squaredNorm();
      const cplx ux0 = (u * prev.x)(0, 0);

      LinearizedHarvest c3;
      c3.k = k;
      c3.cx = -real_row_coeff(u);
      c3.cp = VectorXd::Zero(K);
      c3.cp[k] = config.amp_eff[k] * one_mt;
      c3.ridge = 0.5 * beta;
      c3.c0 = config.p_circuit[k] - config.e_initial[k] - e_prev - 0.5 * beta * x0_sq +
              ux0.real();
      sub.constraints.push_back(std::move(c3));
      sub.constraint_scales.push_back(e_scale);

      StorageCapNonlinear c4;
      c4.k = k;
      c4.Qr = real_composite(harvest.recv_quad[k]);
      c4.prm = prm;
      c4.tau = tau;
      c4.beta = beta;
      c4.cx = VectorXd(2 * K);
      for (int j = 0; j < K; ++j) {
        c4.cx[j] = -beta * prev.x[j].real();
        c4.cx[K + j] = -beta * prev.x[j].imag();
      }
      c4.c0 = 0.5 * beta * x0_sq + config.e_initial[k] - config.e_max[k];
      sub.constraints.push_back(std::move(c4));
      sub.constraint_scales.push_back(e_scale);
    }
  }
  (void)coeffs;
}

inline double characteristic_power(const HarvestModel& harvest, const NetworkConfig& config,
                                   const DesignVariables& prev, double tau) {
  const double one_mt = std::max(1.0 - tau, 1e-9);
  double p_char = 1e-12;
  for (int k = 0; k < config.num_pairs; ++k) {
    const double budget =
        harvest.energy(k, prev.x, tau) + config.e_initial[k] - config.p_circuit[k];
    const double pk = budget / (config.amp_eff[k] * one_mt);
    p_char = std::max({p_char, pk, prev.p[k]});
  }
  return p_char;
}

}  // namespace detail

inline ConvexSubproblem build_sum_subproblem(const RateCoefficients& coeffs,
                                             const HarvestModel& harvest,
                                             const NetworkConfig& config,
                                             const DesignVariables& prev, double tau) {
  const int K = config.num_pairs;
  ConvexSubproblem sub;
  sub.dim_x = K;
  sub.dim_p = K;
  sub.has_alpha = false;
  sub.p_char = detail::characteristic_power(harvest, config, prev, tau);

  SumRateObjective obj;
  obj.wt = 1.0 - tau;
  obj.sigma2 = coeffs.sigma2;
  obj.constant = 0.0;
  for (int k = 0; k < K; ++k) {
    obj.q.push_back(coeffs.q_row(k));
    const LogMinorizer m = log_minorizer(coeffs.b_row(k), prev.p, coeffs.sigma2[k]);
    obj.bhat.push_back(m.bhat);
    obj.constant += obj.wt * m.constant;
  }
  sub.objective = std::move(obj);

  detail::add_common_constraints(sub, coeffs, harvest, config, prev, tau);
  sub.expansion = sub.pack(prev.x, prev.p);
  return sub;
}

inline ConvexSubproblem build_maxmin_subproblem(const RateCoefficients& coeffs,
                                                const HarvestModel& harvest,
                                                const NetworkConfig& config,
                                                const DesignVariables& prev, double tau) {
  const int K = config.num_pairs;
  ConvexSubproblem sub;
  sub.dim_x = K;
  sub.dim_p = K;
  sub.has_alpha = true;
  sub.p_char = detail::characteristic_power(harvest, config, prev, tau);
  sub.objective = EpigraphObjective{};

  detail::add_common_constraints(sub, coeffs, harvest, config, prev, tau);

  const double wt = 1.0 - tau;
  for (int k = 0; k < K; ++k) {
    const VectorXd bk = coeffs.b_row(k);
    const LogMinorizer m = log_minorizer(bk, prev.p, coeffs.sigma2[k]);
    RateFloor c5;
    c5.k = k;
    c5.q = coeffs.q_row(k);
    c5.sigma2 = coeffs.sigma2[k];
    c5.wt = wt;
    c5.cp = -wt * m.bhat;
    c5.c0 = -wt * m.constant;  // = wt*log2(b^T p_prev + sigma2) + wt*bhat^T p_prev
    sub.constraints.push_back(std::move(c5));
    sub.constraint_scales.push_back(1.0);
  }

  const double alpha0 = min_throughput(prev.p, tau, coeffs);
  sub.expansion = sub.pack(prev.x, prev.p, alpha0);
  return sub;
}

// --- surrogate validity ------------------------------------------------------

// True (non-surrogate) counterpart of a surrogate constraint, for dominance
// checking: surrogate value >= true value must hold everywhere, with equality
// at the expansion point.
inline std::optional<double> true_constraint_value(const ConvexSubproblem& s,
                                                   const Constraint& c, const VectorXd& z,
                                                   const ProblemInstance& inst, double tau) {
  const NetworkConfig& cfg = *inst.config;
  return std::visit(
      [&](const auto& f) -> std::optional<double> {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, LinearizedHarvest>) {
          const VectorXcd x = s.x_of(z);
          const VectorXd p = s.p_of(z);
          return cfg.p_circuit[f.k] + cfg.amp_eff[f.k] * (1.0 - tau) * p[f.k] -
                 inst.harvest.energy(f.k, x, tau) - cfg.e_initial[f.k];
        } else if constexpr (std::is_same_v<T, StorageCapNonlinear>) {
          const VectorXcd x = s.x_of(z);
          return inst.harvest.energy(f.k, x, tau) + cfg.e_initial[f.k] - cfg.e_max[f.k];
        } else if constexpr (std::is_same_v<T, RateFloor>) {
          const VectorXd p = s.p_of(z);
          const double rate =
              f.wt * (std::log2(f.q.dot(p) + f.sigma2) -
                      std::log2(inst.coeffs.b_row(f.k).dot(p) + f.sigma2));
          return s.alpha_of(z) - rate;
        } else {
          return std::nullopt;  // exact constraints
        }
      },
      c);
}

// True objective matching the surrogate objective's constant folding.
inline double true_objective_value(const ConvexSubproblem& s, const VectorXd& z,
                                   const ProblemInstance& inst, double tau) {
  const VectorXd p = s.p_of(z);
  if (std::holds_alternative<SumRateObjective>(s.objective))
    return sum_throughput(p, tau, inst.coeffs);
  return s.alpha_of(z);
}

struct SurrogateCheckReport {
  double worst_dominance_slack = 0.0;  // most negative (true - surrogate) gap observed
  double worst_touching_gap = 0.0;     // |surrogate - true| at the expansion point
  int points = 0;
};

// Samples feasible points and verifies minorizer dominance plus the touching
// condition at the expansion point.
inline SurrogateCheckReport check_surrogate(const ConvexSubproblem& s,
                                            const ProblemInstance& inst, double tau,
                                            int n_points, std::mt19937_64& rng) {
  SurrogateCheckReport rep;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const NetworkConfig& cfg = *inst.config;

  auto record_point = [&](const VectorXd& z) {
    for (const auto& c : s.constraints) {
      const auto tv = true_constraint_value(s, c, z, inst, tau);
      if (!tv) continue;
      const double sv = constraint_value(s, c, z);
      // dominance: surrogate >= true
      rep.worst_dominance_slack = std::min(rep.worst_dominance_slack, sv - *tv);
    }
    const double so = objective_value(s, z);
    const double to = true_objective_value(s, z, inst, tau);
    if (std::holds_alternative<SumRateObjective>(s.objective))
      rep.worst_dominance_slack = std::min(rep.worst_dominance_slack, to - so);
    (void)to;
  };

  for (int it = 0; it < n_points; ++it) {
    VectorXcd x(s.dim_x);
    for (int j = 0; j < s.dim_x; ++j) {
      const double r = std::sqrt(unif(rng) * cfg.p_max[j]);
      const double ph = 2.0 * M_PI * unif(rng);
      x[j] = std::polar(r, ph);
    }
    VectorXd p(s.dim_p);
    for (int j = 0; j < s.dim_p; ++j) p[j] = unif(rng) * 1.5 * s.p_char;
    const VectorXd z =
        s.pack(x, p, s.has_alpha ? std::optional<double>(unif(rng)) : std::optional<double>{});
    record_point(z);
    ++rep.points;
  }

  // touching at the expansion point
  const VectorXd& z0 = s.expansion;
  for (const auto& c : s.constraints) {
    const auto tv = true_constraint_value(s, c, z0, inst, tau);
    if (!tv) continue;
    rep.worst_touching_gap =
        std::max(rep.worst_touching_gap, std::abs(constraint_value(s, c, z0) - *tv));
  }
  rep.worst_touching_gap = std::max(
      rep.worst_touching_gap,
      std::abs(objective_value(s, z0) - true_objective_value(s, z0, inst, tau)));
  return rep;
}

// --- debug dump ---------------------------------------------------------------

inline std::string dump_subproblem(const ConvexSubproblem& s) {
  std::ostringstream os;
  os.precision(12);
  os << "subproblem dim_x=" << s.dim_x << " dim_p=" << s.dim_p
     << " alpha=" << (s.has_alpha ? 1 : 0) << "\n";
  std::visit(
      [&](const auto& o) {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, SumRateObjective>) {
          os << "objective sum_rate wt=" << o.wt << " constant=" << o.constant << "\n";
          for (size_t k = 0; k < o.q.size(); ++k)
            os << "  term k=" << k << " q=[" << o.q[k].transpose() << "] sigma2=" << o.sigma2[k]
               << " bhat=[" << o.bhat[k].transpose() << "]\n";
        } else {
          os << "objective epigraph alpha\n";
        }
      },
      s.objective);
  for (size_t i = 0; i < s.constraints.size(); ++i) {
    os << "constraint " << i << " scale=" << s.constraint_scales[i] << " ";
    std::visit(
        [&](const auto& f) {
          using T = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<T, PowerCap>)
            os << "power_cap k=" << f.k << " cap=" << f.cap;
          else if constexpr (std::is_same_v<T, NonNegPower>)
            os << "nonneg_power k=" << f.k;
          else if constexpr (std::is_same_v<T, LinearizedHarvest>)
            os << "linearized_harvest k=" << f.k << " ridge=" << f.ridge << " c0=" << f.c0
               << " cx=[" << f.cx.transpose() << "] cp=[" << f.cp.transpose() << "]";
          else if constexpr (std::is_same_v<T, StorageCap>)
            os << "storage_cap k=" << f.k << " c0=" << f.c0;
          else if constexpr (std::is_same_v<T, StorageCapNonlinear>)
            os << "storage_cap_nl k=" << f.k << " beta=" << f.beta << " c0=" << f.c0;
          else
            os << "rate_floor k=" << f.k << " wt=" << f.wt << " c0=" << f.c0;
        },
        s.constraints[i]);
    os << "\n";
  }
  os << "expansion=[" << s.expansion.transpose() << "]\n";
  return os.str();
}

}  // namespace wpic
