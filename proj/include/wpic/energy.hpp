#pragma once

// Harvested-energy models: linear, sigmoidal (nonlinear rectifier), and the
// average-sense model under channel estimation errors, together with the
// ridge weight that convexifies the sigmoidal model.

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "wpic/model.hpp"

namespace wpic {

// RF power collected at ER k for waveform x: |h_k^H x|^2.
inline double received_power(const VectorXcd& x, const VectorXcd& h_k) {
  const cplx y = h_k.adjoint() * x;
  return std::norm(y);
}

inline double harvested_energy_linear(const VectorXcd& x, const VectorXcd& h_k, double mu_k,
                                      double tau) {
  return mu_k * tau * received_power(x, h_k);
}

// Per-pair view of the sigmoidal harvester.
struct NonlinearPair {
  double n_sat;
  double a_tilde;
  double b_tilde;
  double omega;
};

inline NonlinearPair nl_pair(const NonlinearEhParams& p, int k) {
  return {p.n_sat[k], p.a_tilde[k], p.b_tilde[k], p.omega[k]};
}

// Harvest rate (energy per unit WET time) as a function of received power.
// Exactly zero at p_in = 0.
inline double harvest_rate_nonlinear(double p_in, const NonlinearPair& prm) {
  const double s = sigmoid(prm.a_tilde * (p_in - prm.b_tilde));
  return prm.n_sat * (s - prm.omega) / (1.0 - prm.omega);
}

// d(harvest rate)/d(p_in); nonnegative.
inline double harvest_rate_nonlinear_deriv(double p_in, const NonlinearPair& prm) {
  const double s = sigmoid(prm.a_tilde * (p_in - prm.b_tilde));
  return prm.n_sat * prm.a_tilde * s * (1.0 - s) / (1.0 - prm.omega);
}

inline double harvest_rate_nonlinear_deriv2(double p_in, const NonlinearPair& prm) {
  const double s = sigmoid(prm.a_tilde * (p_in - prm.b_tilde));
  return prm.n_sat * prm.a_tilde * prm.a_tilde * s * (1.0 - s) * (1.0 - 2.0 * s) /
         (1.0 - prm.omega);
}

inline double harvested_energy_nonlinear(const VectorXcd& x, const VectorXcd& h_k,
                                         const NonlinearPair& prm, double tau) {
  return tau * harvest_rate_nonlinear(received_power(x, h_k), prm);
}

// Average harvested energy when only the estimate h_hat and the isotropic
// error variance are known: mu * tau * (|h_hat^H x|^2 + sigma2 ||x||^2).
inline double harvested_energy_imperfect(const VectorXcd& x, const VectorXcd& h_hat_k,
                                         double sigma2_h_delta, double mu_k, double tau) {
  return mu_k * tau * (received_power(x, h_hat_k) + sigma2_h_delta * x.squaredNorm());
}

// Per-link error variance variant: mu * tau * (|h_hat^H x|^2 + sum_j d_j |x_j|^2).
inline double harvested_energy_imperfect_perlink(const VectorXcd& x, const VectorXcd& h_hat_k,
                                                 const VectorXd& delta_var, double mu_k,
                                                 double tau) {
  double iso = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) iso += delta_var[j] * std::norm(x[j]);
  return mu_k * tau * (received_power(x, h_hat_k) + iso);
}

// Smallest ridge weight making E^nl(x) + 0.5*beta*||x||^2 convex over the
// power-budget ball. Q_k = h_k h_k^H is rank one, so lambda_max(Q_k^2) = ||h_k||^4.
inline double beta_lower_bound(const NonlinearPair& prm, const VectorXcd& h_k, double tau,
                               double total_power_budget) {
  const double lam = std::pow(h_k.squaredNorm(), 2);
  const double curv = 4.0 * tau * prm.n_sat * prm.a_tilde * prm.a_tilde *
                      std::exp(prm.a_tilde * prm.b_tilde) / (1.0 - prm.omega);
  return curv * lam * total_power_budget;
}

// Row vector u such that the directional derivative of
// E^nl(x) + 0.5*beta*||x||^2 at x0 along d equals Re{u d}.
inline Eigen::RowVectorXcd nonlinear_ridge_gradient_row(const VectorXcd& x0, const VectorXcd& h_k,
                                                        const NonlinearPair& prm, double tau,
                                                        double beta) {
  const double p_in = received_power(x0, h_k);
  const double scale = 2.0 * tau * harvest_rate_nonlinear_deriv(p_in, prm);
  const cplx y = h_k.adjoint() * x0;  // h^H x0
  // x0^H (h h^H) = conj(y) h^H
  Eigen::RowVectorXcd u = scale * std::conj(y) * h_k.adjoint();
  u += beta * x0.adjoint();
  return u;
}

// Energy bookkeeping for one waveform across all pairs.
struct EnergyReport {
  VectorXd received;   // p^l_k [W]
  VectorXd harvested;  // E_k [J]
  EhModelKind model = EhModelKind::Linear;
};

}  // namespace wpic
