#pragma once

// Ties the energy models to a channel realization and exposes the original
// (non-surrogate) objectives and constraints of the two design problems.

#include <memory>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "wpic/channel.hpp"
#include "wpic/energy.hpp"
#include "wpic/model.hpp"
#include "wpic/rate.hpp"

namespace wpic {

enum class ProblemKind { SumThroughput, MaxMin };

// How waveform amplitudes combine at a harvester. Coherent uses the full
// quadratic |h_k^H x|^2; Incoherent models power-only design, where cross
// terms average out and only |x_j|^2 matters.
enum class Combining { Coherent, Incoherent };

// Per-pair received-power quadratics A_k (Hermitian PSD) plus the EH mapping
// on top of them. Harvested energy is linear in tau for every model, so the
// tau-free harvest rate f_k(x) = E_k(x, tau)/tau is well defined.
struct HarvestModel {
  std::vector<MatrixXcd> recv_quad;  // A_k
  std::vector<VectorXcd> h_vec;      // h_k (rank-1 coherent case; used by the NL model)
  EhModelKind kind = EhModelKind::Linear;
  Combining combining = Combining::Coherent;
  VectorXd mu;
  std::optional<NonlinearEhParams> nl;

  int num_pairs() const { return static_cast<int>(recv_quad.size()); }

  double received(int k, const VectorXcd& x) const {
    const cplx v = x.adjoint() * recv_quad[k] * x;
    return v.real();
  }

  // E_k(x, tau) / tau.
  double harvest_rate(int k, const VectorXcd& x) const {
    const double p_in = received(k, x);
    if (kind == EhModelKind::NonLinear) return harvest_rate_nonlinear(p_in, nl_pair(*nl, k));
    return mu[k] * p_in;
  }

  double energy(int k, const VectorXcd& x, double tau) const {
    return tau * harvest_rate(k, x);
  }
};

inline HarvestModel make_harvest_model(const NetworkConfig& config, const ChannelSet& channels,
                                       Combining combining, CsiMode mode) {
  const int K = config.num_pairs;
  HarvestModel hm;
  hm.kind = config.eh_kind;
  hm.combining = combining;
  hm.mu = config.mu;
  hm.nl = config.eh_nl;
  hm.recv_quad.resize(K);
  hm.h_vec.resize(K);
  if (hm.kind == EhModelKind::NonLinear && combining == Combining::Incoherent)
    throw std::invalid_argument("power-only design is defined for the linear EH model");
  for (int k = 0; k < K; ++k) {
    const VectorXcd hk =
        (mode == CsiMode::Imperfect) ? channels.h_hat_col(k) : channels.h_col(k);
    hm.h_vec[k] = hk;
    MatrixXcd A;
    if (combining == Combining::Coherent) {
      A = hk * hk.adjoint();
    } else {
      A = MatrixXcd::Zero(K, K);
      for (int j = 0; j < K; ++j) A(j, j) = std::norm(hk[j]);
    }
    if (mode == CsiMode::Imperfect) {
      const VectorXd dv = channels.h_delta_var(k);
      for (int j = 0; j < K; ++j) A(j, j) += dv[j];
    }
    hm.recv_quad[k] = A;
  }
  return hm;
}

inline CsiMode infer_csi_mode(const ChannelSet& channels) {
  return channels.imperfect() ? CsiMode::Imperfect : CsiMode::Perfect;
}

// One concrete optimization problem: configuration, harvest model and rate
// coefficients for a given channel realization.
struct ProblemInstance {
  const NetworkConfig* config = nullptr;
  HarvestModel harvest;
  RateCoefficients coeffs;
  ProblemKind problem = ProblemKind::SumThroughput;

  int num_pairs() const { return config->num_pairs; }

  double objective(const DesignVariables& v) const {
    return problem == ProblemKind::SumThroughput ? sum_throughput(v.p, v.tau, coeffs)
                                                 : min_throughput(v.p, v.tau, coeffs);
  }

  VectorXd rates(const DesignVariables& v) const { return throughput(v.p, v.tau, coeffs); }

  // Signed residuals of the original constraints; positive means violated.
  // Order: C1 (tau range), then per pair C2, C3, C4, and p >= 0.
  VectorXd residuals(const DesignVariables& v) const {
    const int K = num_pairs();
    const NetworkConfig& c = *config;
    VectorXd r(2 + 4 * K);
    int idx = 0;
    r[idx++] = -v.tau;
    r[idx++] = v.tau - 1.0;
    for (int k = 0; k < K; ++k) {
      const double ek = harvest.energy(k, v.x, v.tau);
      r[idx++] = std::norm(v.x[k]) - c.p_max[k];
      r[idx++] = c.p_circuit[k] + c.amp_eff[k] * (1.0 - v.tau) * v.p[k] - ek - c.e_initial[k];
      r[idx++] = ek + c.e_initial[k] - c.e_max[k];
      r[idx++] = -v.p[k];
    }
    return r;
  }

  double max_violation(const DesignVariables& v) const {
    return std::max(0.0, residuals(v).maxCoeff());
  }

  bool feasible(const DesignVariables& v, double tol) const { return max_violation(v) <= tol; }
};

inline ProblemInstance make_problem(const NetworkConfig& config, const ChannelSet& channels,
                                    ProblemKind kind, Combining combining = Combining::Coherent) {
  const CsiMode mode = infer_csi_mode(channels);
  ProblemInstance pi;
  pi.config = &config;
  pi.harvest = make_harvest_model(config, channels, combining, mode);
  pi.coeffs = build_coefficients(channels, config, mode);
  pi.problem = kind;
  return pi;
}

}  // namespace wpic
