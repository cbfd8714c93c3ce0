#pragma once

// SINR and throughput evaluation, and the linear-form coefficients
// a_k, b_k, q_k = a_k + b_k consumed by the surrogate builders.

#include <stdexcept>

#include <Eigen/Dense>

#include "wpic/channel.hpp"
#include "wpic/model.hpp"

namespace wpic {

enum class CsiMode { Perfect, Imperfect };

// Per pair k:
//   a[k]     : direct-link gain multiplying p_k,
//   b.row(k) : interference gains (zero diagonal under perfect CSI,
//              error variance on every entry otherwise),
//   q.row(k) = a[k] e_k + b.row(k),
//   sigma2[k]: receiver noise variance.
struct RateCoefficients {
  VectorXd a;
  MatrixXd b;
  MatrixXd q;
  VectorXd sigma2;

  int num_pairs() const { return static_cast<int>(a.size()); }
  VectorXd b_row(int k) const { return b.row(k).transpose(); }
  VectorXd q_row(int k) const { return q.row(k).transpose(); }
};

inline RateCoefficients build_coefficients(const ChannelSet& channels,
                                           const NetworkConfig& config, CsiMode mode) {
  const int K = config.num_pairs;
  if (channels.num_pairs() != K)
    throw std::invalid_argument("channel set and config disagree on num_pairs");
  RateCoefficients rc;
  rc.a.resize(K);
  rc.b.setZero(K, K);
  rc.sigma2 = config.noise_var;
  const MatrixXcd& G = (mode == CsiMode::Imperfect) ? channels.g_hat : channels.g;
  for (int k = 0; k < K; ++k) {
    rc.a[k] = std::norm(G(k, k));
    for (int j = 0; j < K; ++j) {
      // g(j, k): IT_j -> IR_k
      double bkj = (j == k) ? 0.0 : std::norm(G(j, k));
      if (mode == CsiMode::Imperfect) bkj += channels.sigma2_g_delta(j, k);
      rc.b(k, j) = bkj;
    }
  }
  rc.q = rc.b;
  for (int k = 0; k < K; ++k) rc.q(k, k) += rc.a[k];
  return rc;
}

inline double sinr(const VectorXd& p, const RateCoefficients& rc, int k) {
  const double sig = rc.a[k] * p[k];
  const double denom = rc.b.row(k).dot(p.transpose()) + rc.sigma2[k];
  return sig / denom;
}

inline VectorXd throughput(const VectorXd& p, double tau, const RateCoefficients& rc) {
  const int K = rc.num_pairs();
  VectorXd r(K);
  for (int k = 0; k < K; ++k) r[k] = (1.0 - tau) * std::log2(1.0 + sinr(p, rc, k));
  return r;
}

inline double sum_throughput(const VectorXd& p, double tau, const RateCoefficients& rc) {
  return throughput(p, tau, rc).sum();
}

inline double min_throughput(const VectorXd& p, double tau, const RateCoefficients& rc) {
  return throughput(p, tau, rc).minCoeff();
}

}  // namespace wpic
