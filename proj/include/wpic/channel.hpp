#pragma once

// Rician channel realizations and the LMMSE estimate/error decomposition.
//
// Matrix orientation:
//   h(i, j) : phase-1 channel from ET_j to ER_i.
//   g(j, k) : phase-2 channel from IT_j to IR_k.
// With reciprocity (the default), g equals h element-wise.

#include <complex>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "wpic/model.hpp"

namespace wpic {

struct ChannelSet {
  MatrixXcd h;       // true phase-1 channels
  MatrixXcd g;       // true phase-2 channels
  MatrixXcd h_hat;   // estimates (equal to h under perfect CSI)
  MatrixXcd g_hat;
  MatrixXd sigma2_h_delta;  // per-link estimation error variances (zero if perfect)
  MatrixXd sigma2_g_delta;
  std::uint64_t seed = 0;

  int num_pairs() const { return static_cast<int>(h.rows()); }

  // Column vector h_k = [h*_{k,1}, ..., h*_{k,K}]^T so that the signal
  // received at ER_k is h_k^H x.
  VectorXcd h_col(int k) const { return h.row(k).conjugate().transpose(); }
  VectorXcd h_hat_col(int k) const { return h_hat.row(k).conjugate().transpose(); }
  // Error variances of the entries of h_k.
  VectorXd h_delta_var(int k) const { return sigma2_h_delta.row(k).transpose(); }

  bool imperfect() const {
    return sigma2_h_delta.size() > 0 &&
           (sigma2_h_delta.maxCoeff() > 0.0 || sigma2_g_delta.maxCoeff() > 0.0);
  }
};

namespace detail {

inline cplx draw_cscg(std::mt19937_64& rng) {
  // Circularly symmetric complex Gaussian with unit variance.
  static constexpr double kInvSqrt2 = 0.70710678118654752440;
  std::normal_distribution<double> n01(0.0, 1.0);
  const double re = n01(rng);
  const double im = n01(rng);
  return cplx(re * kInvSqrt2, im * kInvSqrt2);
}

}  // namespace detail

// Deterministic LoS amplitude of link (i, j); unit modulus by construction.
inline cplx los_component() { return cplx(1.0, 0.0); }

// NLoS (scattered) power of link (i, j).
inline double nlos_variance(const GeometryConfig& geo, int i, int j) {
  return geo.pathloss(i, j) / (geo.rician_factor + 1.0);
}

inline ChannelSet generate_channels(const NetworkConfig& config, std::uint64_t seed) {
  const int K = config.num_pairs;
  const auto& geo = config.geometry;
  ChannelSet cs;
  cs.seed = seed;
  cs.h.resize(K, K);
  cs.g.resize(K, K);
  std::mt19937_64 rng(seed);

  const double M = geo.rician_factor;
  const double los_w = std::sqrt(M / (M + 1.0));
  const double nlos_w = std::sqrt(1.0 / (M + 1.0));
  auto draw_matrix = [&](MatrixXcd& m) {
    for (int i = 0; i < K; ++i)
      for (int j = 0; j < K; ++j) {
        const double amp = std::sqrt(geo.pathloss(i, j));
        m(i, j) = (los_w * los_component() + nlos_w * detail::draw_cscg(rng)) * amp;
      }
  };
  draw_matrix(cs.h);
  if (geo.reciprocity)
    cs.g = cs.h;
  else
    draw_matrix(cs.g);

  cs.h_hat = cs.h;
  cs.g_hat = cs.g;
  cs.sigma2_h_delta = MatrixXd::Zero(K, K);
  cs.sigma2_g_delta = MatrixXd::Zero(K, K);
  return cs;
}

// Splits each true channel h into an LMMSE estimate and an independent error,
// h = h_hat + dh, with Var(h_hat) = rho^2 sigma^2 and Var(dh) = (1-rho^2) sigma^2
// over the NLoS part. Following the decomposition direction of the model, the
// returned true channel is re-formed as the rounded sum h_hat + dh (at most
// one ulp from the input), which makes the reconstruction identity bit-exact.
// rho = 1 returns the true channels verbatim.
inline ChannelSet apply_csi_error(const ChannelSet& truth, const GeometryConfig& geo,
                                  const CsiModel& csi, std::uint64_t seed) {
  const int K = truth.num_pairs();
  ChannelSet cs = truth;
  cs.seed = seed;
  std::mt19937_64 rng(seed);

  auto reform = [](double truth_v, double hat_v) {
    double cur = truth_v;
    for (int it = 0; it < 8; ++it) {
      const double d = cur - hat_v;
      const double re = hat_v + d;
      if (re == cur) break;
      cur = re;
    }
    return cur;
  };

  auto split = [&](const MatrixXcd& truth_m, MatrixXcd& true_out, MatrixXcd& hat,
                   MatrixXd& var_delta, double rho) {
    if (rho == 1.0) {
      true_out = truth_m;
      hat = truth_m;
      var_delta.setZero(K, K);
      return;
    }
    true_out.resize(K, K);
    hat.resize(K, K);
    var_delta.resize(K, K);
    const cplx los = los_component();
    const double M = geo.rician_factor;
    const double los_w = std::sqrt(M / (M + 1.0));
    for (int i = 0; i < K; ++i)
      for (int j = 0; j < K; ++j) {
        const double s2 = nlos_variance(geo, i, j);
        const cplx mean = los_w * los * std::sqrt(geo.pathloss(i, j));
        const cplx scattered = truth_m(i, j) - mean;
        const cplx w = detail::draw_cscg(rng);
        // Conditional LMMSE split: estimate = mean + rho^2 * scattered + noise,
        // error = truth - estimate. Marginals and orthogonality hold exactly.
        hat(i, j) = mean + rho * rho * scattered + rho * std::sqrt((1.0 - rho * rho) * s2) * w;
        true_out(i, j) = cplx(reform(truth_m(i, j).real(), hat(i, j).real()),
                              reform(truth_m(i, j).imag(), hat(i, j).imag()));
        var_delta(i, j) = (1.0 - rho * rho) * s2;
      }
  };
  split(truth.h, cs.h, cs.h_hat, cs.sigma2_h_delta, csi.rho_h);
  split(truth.g, cs.g, cs.g_hat, cs.sigma2_g_delta, csi.rho_g);
  return cs;
}

inline ChannelSet apply_csi_error(const ChannelSet& truth, const NetworkConfig& config,
                                  std::uint64_t seed) {
  return apply_csi_error(truth, config.geometry, config.csi, seed);
}

// A view of an imperfect-CSI channel set in which the estimates are treated
// as the exact channels (used by non-robust designs).
inline ChannelSet estimates_as_truth(const ChannelSet& cs) {
  ChannelSet v = cs;
  v.h = cs.h_hat;
  v.g = cs.g_hat;
  v.sigma2_h_delta.setZero(cs.num_pairs(), cs.num_pairs());
  v.sigma2_g_delta.setZero(cs.num_pairs(), cs.num_pairs());
  return v;
}

// --- channel dump files -----------------------------------------------------
// CSV with columns: matrix,row,col,re,im. Matrices: h,g,h_hat,g_hat,s2h,s2g.

inline void write_channel_csv(const ChannelSet& cs, std::ostream& os) {
  const int K = cs.num_pairs();
  os << "matrix,row,col,re,im\n";
  char buf[160];
  auto dump_c = [&](const char* name, const MatrixXcd& m) {
    for (int i = 0; i < K; ++i)
      for (int j = 0; j < K; ++j) {
        std::snprintf(buf, sizeof(buf), "%s,%d,%d,%.17g,%.17g\n", name, i, j, m(i, j).real(),
                      m(i, j).imag());
        os << buf;
      }
  };
  auto dump_r = [&](const char* name, const MatrixXd& m) {
    for (int i = 0; i < K; ++i)
      for (int j = 0; j < K; ++j) {
        std::snprintf(buf, sizeof(buf), "%s,%d,%d,%.17g,0\n", name, i, j, m(i, j));
        os << buf;
      }
  };
  dump_c("h", cs.h);
  dump_c("g", cs.g);
  dump_c("h_hat", cs.h_hat);
  dump_c("g_hat", cs.g_hat);
  dump_r("s2h", cs.sigma2_h_delta);
  dump_r("s2g", cs.sigma2_g_delta);
}

inline ChannelSet read_channel_csv(std::istream& is, int K) {
  ChannelSet cs;
  cs.h.setZero(K, K);
  cs.g.setZero(K, K);
  cs.h_hat.setZero(K, K);
  cs.g_hat.setZero(K, K);
  cs.sigma2_h_delta.setZero(K, K);
  cs.sigma2_g_delta.setZero(K, K);
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string name, tok;
    std::getline(ss, name, ',');
    std::getline(ss, tok, ',');
    const int i = std::stoi(tok);
    std::getline(ss, tok, ',');
    const int j = std::stoi(tok);
    std::getline(ss, tok, ',');
    const double re = std::stod(tok);
    std::getline(ss, tok, ',');
    const double im = std::stod(tok);
    if (i < 0 || i >= K || j < 0 || j >= K)
      throw std::invalid_argument("channel csv index out of range");
    if (name == "h")
      cs.h(i, j) = cplx(re, im);
    else if (name == "g")
      cs.g(i, j) = cplx(re, im);
    else if (name == "h_hat")
      cs.h_hat(i, j) = cplx(re, im);
    else if (name == "g_hat")
      cs.g_hat(i, j) = cplx(re, im);
    else if (name == "s2h")
      cs.sigma2_h_delta(i, j) = re;
    else if (name == "s2g")
      cs.sigma2_g_delta(i, j) = re;
    else
      throw std::invalid_argument("channel csv: unknown matrix '" + name + "'");
  }
  return cs;
}

}  // namespace wpic
