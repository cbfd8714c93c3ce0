#pragma once

// Shared fixtures for the test suites: canonical configs and small builders.

#include <sstream>
#include <string>

#include "wpic/channel.hpp"
#include "wpic/model.hpp"

namespace wpic_test {

struct ConfigOptions {
  int num_pairs = 2;
  double p_max_dbm = 32.0;
  double p_circuit_dbm = -23.0;
  double noise_dbm = -70.0;
  double e_initial_uj = 0.0;
  double e_max_uj = 50.0;
  double mu = 1.0;
  double amp_eff = 1.0;
  bool nonlinear = false;
  double rho = 1.0;
  double span_m = 50.0;
  double link_m = 10.0;
  bool reciprocity = true;
};

inline std::string config_json(const ConfigOptions& o = {}) {
  std::ostringstream os;
  os.precision(17);
  os << "{\n"
     << "  \"num_pairs\": " << o.num_pairs << ",\n"
     << "  \"p_max_dbm\": " << o.p_max_dbm << ",\n"
     << "  \"p_circuit_dbm\": " << o.p_circuit_dbm << ",\n"
     << "  \"amp_eff\": " << o.amp_eff << ",\n"
     << "  \"mu\": " << o.mu << ",\n"
     << "  \"noise_dbm\": " << o.noise_dbm << ",\n"
     << "  \"e_initial_uj\": " << o.e_initial_uj << ",\n"
     << "  \"e_max_uj\": " << o.e_max_uj << ",\n";
  if (o.nonlinear)
    os << "  \"eh_model\": {\"type\": \"nonlinear\", \"n_sat_uw\": 48.86, "
          "\"a_tilde_per_w\": 26515.46, \"b_tilde_uw\": -29.81},\n";
  else
    os << "  \"eh_model\": {\"type\": \"linear\"},\n";
  os << "  \"csi\": {\"rho_h\": " << o.rho << ", \"rho_g\": " << o.rho << "},\n"
     << "  \"geometry\": {\n"
     << "    \"rician_factor\": 3, \"ref_attenuation_db\": -20, \"ref_distance_m\": 1,\n"
     << "    \"pathloss_exp\": 3, \"reciprocity\": " << (o.reciprocity ? "true" : "false")
     << ",\n"
     << "    \"layout\": {\"type\": \"symmetric_line\", \"span_m\": " << o.span_m
     << ", \"link_distance_m\": " << o.link_m << "}\n"
     << "  }\n"
     << "}\n";
  return os.str();
}

inline wpic::NetworkConfig default_config(const ConfigOptions& o = {}) {
  return wpic::load_config(config_json(o));
}

// Bitwise equality for Eigen matrices/vectors.
template <typename A, typename B>
bool exact_equal(const A& a, const B& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (a(i, j) != b(i, j)) return false;
  return true;
}

// Hand-built channel set for deterministic algebraic tests.
inline wpic::ChannelSet manual_channels(const wpic::MatrixXcd& h, const wpic::MatrixXcd& g) {
  wpic::ChannelSet cs;
  cs.h = h;
  cs.g = g;
  cs.h_hat = h;
  cs.g_hat = g;
  const int K = static_cast<int>(h.rows());
  cs.sigma2_h_delta = wpic::MatrixXd::Zero(K, K);
  cs.sigma2_g_delta = wpic::MatrixXd::Zero(K, K);
  return cs;
}

}  // namespace wpic_test
