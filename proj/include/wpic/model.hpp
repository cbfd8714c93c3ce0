#pragma once

// Network configuration schema, unit handling, and the core decision/result
// types shared by the rest of the library.
//
// All quantities are stored in SI units (Watt, Joule, meter) after loading.
// The block duration is normalized to T = 1, so energies over a block and
// average powers coincide numerically.

#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "wpic/units.hpp"

namespace wpic {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using cplx = std::complex<double>;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerically stable logistic function.
inline double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

// Sigmoidal harvester parameters, one entry per pair.
// omega is derived from a_tilde and b_tilde at construction and must never be
// set independently.
struct NonlinearEhParams {
  VectorXd n_sat;    // saturation power N_k [W]
  VectorXd a_tilde;  // steepness [1/W]
  VectorXd b_tilde;  // input offset [W]
  VectorXd omega;    // derived: sigmoid(-a_tilde*b_tilde), in (0,1)

  void recompute_omega() {
    omega.resize(a_tilde.size());
    for (Eigen::Index k = 0; k < a_tilde.size(); ++k)
      omega[k] = sigmoid(a_tilde[k] * (0.0 - b_tilde[k]));
  }
};

// Estimation quality of the LMMSE channel estimator. rho = 1 means perfect
// CSI: all error variances are exactly zero.
struct CsiModel {
  double rho_h = 1.0;
  double rho_g = 1.0;

  double error_factor_h() const { return 1.0 - rho_h * rho_h; }
  double error_factor_g() const { return 1.0 - rho_g * rho_g; }
  bool perfect() const { return rho_h == 1.0 && rho_g == 1.0; }
};

struct GeometryConfig {
  double rician_factor = 3.0;    // M
  double ref_attenuation = 0.01; // c0, linear
  double ref_distance = 1.0;     // d0 [m]
  double pathloss_exp = 3.0;     // v
  bool reciprocity = true;

  // distance(i, j) = distance between ET_j and IT_i [m].
  MatrixXd distance;
  // Original node coordinates when the layout was given as positions.
  std::optional<MatrixXd> et_xy;  // K x 2
  std::optional<MatrixXd> it_xy;  // K x 2

  double pathloss(int i, int j) const {
    return ref_attenuation * std::pow(distance(i, j) / ref_distance, -pathloss_exp);
  }
};

enum class EhModelKind { Linear, NonLinear };

struct NetworkConfig {
  int num_pairs = 0;     // K
  VectorXd p_max;        // ET power budgets [W]
  VectorXd p_circuit;    // circuit consumption over the block [J]
  VectorXd amp_eff;      // PA efficiency, in (0,1]
  VectorXd mu;           // linear EH conversion constants
  VectorXd noise_var;    // receiver noise variances [W]
  VectorXd e_initial;    // residual energy [J]
  VectorXd e_max;        // storage capacity [J]
  EhModelKind eh_kind = EhModelKind::Linear;
  std::optional<NonlinearEhParams> eh_nl;
  CsiModel csi;
  GeometryConfig geometry;

  std::vector<std::string> load_warnings;

  double total_power_budget() const { return p_max.sum(); }
};

namespace detail {

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

// Reads a scalar-or-array field, broadcasting scalars to length K.
inline VectorXd read_broadcast(const nlohmann::json& j, const std::string& key, int K) {
  const auto& v = j.at(key);
  VectorXd out(K);
  if (v.is_number()) {
    out.setConstant(v.get<double>());
  } else if (v.is_array()) {
    require(static_cast<int>(v.size()) == K,
            "field '" + key + "' has length " + std::to_string(v.size()) +
                ", expected num_pairs = " + std::to_string(K));
    for (int k = 0; k < K; ++k) out[k] = v[k].get<double>();
  } else {
    throw ConfigError("field '" + key + "' must be a number or an array");
  }
  return out;
}

// Reads a field given in exactly one of several unit variants and converts to SI.
struct UnitVariant {
  std::string key;
  double (*convert)(double);
};

inline VectorXd read_with_units(const nlohmann::json& j, const std::vector<UnitVariant>& variants,
                                int K) {
  const UnitVariant* found = nullptr;
  for (const auto& v : variants) {
    if (j.contains(v.key)) {
      if (found != nullptr)
        throw ConfigError("fields '" + found->key + "' and '" + v.key +
                          "' are mutually exclusive; give exactly one");
      found = &v;
    }
  }
  std::string names;
  for (const auto& v : variants) names += (names.empty() ? "'" : " or '") + v.key + "'";
  require(found != nullptr, "missing field: one of " + names + " is required");
  VectorXd raw = read_broadcast(j, found->key, K);
  for (int k = 0; k < K; ++k) raw[k] = found->convert(raw[k]);
  return raw;
}

inline double identity_unit(double x) { return x; }
inline double dbm_unit(double x) { return dbm_to_watt(x); }
inline double uj_unit(double x) { return microjoule_to_joule(x); }
inline double uw_unit(double x) { return microwatt_to_watt(x); }
inline double db_unit(double x) { return db_to_linear(x); }

inline MatrixXd read_positions(const nlohmann::json& arr, int K, const std::string& key) {
  require(arr.is_array() && static_cast<int>(arr.size()) == K,
          "geometry field '" + key + "' must be an array of " + std::to_string(K) + " [x,y] pairs");
  MatrixXd xy(K, 2);
  for (int k = 0; k < K; ++k) {
    require(arr[k].is_array() && arr[k].size() == 2, "geometry entry '" + key + "[" +
                                                         std::to_string(k) + "]' must be [x,y]");
    xy(k, 0) = arr[k][0].get<double>();
    xy(k, 1) = arr[k][1].get<double>();
  }
  return xy;
}

}  // namespace detail

// Node layout of the standard symmetric scenario: ETs on a vertical line at
// x = 0 spanning span_m, ITs on a parallel line at x = link_distance_m.
inline void symmetric_line_layout(int K, double span_m, double link_distance_m, MatrixXd& et_xy,
                                  MatrixXd& it_xy) {
  et_xy.resize(K, 2);
  it_xy.resize(K, 2);
  for (int k = 0; k < K; ++k) {
    const double y = (K == 1) ? 0.0 : span_m * static_cast<double>(k) / (K - 1);
    et_xy(k, 0) = 0.0;
    et_xy(k, 1) = y;
    it_xy(k, 0) = link_distance_m;
    it_xy(k, 1) = y;
  }
}

inline MatrixXd distances_from_positions(const MatrixXd& et_xy, const MatrixXd& it_xy) {
  const int K = static_cast<int>(et_xy.rows());
  MatrixXd d(K, K);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j) d(i, j) = (it_xy.row(i) - et_xy.row(j)).norm();
  return d;
}

inline void validate_config(const NetworkConfig& c) {
  using detail::require;
  const int K = c.num_pairs;
  require(K >= 1, "num_pairs = " + std::to_string(K) + " out of [1, inf)");
  auto check_vec = [&](const VectorXd& v, const std::string& name, double lo, double hi,
                       bool lo_open) {
    require(v.size() == K, "field '" + name + "' has wrong length");
    for (int k = 0; k < K; ++k) {
      const bool ok = (lo_open ? v[k] > lo : v[k] >= lo) && v[k] <= hi;
      if (!ok) {
        std::ostringstream os;
        os << name << "[" << k << "] = " << v[k] << " out of " << (lo_open ? "(" : "[") << lo
           << ",";
        if (hi == std::numeric_limits<double>::infinity())
          os << "inf)";
        else
          os << hi << "]";
        throw ConfigError(os.str());
      }
    }
  };
  const double inf = std::numeric_limits<double>::infinity();
  check_vec(c.p_max, "p_max", 0.0, inf, false);
  check_vec(c.p_circuit, "p_circuit", 0.0, inf, false);
  check_vec(c.amp_eff, "amp_eff", 0.0, 1.0, true);
  check_vec(c.mu, "mu", 0.0, inf, false);
  check_vec(c.noise_var, "noise_var", 0.0, inf, true);
  check_vec(c.e_initial, "e_initial", 0.0, inf, false);
  check_vec(c.e_max, "e_max", 0.0, inf, false);
  for (int k = 0; k < K; ++k)
    require(c.e_initial[k] <= c.e_max[k],
            "e_initial[" + std::to_string(k) + "] exceeds e_max[" + std::to_string(k) + "]");
  require(c.csi.rho_h >= 0.0 && c.csi.rho_h <= 1.0, "csi.rho_h out of [0,1]");
  require(c.csi.rho_g >= 0.0 && c.csi.rho_g <= 1.0, "csi.rho_g out of [0,1]");
  if (c.eh_kind == EhModelKind::NonLinear) {
    require(c.eh_nl.has_value(), "eh_model 'nonlinear' requires harvester parameters");
    check_vec(c.eh_nl->n_sat, "n_sat", 0.0, inf, true);
    check_vec(c.eh_nl->a_tilde, "a_tilde", 0.0, inf, true);
    require(c.eh_nl->omega.size() == K, "omega not derived");
    for (int k = 0; k < K; ++k)
      require(c.eh_nl->omega[k] > 0.0 && c.eh_nl->omega[k] < 1.0,
              "omega[" + std::to_string(k) + "] out of (0,1)");
    require(c.csi.perfect(),
            "eh_model 'nonlinear' with imperfect CSI (rho < 1) is not supported");
  }
  require(c.geometry.rician_factor >= 0.0, "geometry.rician_factor out of [0,inf)");
  require(c.geometry.ref_attenuation > 0.0, "geometry.ref_attenuation out of (0,inf)");
  require(c.geometry.ref_distance > 0.0, "geometry.ref_distance out of (0,inf)");
  require(c.geometry.distance.rows() == K && c.geometry.distance.cols() == K,
          "geometry distance matrix has wrong shape");
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j)
      require(c.geometry.distance(i, j) > 0.0, "geometry distance (" + std::to_string(i) + "," +
                                                   std::to_string(j) + ") out of (0,inf)");
}

inline NetworkConfig load_config(const std::string& text) {
  using namespace detail;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  NetworkConfig c;
  try {
    c.num_pairs = j.at("num_pairs").get<int>();
    require(c.num_pairs >= 1, "num_pairs out of [1, inf)");
    const int K = c.num_pairs;

    c.p_max = read_with_units(j, {{"p_max_dbm", dbm_unit}, {"p_max_w", identity_unit}}, K);
    c.p_circuit =
        read_with_units(j, {{"p_circuit_dbm", dbm_unit}, {"p_circuit_j", identity_unit}}, K);
    c.amp_eff = j.contains("amp_eff") ? read_broadcast(j, "amp_eff", K) : VectorXd::Ones(K).eval();
    c.mu = j.contains("mu") ? read_broadcast(j, "mu", K) : VectorXd::Ones(K).eval();
    c.noise_var = read_with_units(j, {{"noise_dbm", dbm_unit}, {"noise_w", identity_unit}}, K);
    c.e_initial =
        read_with_units(j, {{"e_initial_uj", uj_unit}, {"e_initial_j", identity_unit}}, K);
    c.e_max = read_with_units(j, {{"e_max_uj", uj_unit}, {"e_max_j", identity_unit}}, K);

    const auto& eh = j.at("eh_model");
    const std::string kind = eh.at("type").get<std::string>();
    if (kind == "linear") {
      c.eh_kind = EhModelKind::Linear;
    } else if (kind == "nonlinear") {
      c.eh_kind = EhModelKind::NonLinear;
      NonlinearEhParams nl;
      nl.n_sat = read_with_units(eh, {{"n_sat_uw", uw_unit}, {"n_sat_w", identity_unit}}, K);
      nl.a_tilde = read_broadcast(eh, "a_tilde_per_w", K);
      nl.b_tilde = read_with_units(eh, {{"b_tilde_uw", uw_unit}, {"b_tilde_w", identity_unit}}, K);
      nl.recompute_omega();
      c.eh_nl = std::move(nl);
      for (int k = 0; k < K; ++k)
        if (c.mu[k] != 1.0) {
          c.load_warnings.push_back(
              "mu[" + std::to_string(k) +
              "] != 1 has no effect under the nonlinear EH model; check units");
          break;
        }
    } else {
      throw ConfigError("eh_model.type '" + kind + "' unknown (expected linear|nonlinear)");
    }

    if (j.contains("csi")) {
      c.csi.rho_h = j["csi"].value("rho_h", 1.0);
      c.csi.rho_g = j["csi"].value("rho_g", 1.0);
    }

    const auto& g = j.at("geometry");
    c.geometry.rician_factor = g.at("rician_factor").get<double>();
    if (g.contains("ref_attenuation_db"))
      c.geometry.ref_attenuation = db_to_linear(g["ref_attenuation_db"].get<double>());
    else
      c.geometry.ref_attenuation = g.at("ref_attenuation").get<double>();
    c.geometry.ref_distance = g.at("ref_distance_m").get<double>();
    c.geometry.pathloss_exp = g.at("pathloss_exp").get<double>();
    c.geometry.reciprocity = g.value("reciprocity", true);

    const auto& layout = g.at("layout");
    const std::string ltype = layout.at("type").get<std::string>();
    const bool has_positions = layout.contains("et_xy_m") && layout.contains("it_xy_m");
    if (ltype == "symmetric_line") {
      MatrixXd et, it;
      symmetric_line_layout(K, layout.at("span_m").get<double>(),
                            layout.at("link_distance_m").get<double>(), et, it);
      c.geometry.et_xy = et;
      c.geometry.it_xy = it;
      c.geometry.distance = distances_from_positions(et, it);
    } else if (ltype == "positions" || has_positions) {
      // Positions win when both positions and a distance matrix are given.
      c.geometry.et_xy = read_positions(layout.at("et_xy_m"), K, "et_xy_m");
      c.geometry.it_xy = read_positions(layout.at("it_xy_m"), K, "it_xy_m");
      c.geometry.distance = distances_from_positions(*c.geometry.et_xy, *c.geometry.it_xy);
    } else if (ltype == "distances") {
      const auto& dm = layout.at("d_m");
      require(dm.is_array() && static_cast<int>(dm.size()) == K,
              "layout.d_m must be a " + std::to_string(K) + "x" + std::to_string(K) + " matrix");
      c.geometry.distance.resize(K, K);
      for (int i = 0; i < K; ++i) {
        require(dm[i].is_array() && static_cast<int>(dm[i].size()) == K,
                "layout.d_m row " + std::to_string(i) + " has wrong length");
        for (int jj = 0; jj < K; ++jj) c.geometry.distance(i, jj) = dm[i][jj].get<double>();
      }
    } else {
      throw ConfigError("layout.type '" + ltype +
                        "' unknown (expected symmetric_line|positions|distances)");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config schema violation: ") + e.what());
  }

  validate_config(c);
  return c;
}

inline NetworkConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_config(ss.str());
}

// Serializes a config back to the schema using SI unit fields. Reloading the
// result reproduces every stored SI value bit-for-bit.
inline std::string save_config(const NetworkConfig& c) {
  nlohmann::json j;
  const int K = c.num_pairs;
  auto vec = [&](const VectorXd& v) {
    nlohmann::json a = nlohmann::json::array();
    for (int k = 0; k < K; ++k) a.push_back(v[k]);
    return a;
  };
  j["num_pairs"] = K;
  j["p_max_w"] = vec(c.p_max);
  j["p_circuit_j"] = vec(c.p_circuit);
  j["amp_eff"] = vec(c.amp_eff);
  j["mu"] = vec(c.mu);
  j["noise_w"] = vec(c.noise_var);
  j["e_initial_j"] = vec(c.e_initial);
  j["e_max_j"] = vec(c.e_max);
  if (c.eh_kind == EhModelKind::Linear) {
    j["eh_model"] = {{"type", "linear"}};
  } else {
    j["eh_model"] = {{"type", "nonlinear"},
                     {"n_sat_w", vec(c.eh_nl->n_sat)},
                     {"a_tilde_per_w", vec(c.eh_nl->a_tilde)},
                     {"b_tilde_w", vec(c.eh_nl->b_tilde)}};
  }
  j["csi"] = {{"rho_h", c.csi.rho_h}, {"rho_g", c.csi.rho_g}};
  nlohmann::json g;
  g["rician_factor"] = c.geometry.rician_factor;
  g["ref_attenuation"] = c.geometry.ref_attenuation;
  g["ref_distance_m"] = c.geometry.ref_distance;
  g["pathloss_exp"] = c.geometry.pathloss_exp;
  g["reciprocity"] = c.geometry.reciprocity;
  if (c.geometry.et_xy && c.geometry.it_xy) {
    nlohmann::json et = nlohmann::json::array(), it = nlohmann::json::array();
    for (int k = 0; k < K; ++k) {
      et.push_back({(*c.geometry.et_xy)(k, 0), (*c.geometry.et_xy)(k, 1)});
      it.push_back({(*c.geometry.it_xy)(k, 0), (*c.geometry.it_xy)(k, 1)});
    }
    g["layout"] = {{"type", "positions"}, {"et_xy_m", et}, {"it_xy_m", it}};
  } else {
    nlohmann::json dm = nlohmann::json::array();
    for (int i = 0; i < K; ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int jj = 0; jj < K; ++jj) row.push_back(c.geometry.distance(i, jj));
      dm.push_back(row);
    }
    g["layout"] = {{"type", "distances"}, {"d_m", dm}};
  }
  j["geometry"] = g;
  return j.dump(2);
}

// The decision triple: energy waveform x (one complex amplitude per ET,
// units sqrt(Watt)), uplink powers p [W], and WET time fraction tau.
struct DesignVariables {
  VectorXcd x;
  VectorXd p;
  double tau = 0.0;
  bool feasible = false;
};

// Per-iteration audit record of an optimization run. Rows with inner == 0 are
// written after the tau block of an outer iteration; rows with inner >= 1 are
// the surrogate iterations inside the (x, p) block.
struct RunTrace {
  struct Row {
    int outer = 0;
    int inner = 0;
    double objective_true = 0.0;
    double objective_surrogate = 0.0;
    double tau = 0.0;
    double max_violation = 0.0;
  };
  std::vector<Row> rows;
  std::string termination;
  int outer_iterations = 0;
  int inner_iterations = 0;

  std::vector<double> outer_objectives() const {
    std::vector<double> g;
    for (const auto& r : rows)
      if (r.inner == 0) g.push_back(r.objective_true);
    return g;
  }

  void write_csv(std::ostream& os) const {
    os << "outer_iter,inner_iter,objective_true,objective_surrogate,tau,max_violation\n";
    char buf[256];
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof(buf), "%d,%d,%.9g,%.9g,%.9g,%.3g\n", r.outer, r.inner,
                    r.objective_true, r.objective_surrogate, r.tau, r.max_violation);
      os << buf;
    }
  }
};

}  // namespace wpic
