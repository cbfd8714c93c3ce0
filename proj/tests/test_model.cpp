#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"
#include "wpic/model.hpp"

using namespace wpic;
using wpic_test::ConfigOptions;
using wpic_test::config_json;

TEST_CASE("dBm and dB conversions") {
  CHECK(dbm_to_watt(32.0) == Catch::Approx(1.585).epsilon(1e-3));
  CHECK(dbm_to_watt(-70.0) == Catch::Approx(1e-10).epsilon(1e-12));
  CHECK(dbm_to_watt(30.0) == Catch::Approx(1.0).margin(1e-15));
  CHECK(db_to_linear(-20.0) == Catch::Approx(0.01).epsilon(1e-12));
  CHECK(watt_to_dbm(dbm_to_watt(17.3)) == Catch::Approx(17.3).epsilon(1e-12));
}

TEST_CASE("load_config converts units and broadcasts scalars") {
  const NetworkConfig c = wpic_test::default_config({.num_pairs = 3});
  REQUIRE(c.num_pairs == 3);
  for (int k = 0; k < 3; ++k) {
    CHECK(c.p_max[k] == Catch::Approx(1.585).epsilon(1e-3));
    CHECK(c.noise_var[k] == Catch::Approx(1e-10).epsilon(1e-12));
    CHECK(c.p_circuit[k] == Catch::Approx(5.0119e-6).epsilon(1e-4));
    CHECK(c.e_max[k] == Catch::Approx(50e-6).epsilon(1e-12));
  }
  // symmetric line: adjacent spacing span/(K-1), direct links at 10 m
  CHECK(c.geometry.distance(0, 0) == Catch::Approx(10.0));
  CHECK(c.geometry.distance(0, 1) == Catch::Approx(std::sqrt(100.0 + 625.0)));
  CHECK(c.geometry.pathloss(0, 0) == Catch::Approx(1e-5).epsilon(1e-12));
}

TEST_CASE("invariant violations name the field and the bound") {
  auto broken = nlohmann::json::parse(config_json({}));
  broken["amp_eff"] = 1.5;
  try {
    load_config(broken.dump());
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("amp_eff") != std::string::npos);
    CHECK(msg.find("(0,1]") != std::string::npos);
  }

  broken = nlohmann::json::parse(config_json({}));
  broken["e_initial_uj"] = 60.0;  // above e_max
  CHECK_THROWS_AS(load_config(broken.dump()), ConfigError);

  broken = nlohmann::json::parse(config_json({}));
  broken["p_max_dbm"] = std::vector<double>{32.0};  // wrong length for K=2
  CHECK_THROWS_WITH(load_config(broken.dump()),
                    Catch::Matchers::ContainsSubstring("p_max_dbm"));

  broken = nlohmann::json::parse(config_json({}));
  broken["p_max_w"] = 1.0;  // both unit variants present
  CHECK_THROWS_WITH(load_config(broken.dump()),
                    Catch::Matchers::ContainsSubstring("mutually exclusive"));
}

TEST_CASE("nonlinear model requires perfect CSI and derives omega") {
  auto j = nlohmann::json::parse(config_json({.nonlinear = true}));
  const NetworkConfig c = load_config(j.dump());
  REQUIRE(c.eh_nl.has_value());
  for (int k = 0; k < c.num_pairs; ++k) {
    CHECK(c.eh_nl->omega[k] > 0.0);
    CHECK(c.eh_nl->omega[k] < 1.0);
    CHECK(c.eh_nl->omega[k] ==
          Catch::Approx(0.68792276422587922).epsilon(1e-12));
  }
  j["csi"] = {{"rho_h", 0.9}, {"rho_g", 0.9}};
  CHECK_THROWS_AS(load_config(j.dump()), ConfigError);
}

TEST_CASE("nonlinear model with mu != 1 warns about unit mismatch") {
  auto j = nlohmann::json::parse(config_json({.mu = 0.5, .nonlinear = true}));
  const NetworkConfig c = load_config(j.dump());
  REQUIRE_FALSE(c.load_warnings.empty());
  CHECK(c.load_warnings.front().find("mu") != std::string::npos);
}

TEST_CASE("round-trip through save_config preserves SI values bit-for-bit") {
  const NetworkConfig a = wpic_test::default_config({.num_pairs = 4, .rho = 0.85});
  const NetworkConfig b = load_config(save_config(a));
  REQUIRE(b.num_pairs == a.num_pairs);
  for (int k = 0; k < a.num_pairs; ++k) {
    CHECK(a.p_max[k] == b.p_max[k]);
    CHECK(a.p_circuit[k] == b.p_circuit[k]);
    CHECK(a.noise_var[k] == b.noise_var[k]);
    CHECK(a.e_initial[k] == b.e_initial[k]);
    CHECK(a.e_max[k] == b.e_max[k]);
    CHECK(a.mu[k] == b.mu[k]);
    CHECK(a.amp_eff[k] == b.amp_eff[k]);
  }
  CHECK(a.csi.rho_h == b.csi.rho_h);
  CHECK((a.geometry.distance - b.geometry.distance).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.geometry.ref_attenuation == b.geometry.ref_attenuation);

  auto nl = wpic_test::default_config({.nonlinear = true});
  const NetworkConfig nl2 = load_config(save_config(nl));
  CHECK(nl.eh_nl->n_sat[0] == nl2.eh_nl->n_sat[0]);
  CHECK(nl.eh_nl->b_tilde[0] == nl2.eh_nl->b_tilde[0]);
  CHECK(nl.eh_nl->omega[0] == nl2.eh_nl->omega[0]);
}

TEST_CASE("perfect CSI reduces error variances to exactly zero") {
  CsiModel csi;
  csi.rho_h = 1.0;
  csi.rho_g = 1.0;
  CHECK(csi.error_factor_h() == 0.0);
  CHECK(csi.error_factor_g() == 0.0);
  CHECK(csi.perfect());
  csi.rho_h = 0.9;
  CHECK(csi.error_factor_h() == Catch::Approx(0.19).epsilon(1e-12));
}

TEST_CASE("positions win over a distance matrix") {
  auto j = nlohmann::json::parse(config_json({}));
  j["geometry"]["layout"] = {
      {"type", "positions"},
      {"et_xy_m", {{0.0, 0.0}, {0.0, 30.0}}},
      {"it_xy_m", {{10.0, 0.0}, {10.0, 30.0}}},
      {"d_m", {{1.0, 1.0}, {1.0, 1.0}}},
  };
  const NetworkConfig c = load_config(j.dump());
  CHECK(c.geometry.distance(0, 0) == Catch::Approx(10.0));
  CHECK(c.geometry.distance(0, 1) == Catch::Approx(std::sqrt(100.0 + 900.0)));
}

TEST_CASE("run trace CSV serialization") {
  RunTrace tr;
  tr.rows.push_back({0, 0, 0.5, 0.5, 0.3, 0.0});
  tr.rows.push_back({1, 1, 0.7, 0.69, 0.3, 1e-12});
  std::ostringstream os;
  tr.write_csv(os);
  const std::string csv = os.str();
  CHECK(csv.find("outer_iter,inner_iter,objective_true,objective_surrogate,tau,max_violation") ==
        0);
  CHECK(csv.find("1,1,0.7,0.69,0.3,1e-12") != std::string::npos);
}
