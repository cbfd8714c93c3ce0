#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "support.hpp"
#include "wpic/solver.hpp"

using namespace wpic;

namespace {

// maximize sum_i log2(p_i) s.t. p >= 0, sum p <= 1  (water-filling; argmax 1/K each)
ConvexSubproblem water_filling(int K) {
  ConvexSubproblem sub;
  sub.dim_x = 0;
  sub.dim_p = K;
  sub.has_alpha = false;
  sub.p_char = 1.0;
  SumRateObjective obj;
  obj.wt = 1.0;
  obj.sigma2 = VectorXd::Zero(K);
  for (int k = 0; k < K; ++k) {
    obj.q.push_back(VectorXd::Unit(K, k));
    obj.bhat.push_back(VectorXd::Zero(K));
  }
  sub.objective = std::move(obj);
  for (int k = 0; k < K; ++k) {
    sub.constraints.push_back(NonNegPower{k});
    sub.constraint_scales.push_back(1.0);
  }
  LinearizedHarvest simplex;
  simplex.k = -1;
  simplex.cx = VectorXd(0);
  simplex.cp = VectorXd::Ones(K);
  simplex.c0 = -1.0;
  sub.constraints.push_back(simplex);
  sub.constraint_scales.push_back(1.0);
  sub.expansion = VectorXd::Constant(K, 1.0 / (2.0 * K));
  return sub;
}

}  // namespace

TEST_CASE("water-filling splits the budget evenly") {
  const ConvexSubproblem sub = water_filling(4);
  SolverOptions so;
  const SolverResult res = solve(sub, so);
  REQUIRE(res.status == SolveStatus::Optimal);
  for (int k = 0; k < 4; ++k) CHECK(res.z[k] == Catch::Approx(0.25).margin(1e-7));
}

TEST_CASE("epigraph variable stops at the smallest cap") {
  ConvexSubproblem sub;
  sub.dim_x = 0;
  sub.dim_p = 0;
  sub.has_alpha = true;
  sub.objective = EpigraphObjective{};
  for (double cap : {3.0, 5.0}) {
    RateFloor f;
    f.k = 0;
    f.q = VectorXd(0);
    f.sigma2 = 1.0;  // log2(1) = 0
    f.wt = 1.0;
    f.cp = VectorXd(0);
    f.c0 = -cap;
    sub.constraints.push_back(f);
    sub.constraint_scales.push_back(cap);
  }
  sub.expansion = VectorXd::Constant(1, 0.0);
  SolverOptions so;
  const SolverResult res = solve(sub, so);
  REQUIRE(res.status == SolveStatus::Optimal);
  CHECK(res.z[0] == Catch::Approx(3.0).margin(1e-7));
}

TEST_CASE("random concave objective matches projected grid search") {
  // maximize sum_k log2(p_k + s_k) + c^T p  s.t. p >= 0, sum p <= 1.
  // The objective is strictly increasing, so the budget is tight and the grid
  // can walk the simplex face p3 = 1 - p1 - p2 at step 1e-3.
  std::mt19937_64 rng(2023);
  std::uniform_real_distribution<double> unif(0.2, 1.0);
  const int K = 3;
  VectorXd s(K), c(K);
  for (int k = 0; k < K; ++k) {
    s[k] = 0.05 * unif(rng);
    c[k] = 0.3 * unif(rng);
  }

  ConvexSubproblem sub;
  sub.dim_x = 0;
  sub.dim_p = K;
  sub.has_alpha = false;
  SumRateObjective obj;
  obj.wt = 1.0;
  obj.sigma2 = s;
  for (int k = 0; k < K; ++k) {
    obj.q.push_back(VectorXd::Unit(K, k));
    obj.bhat.push_back(c / static_cast<double>(K));
  }
  sub.objective = std::move(obj);

  for (int k = 0; k < K; ++k) {
    sub.constraints.push_back(NonNegPower{k});
    sub.constraint_scales.push_back(1.0);
  }
  LinearizedHarvest simplex;
  simplex.k = -1;
  simplex.cx = VectorXd(0);
  simplex.cp = VectorXd::Ones(K);
  simplex.c0 = -1.0;
  sub.constraints.push_back(simplex);
  sub.constraint_scales.push_back(1.0);
  sub.expansion = VectorXd::Constant(K, 0.2);
  sub.p_char = 1.0;

  auto value = [&](const VectorXd& p) {
    double v = c.dot(p);
    for (int k = 0; k < K; ++k) v += std::log2(p[k] + s[k]);
    return v;
  };

  SolverOptions so;
  const SolverResult res = solve(sub, so);
  REQUIRE(res.status == SolveStatus::Optimal);

  double best = -1e300;
  VectorXd pbest(K);
  const int n = 1000;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j + i <= n; ++j) {
      VectorXd p(K);
      p << i / double(n), j / double(n), 1.0 - (i + j) / double(n);
      const double v = value(p);
      if (v > best) {
        best = v;
        pbest = p;
      }
    }
  CHECK(value(res.z) >= best - 1e-6);
  for (int k = 0; k < K; ++k) CHECK(res.z[k] == Catch::Approx(pbest[k]).margin(2e-3));
}

TEST_CASE("centering is monotone and the result is feasible and self-consistent") {
  const ConvexSubproblem sub = water_filling(5);
  std::vector<double> trace;
  SolverOptions so;
  so.centering_trace = &trace;
  const SolverResult res = solve(sub, so);
  REQUIRE(res.status == SolveStatus::Optimal);

  // barrier objective (minimized) never increases along accepted Newton steps
  // within one centering; stage boundaries reset the barrier weight, so only
  // check within runs of decreasing values
  int violations = 0;
  for (size_t i = 1; i < trace.size(); ++i)
    if (trace[i] > trace[i - 1] + 1e-10 * std::max(1.0, std::abs(trace[i - 1]))) ++violations;
  // allow one jump per stage change
  CHECK(violations <= 8);

  for (size_t i = 0; i < sub.constraints.size(); ++i)
    CHECK(constraint_value(sub, sub.constraints[i], res.z) <= 0.0);

  ConvexSubproblem warm = sub;
  warm.expansion = res.z;
  const SolverResult res2 = solve(warm, so);
  CHECK(std::abs(res2.objective - res.objective) < so.gap_target);
}

TEST_CASE("solver options validate") {
  SolverOptions so;
  so.mu_barrier = 1.0;
  CHECK_THROWS_AS(so.validate(), std::invalid_argument);
  so = SolverOptions{};
  so.ls_alpha = 0.7;
  CHECK_THROWS_AS(so.validate(), std::invalid_argument);
  so = SolverOptions{};
  CHECK_NOTHROW(so.validate());
}

TEST_CASE("phase one recovers a boundary start") {
  ConvexSubproblem sub = water_filling(3);
  sub.expansion = VectorXd::Zero(3);  // on the p >= 0 boundary
  SolverOptions so;
  const SolverResult res = solve(sub, so);
  REQUIRE(res.status == SolveStatus::Optimal);
  for (int k = 0; k < 3; ++k) CHECK(res.z[k] == Catch::Approx(1.0 / 3).margin(1e-6));
}
