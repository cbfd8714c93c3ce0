#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "support.hpp"
#include "wpic/energy.hpp"
#include "wpic/surrogate.hpp"

using namespace wpic;

namespace {

NonlinearPair paper_params() {
  // Fitted rectifier curve used throughout: N = 48.86 uW, a = 26515.46 /W,
  // b = -29.81 uW.
  NonlinearEhParams p;
  p.n_sat = VectorXd::Constant(1, 48.86e-6);
  p.a_tilde = VectorXd::Constant(1, 26515.46);
  p.b_tilde = VectorXd::Constant(1, -29.81e-6);
  p.recompute_omega();
  return nl_pair(p, 0);
}

// Independent long-double evaluation of the sigmoidal harvest rate.
long double harvest_rate_ld(long double p_in, const NonlinearPair& prm) {
  const long double N = prm.n_sat, a = prm.a_tilde, b = prm.b_tilde;
  const long double omega = 1.0L / (1.0L + expl(a * b));
  return (N / (1.0L + expl(-a * (p_in - b))) - N * omega) / (1.0L - omega);
}

// Real-composite central-difference Hessian of f(x) over [Re x; Im x].
MatrixXd fd_hessian(const std::function<double(const VectorXcd&)>& f, const VectorXcd& x0,
                    double step) {
  const int n = static_cast<int>(x0.size());
  auto to_x = [&](const VectorXd& z) {
    VectorXcd x(n);
    for (int j = 0; j < n; ++j) x[j] = cplx(z[j], z[n + j]);
    return x;
  };
  VectorXd z0(2 * n);
  for (int j = 0; j < n; ++j) {
    z0[j] = x0[j].real();
    z0[n + j] = x0[j].imag();
  }
  MatrixXd H(2 * n, 2 * n);
  for (int i = 0; i < 2 * n; ++i)
    for (int j = i; j < 2 * n; ++j) {
      VectorXd zpp = z0, zpm = z0, zmp = z0, zmm = z0;
      zpp[i] += step;
      zpp[j] += step;
      zpm[i] += step;
      zpm[j] -= step;
      zmp[i] -= step;
      zmp[j] += step;
      zmm[i] -= step;
      zmm[j] -= step;
      const double v =
          (f(to_x(zpp)) - f(to_x(zpm)) - f(to_x(zmp)) + f(to_x(zmm))) / (4.0 * step * step);
      H(i, j) = v;
      H(j, i) = v;
    }
  return H;
}

}  // namespace

TEST_CASE("linear harvest: identity, cancellation, collaboration") {
  VectorXcd x(1), h(1);
  x << cplx(1, 0);
  h << cplx(1, 0);
  CHECK(harvested_energy_linear(x, h, 1.0, 0.5) == Catch::Approx(0.5).margin(1e-15));

  const double q = 0.37;
  VectorXcd x2(2), h2(2);
  h2 << cplx(1, 0), cplx(1, 0);
  x2 << cplx(std::sqrt(q), 0), std::polar(std::sqrt(q), M_PI);  // destructive
  CHECK(harvested_energy_linear(x2, h2, 1.0, 1.0) == Catch::Approx(0.0).margin(1e-16));

  x2 << cplx(std::sqrt(q), 0), cplx(std::sqrt(q), 0);  // constructive
  CHECK(harvested_energy_linear(x2, h2, 1.0, 1.0) == Catch::Approx(4.0 * q).epsilon(1e-12));
}

TEST_CASE("nonlinear harvest is exactly zero at zero input") {
  const NonlinearPair prm = paper_params();
  CHECK(harvest_rate_nonlinear(0.0, prm) == 0.0);
  VectorXcd x = VectorXcd::Zero(3), h(3);
  h << cplx(1e-3, 2e-4), cplx(0, 1e-3), cplx(5e-4, 0);
  CHECK(harvested_energy_nonlinear(x, h, prm, 0.7) == 0.0);
}

TEST_CASE("nonlinear harvest saturates at tau * N") {
  const NonlinearPair prm = paper_params();
  VectorXcd x(1), h(1);
  x << cplx(1, 0);
  h << cplx(1, 0);  // received power 1 W, deep saturation
  const double tau = 0.7;
  CHECK(harvested_energy_nonlinear(x, h, prm, tau) ==
        Catch::Approx(tau * 48.86e-6).epsilon(1e-3));
}

TEST_CASE("nonlinear harvest matches the high-precision reference values") {
  const NonlinearPair prm = paper_params();
  // values computed with 50-digit arithmetic
  CHECK(harvest_rate_nonlinear(20e-6, prm) ==
        Catch::Approx(1.5872628404391852679e-05).epsilon(1e-12));
  CHECK(harvest_rate_nonlinear(40e-6, prm) ==
        Catch::Approx(2.7606410762354581149e-05).epsilon(1e-12));
  CHECK(harvest_rate_nonlinear(5e-6, prm) ==
        Catch::Approx(4.341649186634530594e-06).epsilon(1e-12));

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unif(0.0, 1e-4);
  for (int i = 0; i < 30; ++i) {
    const double p = unif(rng);
    CHECK(harvest_rate_nonlinear(p, prm) ==
          Catch::Approx(static_cast<double>(harvest_rate_ld(p, prm))).epsilon(1e-12));
  }
}

TEST_CASE("nonlinear harvest is nondecreasing in received power") {
  const NonlinearPair prm = paper_params();
  double prev = -1.0;
  for (int i = 0; i <= 1000; ++i) {
    const double p = 1e-4 * i / 1000.0;
    const double v = harvest_rate_nonlinear(p, prm);
    CHECK(v >= prev - 1e-18);
    prev = v;
  }
}

TEST_CASE("imperfect-CSI energy: reductions and decomposition") {
  VectorXcd x(2), h(2);
  x << cplx(0.3, -0.4), cplx(1.0, 0.2);
  h << cplx(2e-3, 1e-3), cplx(-1e-3, 5e-4);
  // zero error variance equals the linear model on the estimate
  CHECK(harvested_energy_imperfect(x, h, 0.0, 0.8, 0.6) ==
        Catch::Approx(harvested_energy_linear(x, h, 0.8, 0.6)).epsilon(1e-15));
  // isotropic-only term
  VectorXcd zero_h = VectorXcd::Zero(1), x1(1);
  x1 << cplx(1, 0);
  CHECK(harvested_energy_imperfect(x1, zero_h, 0.19, 1.0, 1.0) ==
        Catch::Approx(0.19).margin(1e-15));
  // analytic decomposition is exact
  const double expect =
      0.8 * 0.6 * (std::norm((h.adjoint() * x)(0, 0)) + 0.19 * x.squaredNorm());
  CHECK(harvested_energy_imperfect(x, h, 0.19, 0.8, 0.6) == Catch::Approx(expect).epsilon(1e-15));
}

TEST_CASE("imperfect-CSI energy equals the Monte-Carlo average") {
  std::mt19937_64 rng(123);
  std::normal_distribution<double> n01(0.0, 1.0);
  const int K = 3;
  VectorXcd h_hat(K), x(K);
  VectorXd dvar(K);
  for (int j = 0; j < K; ++j) {
    h_hat[j] = cplx(n01(rng), n01(rng)) * 1e-3;
    x[j] = cplx(n01(rng), n01(rng)) * 0.5;
    dvar[j] = (0.5 + 0.5 * j) * 1e-6;  // distinct per-link error variances
  }
  const double mu = 0.9, tau = 0.55;
  const double analytic = harvested_energy_imperfect_perlink(x, h_hat, dvar, mu, tau);
  const int n = 100000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    VectorXcd h = h_hat;
    for (int j = 0; j < K; ++j)
      h[j] += std::sqrt(dvar[j] / 2.0) * cplx(n01(rng), n01(rng));
    acc += mu * tau * received_power(x, h);
  }
  CHECK(acc / n == Catch::Approx(analytic).epsilon(0.01));
}

TEST_CASE("ridge bound: zero channel, quartic scaling, eigensolver cross-check") {
  const NonlinearPair prm = paper_params();
  VectorXcd zero = VectorXcd::Zero(3);
  CHECK(beta_lower_bound(prm, zero, 0.5, 10.0) == 0.0);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01(0.0, 1.0);
  VectorXcd h(4);
  for (int j = 0; j < 4; ++j) h[j] = cplx(n01(rng), n01(rng)) * 2e-3;
  const double b1 = beta_lower_bound(prm, h, 0.4, 8.0);
  const double b2 = beta_lower_bound(prm, (2.5 * h).eval(), 0.4, 8.0);
  CHECK(b2 == Catch::Approx(std::pow(2.5, 4) * b1).epsilon(1e-12));

  // lambda_max(Q^2) for rank-1 Q = h h^H equals ||h||^4; cross-check densely
  const MatrixXcd Q = h * h.adjoint();
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(Q * Q);
  const double lam = es.eigenvalues().maxCoeff();
  CHECK(lam == Catch::Approx(std::pow(h.squaredNorm(), 2)).epsilon(1e-10));
  const double curv = 4.0 * 0.4 * prm.n_sat * prm.a_tilde * prm.a_tilde *
                      std::exp(prm.a_tilde * prm.b_tilde) / (1.0 - prm.omega);
  CHECK(b1 == Catch::Approx(curv * lam * 8.0).epsilon(1e-10));
}

TEST_CASE("ridge convexifies the sigmoidal energy; without it curvature goes negative") {
  const NonlinearPair prm = paper_params();
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int K = 3;
  const double pmax = 1.585;
  VectorXcd h(K);
  h << cplx(2.5e-3, 1e-3), cplx(-1.2e-3, 0.4e-3), cplx(0.6e-3, -2.0e-3);
  const double tau = 0.5;
  const double budget = K * pmax;
  const double beta0 = beta_lower_bound(prm, h, tau, budget);
  const double beta = 1.05 * beta0;

  auto energy_ridge = [&](double b) {
    return [&, b](const VectorXcd& x) {
      return harvested_energy_nonlinear(x, h, prm, tau) + 0.5 * b * x.squaredNorm();
    };
  };

  double min_eig_ridge = std::numeric_limits<double>::infinity();
  double min_eig_raw = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 100; ++it) {
    VectorXcd x(K);
    for (int j = 0; j < K; ++j)
      x[j] = std::polar(std::sqrt(unif(rng) * pmax), 2.0 * M_PI * unif(rng));
    // bias some samples toward the high-curvature region (full power, aligned)
    if (it % 3 == 0)
      for (int j = 0; j < K; ++j)
        x[j] = std::sqrt(pmax) * (0.7 + 0.3 * unif(rng)) * h[j] / std::abs(h[j]);
    const double step = 1e-5 * std::max(1.0, x.norm());
    const MatrixXd Hr = fd_hessian(energy_ridge(beta), x, step);
    min_eig_ridge =
        std::min(min_eig_ridge,
                 Eigen::SelfAdjointEigenSolver<MatrixXd>(Hr).eigenvalues().minCoeff());
    const MatrixXd H0 = fd_hessian(energy_ridge(0.0), x, step);
    min_eig_raw = std::min(
        min_eig_raw, Eigen::SelfAdjointEigenSolver<MatrixXd>(H0).eigenvalues().minCoeff());
  }
  CHECK(min_eig_ridge >= -1e-6 * beta);
  CHECK(min_eig_raw < -1e-6 * beta0);  // the ridge is doing real work
}

TEST_CASE("gradient row matches finite differences") {
  const NonlinearPair prm = paper_params();
  std::mt19937_64 rng(29);
  std::normal_distribution<double> n01(0.0, 1.0);
  const int K = 4;
  VectorXcd h(K), x0(K);
  for (int j = 0; j < K; ++j) {
    h[j] = cplx(n01(rng), n01(rng)) * 1.5e-3;
    x0[j] = cplx(n01(rng), n01(rng)) * 0.5;
  }
  const double tau = 0.6;
  const double beta = 1.05 * beta_lower_bound(prm, h, tau, 6.0);
  const Eigen::RowVectorXcd u = nonlinear_ridge_gradient_row(x0, h, prm, tau, beta);
  auto f = [&](const VectorXcd& x) {
    return harvested_energy_nonlinear(x, h, prm, tau) + 0.5 * beta * x.squaredNorm();
  };
  const double t = 1e-6;
  for (int it = 0; it < 50; ++it) {
    VectorXcd d(K);
    for (int j = 0; j < K; ++j) d[j] = cplx(n01(rng), n01(rng));
    d /= d.norm();
    const double fd = (f(x0 + t * d) - f(x0 - t * d)) / (2.0 * t);
    const cplx ud = (u * d)(0, 0);
    CHECK(ud.real() == Catch::Approx(fd).epsilon(1e-4));
  }
}
