#include <catch2/catch_amalgamated.hpp>

#include "hybridbn/quadrature.hpp"

using namespace hybridbn;

namespace {

double dfact(int n) {  // (n)!! with (-1)!! = 1
  double r = 1.0;
  for (int k = n; k > 1; k -= 2) r *= k;
  return r;
}

}  // namespace

TEST_CASE("small rules match closed forms", "[quadrature]") {
  QuadratureRule r1 = gauss_hermite_rule(1);
  CHECK(r1.nodes[0] == Catch::Approx(0.0).margin(1e-14));
  CHECK(r1.weights[0] == Catch::Approx(1.0).epsilon(1e-14));

  QuadratureRule r2 = gauss_hermite_rule(2);
  CHECK(r2.nodes[0] == Catch::Approx(-1.0).epsilon(1e-12));
  CHECK(r2.nodes[1] == Catch::Approx(1.0).epsilon(1e-12));
  CHECK(r2.weights[0] == Catch::Approx(0.5).epsilon(1e-12));
  CHECK(r2.weights[1] == Catch::Approx(0.5).epsilon(1e-12));

  QuadratureRule r3 = gauss_hermite_rule(3);
  CHECK(r3.nodes[0] == Catch::Approx(-std::sqrt(3.0)).epsilon(1e-12));
  CHECK(r3.nodes[1] == Catch::Approx(0.0).margin(1e-13));
  CHECK(r3.nodes[2] == Catch::Approx(std::sqrt(3.0)).epsilon(1e-12));
  CHECK(r3.weights[0] == Catch::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(r3.weights[1] == Catch::Approx(2.0 / 3.0).epsilon(1e-12));

  CHECK_THROWS_AS(gauss_hermite_rule(0), ConfigError);
  CHECK_THROWS_AS(gauss_hermite_rule(65), ConfigError);
}

TEST_CASE("rules are symmetric with unit mass", "[quadrature]") {
  for (int n : {1, 2, 3, 5, 8, 13, 21, 34, 64}) {
    QuadratureRule r = gauss_hermite_rule(n);
    double wsum = 0.0;
    for (int i = 0; i < n; ++i) {
      wsum += r.weights[i];
      CHECK(r.nodes[i] == Catch::Approx(-r.nodes[n - 1 - i]).margin(1e-13));
      CHECK(r.weights[i] == Catch::Approx(r.weights[n - 1 - i]).epsilon(1e-12));
    }
    CHECK(wsum == Catch::Approx(1.0).epsilon(1e-13));
  }
}

TEST_CASE("degree 2n-1 exactness on standard normal moments", "[quadrature]") {
  for (int n = 1; n <= 10; ++n) {
    QuadratureRule r = gauss_hermite_rule(n);
    for (int d = 0; d <= 2 * n - 1; ++d) {
      double est = 0.0, mass = 0.0;
      for (int i = 0; i < n; ++i) {
        est += r.weights[i] * std::pow(r.nodes[i], d);
        mass += r.weights[i] * std::pow(std::abs(r.nodes[i]), d);
      }
      double truth = (d % 2) ? 0.0 : dfact(d - 1);
      // error relative to the absolute quadrature mass: odd moments cancel
      // pairwise and are limited by floating-point cancellation, not the rule
      CHECK(std::abs(est - truth) <= 1e-10 * std::max(1.0, mass));
    }
  }
}

TEST_CASE("tensor grid reproduces mean and covariance", "[quadrature]") {
  Vector mu(3);
  mu << 1.0, -2.0, 0.5;
  Matrix cov(3, 3);
  cov << 2.0, 0.3, -0.4, 0.3, 1.0, 0.2, -0.4, 0.2, 1.5;
  QuadratureConfig cfg;
  cfg.points_per_dim = 2;
  Vector m = gaussian_expectation([](const Vector& x) { return Vector(x); }, mu, cov, cfg);
  CHECK((m - mu).cwiseAbs().maxCoeff() < 1e-12);
  Matrix s = gaussian_expectation(
      [&](const Vector& x) { return Matrix((x - mu) * (x - mu).transpose()); }, mu, cov, cfg);
  CHECK((s - cov).cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("fourth cross moment matches Isserlis", "[quadrature]") {
  double rho = 0.6;
  Matrix cov(2, 2);
  cov << 1.0, rho, rho, 1.0;
  QuadratureConfig cfg;
  cfg.points_per_dim = 3;
  double e = gaussian_expectation([](const Vector& x) { return x[0] * x[0] * x[1] * x[1]; },
                                  Vector::Zero(2), cov, cfg);
  CHECK(e == Catch::Approx(1.0 + 2.0 * rho * rho).epsilon(1e-10));
}

TEST_CASE("degenerate directions are dropped", "[quadrature]") {
  Matrix cov(2, 2);
  cov << 1.0, 1.0, 1.0, 1.0;  // x == y almost surely
  QuadratureConfig cfg;
  cfg.points_per_dim = 5;
  int evals = 0;
  double e = gaussian_expectation(
      [&](const Vector& x) {
        ++evals;
        return x[0] * x[1];
      },
      Vector::Zero(2), cov, cfg);
  CHECK(e == Catch::Approx(1.0).epsilon(1e-10));
  CHECK(evals == 5);  // a 1-D grid, not 5x5
}

TEST_CASE("dimension cap and invalid covariance", "[quadrature]") {
  QuadratureConfig cfg;
  cfg.max_dim = 6;
  CHECK_THROWS_AS(gaussian_expectation([](const Vector&) { return 1.0; }, Vector::Zero(7),
                                       Matrix::Identity(7, 7), cfg),
                  DimensionCap);
  Matrix neg = Matrix::Identity(2, 2);
  neg(1, 1) = -0.5;
  CHECK_THROWS_AS(gaussian_expectation([](const Vector&) { return 1.0; }, Vector::Zero(2),
                                       neg, cfg),
                  SingularCovariance);
}

TEST_CASE("monte carlo path is deterministic per seed", "[quadrature]") {
  QuadratureConfig cfg;
  cfg.backend = QuadratureConfig::Backend::MonteCarlo;
  cfg.mc_samples = 20000;
  cfg.mc_seed = 99;
  Matrix cov(2, 2);
  cov << 1.0, 0.4, 0.4, 2.0;
  auto f = [](const Vector& x) { return std::tanh(x[0]) + x[1] * x[1]; };
  double a = gaussian_expectation(f, Vector::Zero(2), cov, cfg);
  double b = gaussian_expectation(f, Vector::Zero(2), cov, cfg);
  CHECK(a == b);
  cfg.mc_seed = 100;
  CHECK(a != gaussian_expectation(f, Vector::Zero(2), cov, cfg));
  CHECK(a == Catch::Approx(2.0).margin(0.1));  // E[tanh] = 0, E[y^2] = 2
}

TEST_CASE("mc_expectation reports a usable standard error", "[quadrature]") {
  MCEstimate est = mc_expectation([](const Vector& x) { return x[0] * x[0]; },
                                  Vector::Zero(1), Matrix::Identity(1, 1), 50000, 1234);
  CHECK(est.std_error > 0.0);
  CHECK(std::abs(est.value - 1.0) < 5.0 * est.std_error);
}

TEST_CASE("non-finite integrand values are rejected", "[quadrature]") {
  QuadratureConfig cfg;
  CHECK_THROWS_AS(gaussian_expectation([](const Vector& x) { return 1.0 / (x[0] - x[0]); },
                                       Vector::Zero(1), Matrix::Identity(1, 1), cfg),
                  NumericalError);
}
