#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <type_traits>
#include <vector>

#include "hybridbn/errors.hpp"
#include "hybridbn/numeric.hpp"

namespace hybridbn {

// Probabilists' normalization throughout: nodes/weights integrate against the
// standard normal density, weights sum to 1.
struct QuadratureRule {
  Vector nodes;
  Vector weights;
  int size() const { return static_cast<int>(nodes.size()); }
};

// Golub-Welsch on the probabilists' Hermite recurrence (zero diagonal,
// off-diagonals sqrt(k)). Exact for polynomials of degree <= 2n-1.
inline QuadratureRule gauss_hermite_rule(int n) {
  if (n < 1 || n > 64)
    throw ConfigError("gauss_hermite_rule: point count must be in [1, 64], got " +
                      std::to_string(n));
  QuadratureRule r;
  if (n == 1) {
    r.nodes = Vector::Zero(1);
    r.weights = Vector::Ones(1);
    return r;
  }
  Matrix J = Matrix::Zero(n, n);
  for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(double(k));
  Eigen::SelfAdjointEigenSolver<Matrix> es(J);
  if (es.info() != Eigen::Success)
    throw NumericalError("gauss_hermite_rule: eigensolver failed");
  r.nodes = es.eigenvalues();
  r.weights = es.eigenvectors().row(0).transpose().array().square();
  // enforce exact symmetry about 0, then renormalize
  for (int i = 0; i < n / 2; ++i) {
    int j = n - 1 - i;
    double x = 0.5 * (r.nodes[j] - r.nodes[i]);
    r.nodes[i] = -x;
    r.nodes[j] = x;
    double w = 0.5 * (r.weights[i] + r.weights[j]);
    r.weights[i] = r.weights[j] = w;
  }
  if (n % 2 == 1) r.nodes[n / 2] = 0.0;
  r.weights /= r.weights.sum();
  return r;
}

struct QuadratureConfig {
  enum class Backend { GaussHermite, MonteCarlo };
  Backend backend = Backend::GaussHermite;
  int points_per_dim = 3;
  int max_dim = 6;
  std::int64_t mc_samples = 100000;
  std::uint64_t mc_seed = 20240501;
};

namespace detail {

inline void check_eval_finite(double v, const Vector& x, const char* what) {
  if (!std::isfinite(v))
    throw NumericalError(std::string(what) + ": integrand non-finite at node [" +
                         [&] {
                           std::string s;
                           for (int i = 0; i < x.size(); ++i)
                             s += (i ? ", " : "") + std::to_string(x[i]);
                           return s;
                         }() +
                         "]");
}
inline void check_eval_finite(const Vector& v, const Vector& x, const char* what) {
  if (!v.allFinite()) check_eval_finite(std::numeric_limits<double>::quiet_NaN(), x, what);
}
inline void check_eval_finite(const Matrix& v, const Vector& x, const char* what) {
  if (!v.allFinite()) check_eval_finite(std::numeric_limits<double>::quiet_NaN(), x, what);
}

// Columns scaled by sqrt of the (clipped) eigenvalues; only directions with
// strictly positive variance are kept. Rank-deficient directions collapse to
// the mean.
inline Matrix covariance_sqrt_active(const Matrix& cov, int& active_dims) {
  int n = static_cast<int>(cov.rows());
  if (n == 0) {
    active_dims = 0;
    return Matrix(0, 0);
  }
  check_symmetric(cov, 1e-8, "gaussian_expectation covariance");
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(cov));
  if (es.info() != Eigen::Success)
    throw NumericalError("gaussian_expectation: covariance eigensolver failed");
  std::vector<int> act;
  for (int i = 0; i < n; ++i) {
    double ev = es.eigenvalues()[i];
    if (ev < -1e-12)
      throw SingularCovariance("gaussian_expectation: covariance eigenvalue " +
                               std::to_string(ev) + " below -1e-12");
    if (ev > 0.0) act.push_back(i);
  }
  Matrix L(n, static_cast<int>(act.size()));
  for (size_t j = 0; j < act.size(); ++j)
    L.col(j) = es.eigenvectors().col(act[j]) * std::sqrt(es.eigenvalues()[act[j]]);
  active_dims = static_cast<int>(act.size());
  return L;
}

}  // namespace detail

// Tensor-grid Gauss-Hermite expectation of f under N(mean, cov). f may
// return double, Vector, or Matrix. Grid order is lexicographic over node
// indices (last dimension fastest) for reproducible summation.
template <class F>
auto gaussian_expectation(F&& f, const Vector& mean, const Matrix& cov,
                          const QuadratureConfig& cfg = {}) {
  using R = std::decay_t<decltype(f(mean))>;
  int active = 0;
  Matrix L = detail::covariance_sqrt_active(cov, active);
  if (cfg.backend == QuadratureConfig::Backend::MonteCarlo) {
    NormalSampler rng(cfg.mc_seed);
    Vector z(active);
    Vector x(mean.size());
    R acc{};
    for (std::int64_t s = 0; s < cfg.mc_samples; ++s) {
      for (int j = 0; j < active; ++j) z[j] = rng();
      x = mean + L * z;
      R v = f(x);
      detail::check_eval_finite(v, x, "gaussian_expectation");
      if (s == 0)
        acc = v;
      else
        acc += v;
    }
    return R(acc * (1.0 / double(cfg.mc_samples)));
  }
  if (active > cfg.max_dim)
    throw DimensionCap("gaussian_expectation: " + std::to_string(active) +
                       " active dimensions exceed cap " + std::to_string(cfg.max_dim) +
                       " (use the MC backend or sequential mode)");
  QuadratureRule rule = gauss_hermite_rule(cfg.points_per_dim);
  std::vector<int> idx(active, 0);
  Vector z(active);
  Vector x(mean.size());
  bool first = true;
  R acc{};
  while (true) {
    double w = 1.0;
    for (int j = 0; j < active; ++j) {
      z[j] = rule.nodes[idx[j]];
      w *= rule.weights[idx[j]];
    }
    x = mean + L * z;
    R v = f(x);
    detail::check_eval_finite(v, x, "gaussian_expectation");
    if (first) {
      acc = v * w;
      first = false;
    } else {
      acc += v * w;
    }
    int j = active - 1;
    for (; j >= 0; --j) {
      if (++idx[j] < rule.size()) break;
      idx[j] = 0;
    }
    if (j < 0) break;
  }
  return acc;
}

struct MCEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

// Plain Monte Carlo with sample standard error; deterministic per seed.
template <class F>
MCEstimate mc_expectation(F&& f, const Vector& mean, const Matrix& cov,
                          std::int64_t samples, std::uint64_t seed) {
  if (samples < 2) throw ConfigError("mc_expectation: need at least 2 samples");
  int active = 0;
  Matrix L = detail::covariance_sqrt_active(cov, active);
  NormalSampler rng(seed);
  Vector z(active);
  Vector x(mean.size());
  double sum = 0.0, sumsq = 0.0;
  for (std::int64_t s = 0; s < samples; ++s) {
    for (int j = 0; j < active; ++j) z[j] = rng();
    x = mean + L * z;
    double v = f(x);
    detail::check_eval_finite(v, x, "mc_expectation");
    sum += v;
    sumsq += v * v;
  }
  MCEstimate est;
  est.value = sum / double(samples);
  double var = (sumsq - sum * sum / double(samples)) / double(samples - 1);
  est.std_error = std::sqrt(std::max(0.0, var) / double(samples));
  return est;
}

}  // namespace hybridbn
