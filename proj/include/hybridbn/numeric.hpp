#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "hybridbn/errors.hpp"

namespace hybridbn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Masses with log below this are structural zeros: still representable as a
// normal double when exponentiated, so linear-space moment math stays finite.
inline constexpr double kLogZeroThreshold = -700.0;

inline bool is_log_zero(double lg) { return lg < kLogZeroThreshold || std::isnan(lg); }

inline double log_sum_exp(const std::vector<double>& ls) {
  double m = kNegInf;
  for (double l : ls) m = std::max(m, l);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double l : ls) s += std::exp(l - m);
  return m + std::log(s);
}

inline void check_symmetric(const Matrix& m, double tol, const char* what) {
  if (m.rows() != m.cols()) throw NumericalError(std::string(what) + ": matrix not square");
  double d = (m - m.transpose()).cwiseAbs().maxCoeff();
  double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (d > tol * scale)
    throw NumericalError(std::string(what) + ": asymmetry " + std::to_string(d));
}

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

// Symmetrize and clip slightly negative eigenvalues to zero. Negativity beyond
// `tol` indicates a real bug and raises.
inline Matrix psd_repair(const Matrix& cov, double tol = 1e-9) {
  if (cov.rows() == 0) return cov;
  Matrix s = symmetrize(cov);
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  if (es.info() != Eigen::Success) throw NumericalError("psd_repair: eigensolver failed");
  Vector lam = es.eigenvalues();
  double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  if (lam.minCoeff() >= 0.0) return s;
  if (lam.minCoeff() < -tol * scale)
    throw SingularCovariance("psd_repair: eigenvalue " + std::to_string(lam.minCoeff()) +
                             " below repair threshold");
  for (int i = 0; i < lam.size(); ++i) lam[i] = std::max(lam[i], 0.0);
  return symmetrize(es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose());
}

// log det of a symmetric positive definite matrix via LLT; throws if not PD.
inline double log_det_pd(const Matrix& m, const char* what) {
  if (m.rows() == 0) return 0.0;
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success)
    throw NonIntegrableFactor(std::string(what) + ": matrix not positive definite");
  double ld = 0.0;
  for (int i = 0; i < m.rows(); ++i) ld += std::log(llt.matrixL()(i, i));
  return 2.0 * ld;
}

// Deterministic standard-normal stream: mt19937_64 + Box-Muller. Chosen over
// std::normal_distribution because the standard does not pin its algorithm, and
// sampler output feeds reproducibility contracts.
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : gen_(seed) {}

  double operator()() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = unit_open();
    double u2 = unit_open();
    double r = std::sqrt(-2.0 * std::log(u1));
    double t = 2.0 * M_PI * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }

  Vector vector(int n) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = (*this)();
    return v;
  }

  // Uniform in (0,1].
  double unit_open() {
    return (static_cast<double>(gen_() >> 11) + 1.0) * (1.0 / 9007199254740993.0);
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hybridbn
