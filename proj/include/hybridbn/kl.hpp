#pragma once

#include <cmath>
#include <vector>

#include "hybridbn/canonical.hpp"
#include "hybridbn/errors.hpp"
#include "hybridbn/numeric.hpp"

namespace hybridbn {

// KL(p || q) between discrete distributions. q must dominate p.
inline double kl_discrete(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw ScopeError("kl_discrete: size mismatch");
  double kl = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) throw NumericalError("kl_discrete: q has a zero where p is positive");
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(0.0, kl);
}

// KL(N(m0,S0) || N(m1,S1)) in closed form.
inline double kl_gaussian(const Vector& m0, const Matrix& S0, const Vector& m1,
                          const Matrix& S1) {
  int n = static_cast<int>(m0.size());
  if (n == 0) return 0.0;
  Eigen::LLT<Matrix> llt1(symmetrize(S1));
  if (llt1.info() != Eigen::Success)
    throw SingularCovariance("kl_gaussian: second covariance not PD");
  Matrix S1inv_S0 = llt1.solve(symmetrize(S0));
  Vector d = m1 - m0;
  double logdet1 = 0.0, logdet0 = 0.0;
  for (int i = 0; i < n; ++i) logdet1 += std::log(llt1.matrixL()(i, i));
  logdet1 *= 2.0;
  Eigen::LLT<Matrix> llt0(symmetrize(S0));
  if (llt0.info() != Eigen::Success)
    throw SingularCovariance("kl_gaussian: first covariance not PD");
  for (int i = 0; i < n; ++i) logdet0 += std::log(llt0.matrixL()(i, i));
  logdet0 *= 2.0;
  double kl = 0.5 * (S1inv_S0.trace() + d.dot(llt1.solve(d)) - n + logdet1 - logdet0);
  return std::max(0.0, kl);
}

// KL between two conditional-Gaussian mixtures sharing a discrete index set:
// discrete KL plus the p-weighted per-assignment Gaussian KLs. This is the
// exact KL when both arguments factor as P(d)·N(x; ·_d), an upper-bound
// surrogate otherwise; used as the experiment comparison metric.
inline double kl_mixture(const std::vector<double>& p_probs,
                         const std::vector<Vector>& p_means,
                         const std::vector<Matrix>& p_covs,
                         const std::vector<double>& q_probs,
                         const std::vector<Vector>& q_means,
                         const std::vector<Matrix>& q_covs) {
  double kl = kl_discrete(p_probs, q_probs);
  for (size_t i = 0; i < p_probs.size(); ++i) {
    if (p_probs[i] <= 0.0) continue;
    kl += p_probs[i] * kl_gaussian(p_means[i], p_covs[i], q_means[i], q_covs[i]);
  }
  return kl;
}

}  // namespace hybridbn
