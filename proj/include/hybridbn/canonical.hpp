#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "hybridbn/errors.hpp"
#include "hybridbn/numeric.hpp"

namespace hybridbn {

using VarId = std::int32_t;

// Exponential-quadratic potential over an ordered continuous scope:
//
//   value(x) = exp(g + h.x - x'Kx/2)
//
// K is a symmetric precision-like matrix; it need not be definite (CLG
// conditionals are rank deficient), only integration requires PD blocks.
// g = -inf marks a structural zero (value identically 0).
struct CanonicalForm {
  std::vector<VarId> scope;
  double g = 0.0;
  Vector h;
  Matrix K;

  CanonicalForm() : h(0), K(0, 0) {}

  static CanonicalForm vacuous(std::vector<VarId> sc = {}) {
    CanonicalForm f;
    f.scope = std::move(sc);
    int n = static_cast<int>(f.scope.size());
    f.h = Vector::Zero(n);
    f.K = Matrix::Zero(n, n);
    return f;
  }

  static CanonicalForm zero(std::vector<VarId> sc = {}) {
    CanonicalForm f = vacuous(std::move(sc));
    f.g = kNegInf;
    return f;
  }

  int dim() const { return static_cast<int>(scope.size()); }
  bool is_zero() const { return is_log_zero(g); }

  int index_of(VarId v) const {
    auto it = std::find(scope.begin(), scope.end(), v);
    return it == scope.end() ? -1 : static_cast<int>(it - scope.begin());
  }

  double value_log(const Vector& x) const {
    if (is_zero()) return kNegInf;
    return g + h.dot(x) - 0.5 * x.dot(K * x);
  }
  double value(const Vector& x) const { return std::exp(value_log(x)); }

  void validate(double tol = 1e-10) const {
    if (h.size() != dim() || K.rows() != dim() || K.cols() != dim())
      throw ScopeError("canonical form: parameter sizes disagree with scope");
    if (std::isnan(g) || g == -kNegInf)
      throw NumericalError("canonical form: g is not a number or +inf");
    if (!h.allFinite() || !K.allFinite())
      throw NumericalError("canonical form: non-finite h or K");
    if (dim() > 0) check_symmetric(K, tol, "canonical form K");
  }
};

// Total mass, mean and covariance of an integrable form. The weight may be
// any nonnegative number (mass after evidence is typically below 1).
struct GaussianMoments {
  double weight = 1.0;
  Vector mean;
  Matrix cov;

  GaussianMoments() : mean(0), cov(0, 0) {}
  GaussianMoments(double w, Vector m, Matrix c)
      : weight(w), mean(std::move(m)), cov(std::move(c)) {}

  int dim() const { return static_cast<int>(mean.size()); }
};

// Same content with the mass in log space; used internally so unlikely
// evidence does not underflow before collapse.
struct LogMoments {
  double log_weight = 0.0;
  Vector mean;
  Matrix cov;
  int dim() const { return static_cast<int>(mean.size()); }
  bool is_zero() const { return is_log_zero(log_weight); }
};

namespace detail {

inline std::vector<int> scope_positions(const std::vector<VarId>& sub,
                                        const std::vector<VarId>& super,
                                        const char* what) {
  std::vector<int> pos;
  pos.reserve(sub.size());
  for (VarId v : sub) {
    auto it = std::find(super.begin(), super.end(), v);
    if (it == super.end())
      throw ScopeError(std::string(what) + ": variable " + std::to_string(v) +
                       " missing from target scope");
    pos.push_back(static_cast<int>(it - super.begin()));
  }
  return pos;
}

}  // namespace detail

// Embed f into a larger scope; new coordinates get zero h and K entries, so
// the value is unchanged at every point.
inline CanonicalForm extend(const CanonicalForm& f, const std::vector<VarId>& scope2) {
  auto pos = detail::scope_positions(f.scope, scope2, "extend");
  CanonicalForm out;
  out.scope = scope2;
  int n = static_cast<int>(scope2.size());
  out.g = f.g;
  out.h = Vector::Zero(n);
  out.K = Matrix::Zero(n, n);
  for (int i = 0; i < f.dim(); ++i) {
    out.h[pos[i]] = f.h[i];
    for (int j = 0; j < f.dim(); ++j) out.K(pos[i], pos[j]) = f.K(i, j);
  }
  return out;
}

namespace detail {

inline void require_aligned(const CanonicalForm& a, const CanonicalForm& b, const char* what) {
  if (a.scope != b.scope)
    throw ScopeError(std::string(what) + ": scopes not aligned (extend first)");
}

}  // namespace detail

inline CanonicalForm multiply(const CanonicalForm& a, const CanonicalForm& b) {
  detail::require_aligned(a, b, "multiply");
  if (a.is_zero() || b.is_zero()) return CanonicalForm::zero(a.scope);
  CanonicalForm out = a;
  out.g += b.g;
  out.h += b.h;
  out.K += b.K;
  return out;
}

// Pointwise quotient. Dividing a structural zero by anything (including
// another zero) yields a zero; dividing nonzero by zero is a caller bug.
inline CanonicalForm divide(const CanonicalForm& a, const CanonicalForm& b) {
  detail::require_aligned(a, b, "divide");
  if (a.is_zero()) return CanonicalForm::zero(a.scope);
  if (b.is_zero()) throw NumericalError("divide: nonzero form divided by structural zero");
  CanonicalForm out = a;
  out.g -= b.g;
  out.h -= b.h;
  out.K -= b.K;
  return out;
}

// Integrate the variables in `out` exactly (strong marginalization). The
// block of K over `out` must be positive definite.
inline CanonicalForm marginalize_continuous(const CanonicalForm& f,
                                            const std::vector<VarId>& out_vars) {
  if (out_vars.empty()) return f;
  if (f.is_zero()) {
    std::vector<VarId> keep;
    for (VarId v : f.scope)
      if (std::find(out_vars.begin(), out_vars.end(), v) == out_vars.end()) keep.push_back(v);
    return CanonicalForm::zero(std::move(keep));
  }
  std::vector<int> out_pos = detail::scope_positions(out_vars, f.scope, "marginalize_continuous");
  std::vector<char> is_out(f.scope.size(), 0);
  for (int p : out_pos) is_out[p] = 1;
  std::vector<int> keep_pos;
  for (int i = 0; i < f.dim(); ++i)
    if (!is_out[i]) keep_pos.push_back(i);

  int n1 = static_cast<int>(keep_pos.size());
  int n2 = static_cast<int>(out_pos.size());
  Matrix K11(n1, n1), K12(n1, n2), K22(n2, n2);
  Vector h1(n1), h2(n2);
  for (int i = 0; i < n1; ++i) {
    h1[i] = f.h[keep_pos[i]];
    for (int j = 0; j < n1; ++j) K11(i, j) = f.K(keep_pos[i], keep_pos[j]);
    for (int j = 0; j < n2; ++j) K12(i, j) = f.K(keep_pos[i], out_pos[j]);
  }
  for (int i = 0; i < n2; ++i) {
    h2[i] = f.h[out_pos[i]];
    for (int j = 0; j < n2; ++j) K22(i, j) = f.K(out_pos[i], out_pos[j]);
  }

  Eigen::LLT<Matrix> llt(symmetrize(K22));
  if (llt.info() != Eigen::Success)
    throw NonIntegrableFactor("marginalize_continuous: K block over integrated variables not PD");
  Matrix K22inv_K21 = llt.solve(K12.transpose());
  Vector K22inv_h2 = llt.solve(h2);
  double logdet = 0.0;
  for (int i = 0; i < n2; ++i) logdet += std::log(llt.matrixL()(i, i));
  logdet *= 2.0;

  CanonicalForm out;
  out.scope.reserve(n1);
  for (int p : keep_pos) out.scope.push_back(f.scope[p]);
  out.K = symmetrize(K11 - K12 * K22inv_K21);
  out.h = h1 - K12 * K22inv_h2;
  out.g = f.g + 0.5 * (n2 * std::log(2.0 * M_PI) - logdet + h2.dot(K22inv_h2));
  return out;
}

// Substitute var = value; the result is a form over the remaining scope whose
// value at x equals the original at (x, value).
inline CanonicalForm reduce_continuous_evidence(const CanonicalForm& f, VarId var, double value) {
  int p = f.index_of(var);
  if (p < 0) throw ScopeError("reduce_continuous_evidence: variable not in scope");
  int n = f.dim();
  CanonicalForm out;
  out.scope.reserve(n - 1);
  std::vector<int> keep;
  for (int i = 0; i < n; ++i)
    if (i != p) {
      keep.push_back(i);
      out.scope.push_back(f.scope[i]);
    }
  int n1 = n - 1;
  out.h = Vector(n1);
  out.K = Matrix(n1, n1);
  if (f.is_zero()) {
    out.h.setZero();
    out.K.setZero();
    out.g = kNegInf;
    return out;
  }
  for (int i = 0; i < n1; ++i) {
    out.h[i] = f.h[keep[i]] - f.K(keep[i], p) * value;
    for (int j = 0; j < n1; ++j) out.K(i, j) = f.K(keep[i], keep[j]);
  }
  out.g = f.g + f.h[p] * value - 0.5 * value * f.K(p, p) * value;
  return out;
}

inline LogMoments to_log_moments(const CanonicalForm& f) {
  LogMoments m;
  int n = f.dim();
  m.mean = Vector::Zero(n);
  m.cov = Matrix::Zero(n, n);
  if (f.is_zero()) {
    m.log_weight = kNegInf;
    return m;
  }
  if (n == 0) {
    m.log_weight = f.g;
    return m;
  }
  Eigen::LLT<Matrix> llt(symmetrize(f.K));
  if (llt.info() != Eigen::Success)
    throw NonIntegrableFactor("to_moments: K not positive definite");
  m.mean = llt.solve(f.h);
  m.cov = symmetrize(llt.solve(Matrix::Identity(n, n)));
  double logdet = 0.0;
  for (int i = 0; i < n; ++i) logdet += std::log(llt.matrixL()(i, i));
  logdet *= 2.0;
  m.log_weight = f.g + 0.5 * (f.h.dot(m.mean) + n * std::log(2.0 * M_PI) - logdet);
  return m;
}

inline GaussianMoments to_moments(const CanonicalForm& f) {
  LogMoments lm = to_log_moments(f);
  return GaussianMoments(lm.is_zero() ? 0.0 : std::exp(lm.log_weight), lm.mean, lm.cov);
}

inline CanonicalForm from_log_moments(const LogMoments& m, std::vector<VarId> scope) {
  int n = m.dim();
  if (static_cast<int>(scope.size()) != n)
    throw ScopeError("from_moments: scope size disagrees with moments");
  if (m.is_zero()) return CanonicalForm::zero(std::move(scope));
  CanonicalForm f;
  f.scope = std::move(scope);
  if (n == 0) {
    f.h = Vector(0);
    f.K = Matrix(0, 0);
    f.g = m.log_weight;
    return f;
  }
  Eigen::LLT<Matrix> llt(symmetrize(m.cov));
  if (llt.info() != Eigen::Success)
    throw SingularCovariance("from_moments: covariance not positive definite");
  f.K = symmetrize(llt.solve(Matrix::Identity(n, n)));
  f.h = f.K * m.mean;
  double logdet = 0.0;
  for (int i = 0; i < n; ++i) logdet += std::log(llt.matrixL()(i, i));
  logdet *= 2.0;  // log det cov
  f.g = m.log_weight - 0.5 * (m.mean.dot(f.h) + n * std::log(2.0 * M_PI) + logdet);
  return f;
}

inline CanonicalForm from_moments(const GaussianMoments& m, std::vector<VarId> scope) {
  LogMoments lm;
  lm.log_weight = m.weight > 0.0 ? std::log(m.weight) : kNegInf;
  lm.mean = m.mean;
  lm.cov = m.cov;
  return from_log_moments(lm, std::move(scope));
}

inline int dim_of(const LogMoments& m) { return m.dim(); }

// Moment-match a mixture: total mass, mixture mean, and mixture covariance
// including the between-component spread term.
inline LogMoments collapse_log(const std::vector<LogMoments>& comps) {
  if (comps.empty()) throw EmptyMixture("collapse: no components");
  int n = comps.front().dim();
  std::vector<double> ls;
  ls.reserve(comps.size());
  for (const auto& c : comps) {
    if (c.dim() != n) throw ScopeError("collapse: component dimensions disagree");
    ls.push_back(c.log_weight);
  }
  LogMoments out;
  out.log_weight = log_sum_exp(ls);
  out.mean = Vector::Zero(n);
  out.cov = Matrix::Zero(n, n);
  if (is_log_zero(out.log_weight)) {
    out.log_weight = kNegInf;
    return out;
  }
  std::vector<double> w(comps.size());
  for (size_t i = 0; i < comps.size(); ++i) {
    w[i] = comps[i].is_zero() ? 0.0 : std::exp(comps[i].log_weight - out.log_weight);
    out.mean += w[i] * comps[i].mean;
  }
  for (size_t i = 0; i < comps.size(); ++i) {
    if (w[i] == 0.0) continue;
    Vector d = comps[i].mean - out.mean;
    out.cov += w[i] * (comps[i].cov + d * d.transpose());
  }
  out.cov = psd_repair(out.cov);
  return out;
}

inline GaussianMoments collapse(const std::vector<GaussianMoments>& comps) {
  if (comps.empty()) throw EmptyMixture("collapse: no components");
  std::vector<LogMoments> lms;
  lms.reserve(comps.size());
  double total = 0.0;
  for (const auto& c : comps) {
    if (c.weight < 0.0) throw NumericalError("collapse: negative component weight");
    total += c.weight;
    LogMoments lm;
    lm.log_weight = c.weight > 0.0 ? std::log(c.weight) : kNegInf;
    lm.mean = c.mean;
    lm.cov = c.cov;
    lms.push_back(std::move(lm));
  }
  if (total <= 0.0) throw EmptyMixture("collapse: all component weights zero");
  LogMoments lm = collapse_log(lms);
  return GaussianMoments(std::exp(lm.log_weight), lm.mean, lm.cov);
}

}  // namespace hybridbn
