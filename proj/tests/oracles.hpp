#pragma once

// Independent reference implementations used only by tests. Deliberately
// naive: dense Simpson integration, exhaustive enumeration, and direct
// linear-Gaussian composition, with no code shared with the library's
// inference path beyond the model types.

#include <cmath>
#include <functional>
#include <map>
#include <vector>

#include "hybridbn/model.hpp"

namespace oracles {

using hybridbn::Matrix;
using hybridbn::Network;
using hybridbn::VarId;
using hybridbn::Vector;

// Composite Simpson rule on [lo, hi] with n even intervals.
inline double simpson(const std::function<double(double)>& f, double lo, double hi,
                      int n = 100000) {
  if (n % 2) ++n;
  double h = (hi - lo) / n;
  double acc = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) acc += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

struct SigmoidMoments {
  double p;     // E[s(X)] under N(0,1)
  double mean;  // E[X | A]
  double var;   // Var[X | A]
};

// Moments of X ~ N(0,1) conditioned on a binary child with P(a1|x) = sigmoid(x).
inline SigmoidMoments sigmoid_gaussian_moments() {
  auto phi = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); };
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  double m0 = simpson([&](double x) { return phi(x) * sig(x); }, -10, 10);
  double m1 = simpson([&](double x) { return x * phi(x) * sig(x); }, -10, 10);
  double m2 = simpson([&](double x) { return x * x * phi(x) * sig(x); }, -10, 10);
  double mean = m1 / m0;
  return {m0, mean, m2 / m0 - mean * mean};
}

// Exhaustive joint of a fully discrete network. Returns the unnormalized
// weight of every full assignment consistent with the evidence.
inline std::map<std::vector<int>, double> enumerate_discrete(
    const Network& net, const std::map<VarId, int>& evidence) {
  int n = static_cast<int>(net.variables.size());
  std::vector<int> cards(n);
  for (int i = 0; i < n; ++i) cards[i] = net.card(i);
  std::map<std::vector<int>, double> out;
  std::vector<int> asg(n, 0);
  while (true) {
    bool ok = true;
    for (auto [v, s] : evidence)
      if (asg[v] != s) ok = false;
    if (ok) {
      double w = 1.0;
      for (const auto& cpd : net.tables) {
        std::size_t row = 0;
        for (VarId p : cpd.parents) row = row * net.card(p) + asg[p];
        w *= cpd.rows[row][asg[cpd.child]];
      }
      out[asg] = w;
    }
    int i = n - 1;
    for (; i >= 0; --i) {
      if (++asg[i] < cards[i]) break;
      asg[i] = 0;
    }
    if (i < 0) break;
  }
  return out;
}

// One discrete assignment's continuous joint in a pure-CLG network.
struct GaussianBranch {
  double weight = 1.0;      // prior discrete probability x evidence density
  std::vector<VarId> vars;  // continuous vars in composition order
  Vector mean;
  Matrix cov;

  int pos(VarId v) const {
    for (size_t i = 0; i < vars.size(); ++i)
      if (vars[i] == v) return static_cast<int>(i);
    return -1;
  }
};

// Compose the joint Gaussian over all continuous variables for a fixed
// discrete assignment, then condition on continuous evidence.
inline GaussianBranch clg_branch(const Network& net, const std::vector<int>& asg,
                                 const std::map<VarId, double>& cont_evidence) {
  GaussianBranch br;
  for (const auto& cpd : net.tables) {
    std::size_t row = 0;
    for (VarId p : cpd.parents) row = row * net.card(p) + asg[p];
    br.weight *= cpd.rows[row][asg[cpd.child]];
  }
  br.mean = Vector::Zero(0);
  br.cov = Matrix::Zero(0, 0);
  for (VarId v : net.topological_order()) {
    if (net.is_discrete(v)) continue;
    auto ref = net.cpd_of.at(v);
    const auto& cpd = net.clgs[ref.index];
    std::size_t row = 0;
    for (VarId p : cpd.dparents) row = row * net.card(p) + asg[p];
    const auto& r = cpd.rows[row];
    int k = static_cast<int>(br.vars.size());
    Vector w = Vector::Zero(k);
    double mu = r.intercept;
    for (size_t j = 0; j < cpd.cparents.size(); ++j) {
      int p = br.pos(cpd.cparents[j]);
      w[p] = r.weights[j];
      mu += r.weights[j] * br.mean[p];
    }
    Vector cross = br.cov * w;  // cov(new, existing)
    double var = w.dot(cross) + r.variance;
    Vector mean2(k + 1);
    mean2 << br.mean, mu;
    Matrix cov2(k + 1, k + 1);
    cov2.topLeftCorner(k, k) = br.cov;
    cov2.topRightCorner(k, 1) = cross;
    cov2.bottomLeftCorner(1, k) = cross.transpose();
    cov2(k, k) = var;
    br.mean = mean2;
    br.cov = cov2;
    br.vars.push_back(v);
  }
  // condition on continuous evidence one variable at a time
  for (auto [v, x] : cont_evidence) {
    int p = br.pos(v);
    int k = static_cast<int>(br.vars.size());
    double m = br.mean[p], s2 = br.cov(p, p);
    br.weight *= std::exp(-0.5 * (x - m) * (x - m) / s2) / std::sqrt(2.0 * M_PI * s2);
    Vector gain = br.cov.col(p) / s2;
    Vector mean2 = br.mean + gain * (x - m);
    Matrix cov2 = br.cov - gain * br.cov.row(p);
    std::vector<int> keep;
    for (int i = 0; i < k; ++i)
      if (i != p) keep.push_back(i);
    Vector mean3(k - 1);
    Matrix cov3(k - 1, k - 1);
    std::vector<VarId> vars3;
    for (size_t i = 0; i < keep.size(); ++i) {
      mean3[i] = mean2[keep[i]];
      vars3.push_back(br.vars[keep[i]]);
      for (size_t j = 0; j < keep.size(); ++j) cov3(i, j) = cov2(keep[i], keep[j]);
    }
    br.mean = mean3;
    br.cov = cov3;
    br.vars = vars3;
  }
  return br;
}

struct CLGOracle {
  std::vector<std::vector<int>> assignments;  // discrete assignments (full)
  std::vector<GaussianBranch> branches;
  double total = 0.0;

  // P(v = s | e)
  double prob(VarId v, int s) const {
    double acc = 0.0;
    for (size_t i = 0; i < branches.size(); ++i)
      if (assignments[i][v] == s) acc += branches[i].weight;
    return acc / total;
  }

  // collapsed mean/variance of one continuous variable across all branches
  void moments(VarId v, double& mean, double& var) const {
    double m = 0.0;
    for (size_t i = 0; i < branches.size(); ++i)
      m += branches[i].weight * branches[i].mean[branches[i].pos(v)];
    m /= total;
    double s = 0.0;
    for (size_t i = 0; i < branches.size(); ++i) {
      int p = branches[i].pos(v);
      double d = branches[i].mean[p] - m;
      s += branches[i].weight * (branches[i].cov(p, p) + d * d);
    }
    mean = m;
    var = s / total;
  }
};

// Brute force over every discrete assignment of a pure-CLG network.
inline CLGOracle clg_oracle(const Network& net, const std::map<VarId, int>& disc_evidence,
                            const std::map<VarId, double>& cont_evidence) {
  CLGOracle out;
  int n = static_cast<int>(net.variables.size());
  std::vector<int> cards(n, 1);
  for (int i = 0; i < n; ++i)
    if (net.is_discrete(i)) cards[i] = net.card(i);
  std::vector<int> asg(n, 0);
  while (true) {
    bool ok = true;
    for (auto [v, s] : disc_evidence)
      if (asg[v] != s) ok = false;
    if (ok) {
      GaussianBranch br = clg_branch(net, asg, cont_evidence);
      if (br.weight > 0) {
        out.assignments.push_back(asg);
        out.total += br.weight;
        out.branches.push_back(std::move(br));
      }
    }
    int i = n - 1;
    for (; i >= 0; --i) {
      if (++asg[i] < cards[i]) break;
      asg[i] = 0;
    }
    if (i < 0) break;
  }
  return out;
}

}  // namespace oracles
