#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hybridbn/canonical.hpp"
#include "hybridbn/errors.hpp"
#include "hybridbn/hybrid_factor.hpp"
#include "hybridbn/numeric.hpp"

namespace hybridbn {

enum class VarKind { Discrete, Continuous };

struct Variable {
  VarId id = -1;
  std::string name;
  VarKind kind = VarKind::Discrete;
  std::vector<std::string> states;  // discrete only

  int card() const { return static_cast<int>(states.size()); }
};

// Mixed-radix helpers shared by CPD row tables (parents in declared order,
// last parent fastest -- same convention as HybridFactor).
inline std::size_t rank_assignment(const std::vector<int>& cards, const std::vector<int>& states) {
  std::size_t idx = 0;
  for (size_t i = 0; i < cards.size(); ++i) idx = idx * cards[i] + states[i];
  return idx;
}

inline std::vector<int> unrank_assignment(const std::vector<int>& cards, std::size_t idx) {
  std::vector<int> st(cards.size());
  for (int i = static_cast<int>(cards.size()) - 1; i >= 0; --i) {
    st[i] = static_cast<int>(idx % cards[i]);
    idx /= cards[i];
  }
  return st;
}

inline std::size_t n_assignments(const std::vector<int>& cards) {
  std::size_t n = 1;
  for (int c : cards) n *= static_cast<std::size_t>(c);
  return n;
}

struct DiscreteTableCPD {
  VarId child = -1;
  std::vector<VarId> parents;
  std::vector<std::vector<double>> rows;  // one row per parent assignment, over child states
};

struct CLGCPD {
  VarId child = -1;
  std::vector<VarId> dparents;
  std::vector<VarId> cparents;
  struct Row {
    double intercept = 0.0;
    std::vector<double> weights;  // aligned with cparents
    double variance = 1.0;
  };
  std::vector<Row> rows;  // one per discrete-parent assignment
};

// One polynomial feature over the continuous parents: a sum of coefficient *
// product of parent powers. powers holds (cparent position, exponent) pairs.
struct FeatureTerm {
  double coeff = 1.0;
  std::vector<std::pair<int, int>> powers;

  double eval(const Vector& y) const {
    double v = coeff;
    for (auto [p, e] : powers)
      for (int k = 0; k < e; ++k) v *= y[p];
    return v;
  }
  int degree() const {
    int d = 0;
    for (auto [p, e] : powers) d += e;
    return d;
  }
};

struct Feature {
  std::vector<FeatureTerm> terms;

  double eval(const Vector& y) const {
    double v = 0.0;
    for (const auto& t : terms) v += t.eval(y);
    return v;
  }
  bool is_linear() const {
    for (const auto& t : terms)
      if (t.degree() > 1) return false;
    return true;
  }

  static Feature identity(int cparent_pos) {
    Feature f;
    f.terms.push_back(FeatureTerm{1.0, {{cparent_pos, 1}}});
    return f;
  }
};

struct SoftmaxCPD {
  VarId child = -1;
  std::vector<VarId> dparents;
  std::vector<VarId> cparents;
  std::vector<Feature> features;  // size r; defaults to identity features on load
  struct Block {
    std::vector<double> bias;  // one per child state
    Matrix weights;            // child states x features
  };
  std::vector<Block> blocks;  // one per discrete-parent assignment

  bool all_features_linear() const {
    for (const auto& f : features)
      if (!f.is_linear()) return false;
    return true;
  }

  Vector feature_values(const Vector& y) const {
    Vector phi(features.size());
    for (size_t i = 0; i < features.size(); ++i) phi[i] = features[i].eval(y);
    return phi;
  }

  // Rewrite logit_i = b_i + w_i . phi(y) as b'_i + a_i . y. Only valid when
  // every feature is linear in y; constant feature terms fold into the bias.
  void linear_rows(std::size_t block_idx, Vector& bias_out, Matrix& w_out) const {
    if (!all_features_linear())
      throw NumericalError("linear_rows: softmax has nonlinear features");
    const Block& blk = blocks.at(block_idx);
    int m = static_cast<int>(blk.bias.size());
    int k = static_cast<int>(cparents.size());
    int r = static_cast<int>(features.size());
    Vector c0 = Vector::Zero(r);    // constant part of each feature
    Matrix A = Matrix::Zero(r, k);  // linear part of each feature
    for (int f = 0; f < r; ++f) {
      for (const auto& t : features[f].terms) {
        if (t.degree() == 0) {
          c0[f] += t.coeff;
        } else {
          for (auto [p, e] : t.powers)
            if (e == 1) A(f, p) += t.coeff;
        }
      }
    }
    bias_out = Vector(m);
    for (int i = 0; i < m; ++i) bias_out[i] = blk.bias[i] + blk.weights.row(i).dot(c0);
    w_out = blk.weights * A;
  }
};

// Softmax over logits with max subtraction; sums to 1 by construction.
inline std::vector<double> eval_cd(const SoftmaxCPD& cpd, std::size_t block_idx,
                                   const Vector& y) {
  const auto& blk = cpd.blocks.at(block_idx);
  Vector phi = cpd.feature_values(y);
  if (!phi.allFinite()) throw NumericalError("eval_cd: non-finite feature value");
  int m = static_cast<int>(blk.bias.size());
  std::vector<double> logits(m);
  double mx = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < m; ++i) {
    logits[i] = blk.bias[i] + blk.weights.row(i).dot(phi);
    mx = std::max(mx, logits[i]);
  }
  double z = 0.0;
  for (int i = 0; i < m; ++i) {
    logits[i] = std::exp(logits[i] - mx);
    z += logits[i];
  }
  for (double& v : logits) v /= z;
  return logits;
}

enum class CPDKind { Table, CLG, Softmax };

struct Network {
  std::vector<Variable> variables;  // ids are positions
  std::vector<DiscreteTableCPD> tables;
  std::vector<CLGCPD> clgs;
  std::vector<SoftmaxCPD> softmaxes;

  struct CPDRef {
    CPDKind kind;
    std::size_t index;
  };
  std::map<VarId, CPDRef> cpd_of;

  const Variable& var(VarId id) const {
    if (id < 0 || id >= static_cast<VarId>(variables.size()))
      throw ScopeError("unknown variable id " + std::to_string(id));
    return variables[id];
  }

  std::optional<VarId> id_of(const std::string& name) const {
    for (const auto& v : variables)
      if (v.name == name) return v.id;
    return std::nullopt;
  }

  bool is_discrete(VarId id) const { return var(id).kind == VarKind::Discrete; }
  int card(VarId id) const { return var(id).card(); }

  std::vector<VarId> parents_of(VarId id) const {
    auto it = cpd_of.find(id);
    if (it == cpd_of.end()) return {};
    std::vector<VarId> ps;
    switch (it->second.kind) {
      case CPDKind::Table:
        ps = tables[it->second.index].parents;
        break;
      case CPDKind::CLG: {
        const auto& c = clgs[it->second.index];
        ps = c.dparents;
        ps.insert(ps.end(), c.cparents.begin(), c.cparents.end());
        break;
      }
      case CPDKind::Softmax: {
        const auto& c = softmaxes[it->second.index];
        ps = c.dparents;
        ps.insert(ps.end(), c.cparents.begin(), c.cparents.end());
        break;
      }
    }
    return ps;
  }

  // Kahn's algorithm, breaking ties by ascending id for determinism.
  std::vector<VarId> topological_order() const {
    std::vector<int> indeg(variables.size(), 0);
    std::vector<std::vector<VarId>> children(variables.size());
    for (const auto& v : variables)
      for (VarId p : parents_of(v.id)) {
        children[p].push_back(v.id);
        ++indeg[v.id];
      }
    std::vector<VarId> ready, order;
    for (const auto& v : variables)
      if (indeg[v.id] == 0) ready.push_back(v.id);
    while (!ready.empty()) {
      std::sort(ready.begin(), ready.end(), std::greater<>());
      VarId u = ready.back();
      ready.pop_back();
      order.push_back(u);
      for (VarId c : children[u])
        if (--indeg[c] == 0) ready.push_back(c);
    }
    if (order.size() != variables.size())
      throw CycleError("network graph contains a directed cycle");
    return order;
  }
};

struct Evidence {
  std::map<VarId, int> discrete;
  std::map<VarId, double> continuous;

  bool observed(VarId id) const {
    return discrete.count(id) > 0 || continuous.count(id) > 0;
  }
  bool empty() const { return discrete.empty() && continuous.empty(); }
};

inline void validate_evidence(const Network& net, const Evidence& ev) {
  for (const auto& [id, st] : ev.discrete) {
    const Variable& v = net.var(id);
    if (v.kind != VarKind::Discrete)
      throw ValidationError("evidence: " + v.name + " is not discrete");
    if (st < 0 || st >= v.card())
      throw ValidationError("evidence: state out of range for " + v.name);
  }
  for (const auto& [id, val] : ev.continuous) {
    const Variable& v = net.var(id);
    if (v.kind != VarKind::Continuous)
      throw ValidationError("evidence: " + v.name + " is not continuous");
    if (!std::isfinite(val))
      throw ValidationError("evidence: non-finite value for " + v.name);
  }
}

// All structural violations, as data; empty means the network is a valid
// augmented CLG.
inline std::vector<std::string> validate_network(const Network& net) {
  std::vector<std::string> out;
  auto dcards = [&](const std::vector<VarId>& vs) {
    std::vector<int> c;
    for (VarId v : vs) c.push_back(net.var(v).card());
    return c;
  };
  for (const auto& v : net.variables) {
    if (v.kind == VarKind::Discrete && v.card() < 2)
      out.push_back("variable " + v.name + ": discrete cardinality must be >= 2");
    auto it = net.cpd_of.find(v.id);
    if (it == net.cpd_of.end()) {
      out.push_back("variable " + v.name + ": no CPD");
      continue;
    }
    bool has_cont_parent = false;
    for (VarId p : net.parents_of(v.id))
      if (!net.is_discrete(p)) has_cont_parent = true;
    if (v.kind == VarKind::Continuous && it->second.kind != CPDKind::CLG)
      out.push_back("variable " + v.name + ": continuous child needs CLG");
    if (v.kind == VarKind::Discrete) {
      if (has_cont_parent && it->second.kind != CPDKind::Softmax)
        out.push_back("variable " + v.name +
                      ": discrete child of continuous parents needs softmax CPD");
      if (!has_cont_parent && it->second.kind == CPDKind::CLG)
        out.push_back("variable " + v.name + ": discrete child cannot have a CLG CPD");
    }
  }
  for (const auto& t : net.tables) {
    if (net.var(t.child).kind != VarKind::Discrete) {
      out.push_back("table CPD child " + net.var(t.child).name + " is not discrete");
      continue;
    }
    for (VarId p : t.parents)
      if (!net.is_discrete(p))
        out.push_back("table CPD for " + net.var(t.child).name +
                      " has continuous parent " + net.var(p).name);
    std::size_t want = n_assignments(dcards(t.parents));
    if (t.rows.size() != want) {
      out.push_back("table CPD for " + net.var(t.child).name + ": expected " +
                    std::to_string(want) + " rows, got " + std::to_string(t.rows.size()));
      continue;
    }
    for (const auto& row : t.rows) {
      if (static_cast<int>(row.size()) != net.card(t.child)) {
        out.push_back("table CPD for " + net.var(t.child).name + ": row length mismatch");
        break;
      }
      double s = 0.0;
      bool neg = false;
      for (double p : row) {
        s += p;
        neg = neg || p < 0.0;
      }
      if (neg || std::abs(s - 1.0) > 1e-9) {
        out.push_back("table CPD for " + net.var(t.child).name +
                      ": row not a distribution (sum " + std::to_string(s) + ")");
        break;
      }
    }
  }
  for (const auto& c : net.clgs) {
    std::size_t want = n_assignments(dcards(c.dparents));
    if (c.rows.size() != want)
      out.push_back("CLG CPD for " + net.var(c.child).name + ": row count mismatch");
    for (const auto& r : c.rows) {
      if (r.variance <= 0.0)
        out.push_back("CLG CPD for " + net.var(c.child).name + ": variance must be positive");
      if (r.weights.size() != c.cparents.size())
        out.push_back("CLG CPD for " + net.var(c.child).name + ": weight length mismatch");
    }
  }
  for (const auto& s : net.softmaxes) {
    if (s.cparents.empty())
      out.push_back("softmax CPD for " + net.var(s.child).name +
                    " needs at least one continuous parent (use a table CPD)");
    std::size_t want = n_assignments(dcards(s.dparents));
    if (s.blocks.size() != want)
      out.push_back("softmax CPD for " + net.var(s.child).name + ": block count mismatch");
    for (const auto& b : s.blocks) {
      if (static_cast<int>(b.bias.size()) != net.card(s.child) ||
          b.weights.rows() != net.card(s.child) ||
          b.weights.cols() != static_cast<Eigen::Index>(s.features.size()))
        out.push_back("softmax CPD for " + net.var(s.child).name + ": block shape mismatch");
    }
    for (const auto& f : s.features)
      for (const auto& t : f.terms)
        for (auto [p, e] : t.powers)
          if (p < 0 || p >= static_cast<int>(s.cparents.size()) || e < 0)
            out.push_back("softmax CPD for " + net.var(s.child).name +
                          ": feature references invalid parent position");
  }
  // cycle check last, reported as a violation rather than thrown
  try {
    net.topological_order();
  } catch (const CycleError& e) {
    out.push_back(e.what());
  }
  return out;
}

// Canonical form of N(child; intercept + w.y, variance) over scope
// (child, cparents...) in declared order.
inline CanonicalForm clg_to_canonical(const CLGCPD& cpd, std::size_t row_idx) {
  const auto& r = cpd.rows.at(row_idx);
  int k = static_cast<int>(cpd.cparents.size());
  double inv = 1.0 / r.variance;
  CanonicalForm f;
  f.scope.push_back(cpd.child);
  f.scope.insert(f.scope.end(), cpd.cparents.begin(), cpd.cparents.end());
  f.h = Vector(k + 1);
  f.K = Matrix(k + 1, k + 1);
  f.K(0, 0) = inv;
  f.h[0] = r.intercept * inv;
  for (int i = 0; i < k; ++i) {
    f.K(0, i + 1) = f.K(i + 1, 0) = -r.weights[i] * inv;
    f.h[i + 1] = -r.intercept * r.weights[i] * inv;
    for (int j = 0; j < k; ++j)
      f.K(i + 1, j + 1) = r.weights[i] * r.weights[j] * inv;
  }
  f.g = -0.5 * r.intercept * r.intercept * inv - 0.5 * std::log(2.0 * M_PI * r.variance);
  return f;
}

// Whole CLG CPD as a hybrid factor (one canonical form per discrete-parent
// assignment).
inline HybridFactor clg_to_factor(const Network& net, const CLGCPD& cpd) {
  std::vector<int> cards;
  for (VarId v : cpd.dparents) cards.push_back(net.card(v));
  std::vector<VarId> cvars;
  cvars.push_back(cpd.child);
  cvars.insert(cvars.end(), cpd.cparents.begin(), cpd.cparents.end());
  HybridFactor f = HybridFactor::vacuous(cpd.dparents, cards, cvars);
  // factor scope is sorted; fill via assignment mapping
  for (std::size_t i = 0; i < f.n_entries(); ++i) {
    std::vector<int> st = f.unrank(i);
    // translate factor states (sorted scope) to cpd row index (declared order)
    std::vector<int> cpd_states(cpd.dparents.size());
    for (size_t j = 0; j < cpd.dparents.size(); ++j) {
      auto it = std::find(f.dvars.begin(), f.dvars.end(), cpd.dparents[j]);
      cpd_states[j] = st[it - f.dvars.begin()];
    }
    f.entries[i] = extend(clg_to_canonical(cpd, rank_assignment(cards, cpd_states)), f.cvars);
  }
  return f;
}

inline HybridFactor table_to_factor(const Network& net, const DiscreteTableCPD& cpd) {
  std::vector<VarId> scope = cpd.parents;
  scope.push_back(cpd.child);
  std::vector<int> cards;
  std::vector<int> parent_cards;
  for (VarId v : cpd.parents) parent_cards.push_back(net.card(v));
  for (VarId v : scope) cards.push_back(net.card(v));
  HybridFactor f = HybridFactor::vacuous(scope, cards, {});
  for (std::size_t i = 0; i < f.n_entries(); ++i) {
    std::vector<int> st = f.unrank(i);
    std::vector<int> pstates(cpd.parents.size());
    int child_state = 0;
    for (size_t j = 0; j < f.dvars.size(); ++j) {
      if (f.dvars[j] == cpd.child) {
        child_state = st[j];
        continue;
      }
      auto it = std::find(cpd.parents.begin(), cpd.parents.end(), f.dvars[j]);
      pstates[it - cpd.parents.begin()] = st[j];
    }
    double p = cpd.rows[rank_assignment(parent_cards, pstates)][child_state];
    f.entries[i].g = p > 0.0 ? std::log(p) : kNegInf;
  }
  return f;
}

}  // namespace hybridbn
