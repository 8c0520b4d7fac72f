#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "hybridbn/cliquetree.hpp"
#include "hybridbn/hybrid_factor.hpp"
#include "hybridbn/model.hpp"

namespace hybridbn {

enum class TreePhase { Uninitialized, PriorCalibrated, EvidenceCalibrated, CdCalibrated };

struct QueryResult {
  std::vector<VarId> dvars;  // sorted
  std::vector<int> dcards;
  std::vector<VarId> cvars;  // sorted
  double log_mass = kNegInf;     // log P(e)
  std::vector<double> probs;     // normalized, mixed-radix (last dvar fastest)
  std::vector<Vector> means;     // per discrete assignment
  std::vector<Matrix> covs;

  std::size_t rank(const std::vector<int>& states) const {
    std::size_t idx = 0;
    for (size_t i = 0; i < dvars.size(); ++i) idx = idx * dcards[i] + states[i];
    return idx;
  }
};

// Clique tree with Shafer-Shenoy separators over hybrid factors. Evidence is
// always re-applied to the pristine CPD products and the whole tree
// re-calibrated, which makes the result independent of entry order.
class CalibratedTree {
 public:
  CalibratedTree(const Network& net, CliqueTree tree)
      : net_(&net), tree_(std::move(tree)) {
    int n = n_cliques();
    base_.resize(n);
    for (int c = 0; c < n; ++c) {
      const Clique& cl = tree_.cliques[c];
      std::vector<int> cards;
      for (VarId v : cl.dvars) cards.push_back(net.card(v));
      HybridFactor f = HybridFactor::vacuous(cl.dvars, cards, cl.cvars);
      for (std::size_t i : cl.table_cpds)
        f = multiply(f, table_to_factor(net, net.tables[i]).extend_to(f.dvars, f.dcards,
                                                                      f.cvars));
      for (std::size_t i : cl.clg_cpds)
        f = multiply(f, clg_to_factor(net, net.clgs[i]).extend_to(f.dvars, f.dcards,
                                                                  f.cvars));
      base_[c] = std::move(f);
    }
    for (std::size_t s = 0; s < net.softmaxes.size(); ++s) pending_cds_.push_back(s);
    phase_ = TreePhase::Uninitialized;
  }

  const Network& network() const { return *net_; }
  const CliqueTree& tree() const { return tree_; }
  TreePhase phase() const { return phase_; }
  const Evidence& evidence() const { return evidence_; }
  const std::vector<std::size_t>& pending_cds() const { return pending_cds_; }
  int n_cliques() const { return static_cast<int>(tree_.cliques.size()); }

  const HybridFactor& belief(int c) const { return beliefs_.at(c); }

  // separator scope after continuous evidence removed the observed variables
  std::vector<VarId> effective_sep(int c) const {
    std::vector<VarId> s;
    for (VarId v : tree_.cliques[c].sep)
      if (net_->is_discrete(v) || !evidence_.continuous.count(v)) s.push_back(v);
    return s;
  }

  void calibrate() {
    apply_evidence();
    pass_messages();
    phase_ = evidence_.empty() ? TreePhase::PriorCalibrated : TreePhase::EvidenceCalibrated;
  }

  void enter_evidence(const Evidence& ev) {
    validate_evidence(*net_, ev);
    for (const auto& [v, s] : ev.discrete) {
      auto it = evidence_.discrete.find(v);
      if (it != evidence_.discrete.end() && it->second != s)
        throw ValidationError("conflicting evidence for " + net_->var(v).name);
      evidence_.discrete[v] = s;
    }
    for (const auto& [v, x] : ev.continuous) {
      auto it = evidence_.continuous.find(v);
      if (it != evidence_.continuous.end() && it->second != x)
        throw ValidationError("conflicting evidence for " + net_->var(v).name);
      evidence_.continuous[v] = x;
    }
    calibrate();
  }

  // Overwrite one clique's belief and push the change outward through the
  // whole tree, dividing each neighbor by the previous separator belief
  // (HUGIN-style absorption on the belief state).
  void absorb_at(int c, const HybridFactor& new_belief) {
    beliefs_[c] = new_belief;
    std::vector<char> seen(n_cliques(), 0);
    seen[c] = 1;
    std::vector<int> frontier{c};
    while (!frontier.empty()) {
      std::vector<int> next;
      for (int u : frontier) {
        for (int w : neighbors(u)) {
          if (seen[w]) continue;
          seen[w] = 1;
          int edge = sep_edge(u, w);  // edge index = child clique of the edge
          std::vector<VarId> sep = effective_sep(edge);
          std::vector<VarId> sd, sc;
          for (VarId v : sep) (net_->is_discrete(v) ? sd : sc).push_back(v);
          HybridFactor new_sep =
              beliefs_[u].marginalize_to(sd, sc, MarginalPolicy::Collapse);
          beliefs_[w] = multiply(beliefs_[w], divide(new_sep, sep_beliefs_[edge]));
          sep_beliefs_[edge] = std::move(new_sep);
          next.push_back(w);
        }
      }
      frontier = std::move(next);
    }
  }

  void mark_cd_calibrated() {
    pending_cds_.clear();
    phase_ = TreePhase::CdCalibrated;
  }

  // current potential (with evidence applied) of a clique; used by tests
  const HybridFactor& potential(int c) const { return potentials_.at(c); }
  const HybridFactor& separator_belief(int edge_clique) const {
    return sep_beliefs_.at(edge_clique);
  }

  // lowest-index clique whose effective scope covers all of vs
  int find_clique_covering(const std::vector<VarId>& vs) const {
    for (int c = 0; c < n_cliques(); ++c) {
      bool ok = true;
      for (VarId v : vs) {
        const auto& f = beliefs_.at(c);
        bool have = std::find(f.dvars.begin(), f.dvars.end(), v) != f.dvars.end() ||
                    std::find(f.cvars.begin(), f.cvars.end(), v) != f.cvars.end();
        if (!have) {
          ok = false;
          break;
        }
      }
      if (ok) return c;
    }
    return -1;
  }

  QueryResult query(const std::vector<VarId>& q) const {
    if (phase_ == TreePhase::Uninitialized)
      throw ConfigError("query: tree not calibrated");
    if (!pending_cds_.empty())
      throw ConfigError("query: CD CPDs still pending; finish insertion first");
    std::vector<VarId> qd, qc;
    for (VarId v : q) {
      if (evidence_.continuous.count(v))
        throw OutOfCliqueQuery("query: " + net_->var(v).name +
                               " is observed; its posterior is the point value");
      (net_->is_discrete(v) ? qd : qc).push_back(v);
    }
    std::sort(qd.begin(), qd.end());
    std::sort(qc.begin(), qc.end());
    std::vector<VarId> all = qd;
    all.insert(all.end(), qc.begin(), qc.end());
    int c = find_clique_covering(all);
    if (c < 0) {
      std::string names;
      for (VarId v : q) names += (names.empty() ? "" : ", ") + net_->var(v).name;
      throw OutOfCliqueQuery("query {" + names + "} is not covered by any clique");
    }
    HybridFactor m = beliefs_.at(c).marginalize_to(qd, qc, MarginalPolicy::Collapse);
    QueryResult r;
    r.dvars = m.dvars;
    r.dcards = m.dcards;
    r.cvars = m.cvars;
    std::vector<double> lw(m.entries.size());
    std::vector<LogMoments> lms(m.entries.size());
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
      lms[i] = to_log_moments(m.entries[i]);
      lw[i] = lms[i].log_weight;
    }
    r.log_mass = log_sum_exp(lw);
    r.probs.resize(m.entries.size(), 0.0);
    r.means.assign(m.entries.size(), Vector::Zero(m.n_continuous()));
    r.covs.assign(m.entries.size(), Matrix::Zero(m.n_continuous(), m.n_continuous()));
    if (!is_log_zero(r.log_mass)) {
      for (std::size_t i = 0; i < m.entries.size(); ++i) {
        if (is_log_zero(lw[i])) continue;
        r.probs[i] = std::exp(lw[i] - r.log_mass);
        r.means[i] = lms[i].mean;
        r.covs[i] = lms[i].cov;
      }
    }
    return r;
  }

  double log_mass() const {
    std::vector<double> lw;
    for (const auto& e : beliefs_.at(tree_.root).entries)
      lw.push_back(to_log_moments(e).log_weight);
    return log_sum_exp(lw);
  }

  // calibration invariant for tests: both endpoint marginals of every edge
  // agree on the separator
  double max_separator_disagreement() const {
    double worst = 0.0;
    for (int c = 0; c < n_cliques(); ++c) {
      int p = tree_.cliques[c].parent;
      if (p < 0) continue;
      std::vector<VarId> sep = effective_sep(c);
      std::vector<VarId> sd, sc;
      for (VarId v : sep) (net_->is_discrete(v) ? sd : sc).push_back(v);
      HybridFactor a = beliefs_.at(c).marginalize_to(sd, sc, MarginalPolicy::Collapse);
      HybridFactor b = beliefs_.at(p).marginalize_to(sd, sc, MarginalPolicy::Collapse);
      for (std::size_t i = 0; i < a.entries.size(); ++i) {
        LogMoments la = to_log_moments(a.entries[i]);
        LogMoments lb = to_log_moments(b.entries[i]);
        if (la.is_zero() && lb.is_zero()) continue;
        worst = std::max(worst, std::abs(std::exp(la.log_weight) - std::exp(lb.log_weight)));
        if (!la.is_zero() && !lb.is_zero()) {
          if (la.mean.size())
            worst = std::max(worst, (la.mean - lb.mean).cwiseAbs().maxCoeff());
          if (la.cov.size())
            worst = std::max(worst, (la.cov - lb.cov).cwiseAbs().maxCoeff());
        }
      }
    }
    return worst;
  }

 private:
  const Network* net_;
  CliqueTree tree_;
  TreePhase phase_ = TreePhase::Uninitialized;
  Evidence evidence_;
  std::vector<std::size_t> pending_cds_;
  std::vector<HybridFactor> base_;        // pristine CPD products
  std::vector<HybridFactor> potentials_;  // with evidence applied
  std::vector<HybridFactor> up_;  // per non-root clique (indexed by child)
  std::vector<HybridFactor> beliefs_;
  std::vector<HybridFactor> sep_beliefs_;  // per non-root clique (edge to parent)

  std::vector<int> neighbors(int c) const {
    std::vector<int> ns = tree_.cliques[c].children;
    if (tree_.cliques[c].parent >= 0) ns.push_back(tree_.cliques[c].parent);
    return ns;
  }

  // edges are indexed by their child-side clique
  int sep_edge(int a, int b) const { return tree_.cliques[a].parent == b ? a : b; }

  void apply_evidence() {
    potentials_ = base_;
    for (auto& f : potentials_) {
      for (const auto& [v, s] : evidence_.discrete) {
        auto it = std::find(f.dvars.begin(), f.dvars.end(), v);
        if (it == f.dvars.end()) continue;
        f = multiply(f, HybridFactor::indicator(v, f.dcards[it - f.dvars.begin()], s));
      }
      for (const auto& [v, x] : evidence_.continuous) {
        if (std::find(f.cvars.begin(), f.cvars.end(), v) == f.cvars.end()) continue;
        f = f.reduce_continuous(v, x);
      }
    }
  }

  void pass_messages() {
    int n = n_cliques();
    up_.assign(n, {});
    // post-order via DFS stack
    std::vector<int> order;
    std::vector<int> stack{tree_.root};
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      order.push_back(u);
      for (int w : tree_.cliques[u].children) stack.push_back(w);
    }
    // collect: children before parents, exact marginalization only
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      int c = *it;
      if (c == tree_.root) continue;
      HybridFactor prod = potentials_[c];
      for (int w : tree_.cliques[c].children) prod = multiply(prod, up_[w]);
      std::vector<VarId> sep = effective_sep(c);
      std::vector<VarId> sd, sc;
      for (VarId v : sep) (net_->is_discrete(v) ? sd : sc).push_back(v);
      try {
        up_[c] = prod.marginalize_to(sd, sc, MarginalPolicy::Exact);
      } catch (const NonIntegrableFactor& e) {
        throw StrongRootViolation(
            std::string("collect pass required an inexact marginalization: ") + e.what());
      }
    }
    // distribute, parents before children: each clique receives its parent's
    // full-belief weak marginal divided by its own up message. Collapsing only
    // fully-informed mixtures makes every belief the weak marginal of the
    // posterior and gives separator consistency by construction.
    beliefs_.assign(n, {});
    sep_beliefs_.assign(n, {});
    for (int u : order) {
      HybridFactor b = potentials_[u];
      for (int w : tree_.cliques[u].children) b = multiply(b, up_[w]);
      if (u != tree_.root) {
        std::vector<VarId> sep = effective_sep(u);
        std::vector<VarId> sd, sc;
        for (VarId v : sep) (net_->is_discrete(v) ? sd : sc).push_back(v);
        int p = tree_.cliques[u].parent;
        HybridFactor m = beliefs_[p].marginalize_to(sd, sc, MarginalPolicy::Collapse);
        b = multiply(b, divide(m, up_[u]));
        sep_beliefs_[u] = std::move(m);
      }
      beliefs_[u] = std::move(b);
    }
  }
};

}  // namespace hybridbn
