#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "hybridbn/canonical.hpp"
#include "hybridbn/errors.hpp"
#include "hybridbn/numeric.hpp"

namespace hybridbn {

enum class MarginalPolicy {
  Exact,     // refuse to sum Gaussian potentials over discrete states
  Collapse,  // moment-match the mixture instead
};

// A potential over mixed scope: one canonical form per discrete assignment,
// all sharing the continuous scope. Discrete scope is kept sorted by id and
// indexed mixed-radix with the last variable fastest.
class HybridFactor {
 public:
  std::vector<VarId> dvars;
  std::vector<int> dcards;
  std::vector<VarId> cvars;
  std::vector<CanonicalForm> entries;

  HybridFactor() = default;

  static HybridFactor vacuous(std::vector<VarId> dv, std::vector<int> dc,
                              std::vector<VarId> cv) {
    HybridFactor f;
    f.dvars = std::move(dv);
    f.dcards = std::move(dc);
    f.cvars = std::move(cv);
    f.sort_discrete();
    std::sort(f.cvars.begin(), f.cvars.end());
    f.entries.assign(f.n_entries(), CanonicalForm::vacuous(f.cvars));
    return f;
  }

  static HybridFactor from_canonical(CanonicalForm cf) {
    HybridFactor f;
    f.cvars = cf.scope;
    f.entries.push_back(std::move(cf));
    return f;
  }

  // 1 on the given state, 0 elsewhere.
  static HybridFactor indicator(VarId var, int card, int state) {
    if (state < 0 || state >= card)
      throw ScopeError("indicator: state out of range for variable " + std::to_string(var));
    HybridFactor f = vacuous({var}, {card}, {});
    for (int s = 0; s < card; ++s)
      if (s != state) f.entries[s].g = kNegInf;
    return f;
  }

  std::size_t n_entries() const {
    std::size_t n = 1;
    for (int c : dcards) n *= static_cast<std::size_t>(c);
    return n;
  }

  int n_discrete() const { return static_cast<int>(dvars.size()); }
  int n_continuous() const { return static_cast<int>(cvars.size()); }

  std::size_t rank(const std::vector<int>& states) const {
    std::size_t idx = 0;
    for (size_t i = 0; i < dvars.size(); ++i) idx = idx * dcards[i] + states[i];
    return idx;
  }

  std::vector<int> unrank(std::size_t idx) const {
    std::vector<int> st(dvars.size());
    for (int i = n_discrete() - 1; i >= 0; --i) {
      st[i] = static_cast<int>(idx % dcards[i]);
      idx /= dcards[i];
    }
    return st;
  }

  int card_of(VarId v) const {
    auto it = std::find(dvars.begin(), dvars.end(), v);
    if (it == dvars.end()) throw ScopeError("card_of: variable not in discrete scope");
    return dcards[it - dvars.begin()];
  }

  void validate() const {
    if (dvars.size() != dcards.size())
      throw ScopeError("hybrid factor: discrete vars and cards disagree");
    if (!std::is_sorted(dvars.begin(), dvars.end()))
      throw ScopeError("hybrid factor: discrete scope not sorted");
    if (std::adjacent_find(dvars.begin(), dvars.end()) != dvars.end())
      throw ScopeError("hybrid factor: duplicate discrete variable");
    if (entries.size() != n_entries())
      throw ScopeError("hybrid factor: table size mismatch");
    for (const auto& e : entries) {
      if (e.scope != cvars) throw ScopeError("hybrid factor: entry scope differs from factor");
      e.validate();
    }
  }

  // Embed into larger scopes. Target discrete scope must be sorted and a
  // superset; continuous target must contain cvars (any order).
  HybridFactor extend_to(const std::vector<VarId>& dv2, const std::vector<int>& dc2,
                         const std::vector<VarId>& cv2) const {
    HybridFactor out = vacuous(dv2, dc2, cv2);
    // position of each of our discrete vars inside the target scope
    std::vector<int> pos(dvars.size());
    for (size_t i = 0; i < dvars.size(); ++i) {
      auto it = std::find(out.dvars.begin(), out.dvars.end(), dvars[i]);
      if (it == out.dvars.end())
        throw ScopeError("extend_to: target discrete scope misses a variable");
      pos[i] = static_cast<int>(it - out.dvars.begin());
      if (out.dcards[pos[i]] != dcards[i])
        throw ScopeError("extend_to: cardinality clash for variable " +
                         std::to_string(dvars[i]));
    }
    std::vector<CanonicalForm> cache(entries.size());
    std::vector<char> cached(entries.size(), 0);
    std::vector<int> src_states(dvars.size());
    for (std::size_t t = 0; t < out.entries.size(); ++t) {
      std::vector<int> tst = out.unrank(t);
      for (size_t i = 0; i < dvars.size(); ++i) src_states[i] = tst[pos[i]];
      std::size_t s = rank(src_states);
      if (!cached[s]) {
        cache[s] = extend(entries[s], out.cvars);
        cached[s] = 1;
      }
      out.entries[t] = cache[s];
    }
    return out;
  }

  HybridFactor reduce_discrete(VarId var, int state) const {
    auto it = std::find(dvars.begin(), dvars.end(), var);
    if (it == dvars.end()) throw ScopeError("reduce_discrete: variable not in scope");
    size_t p = it - dvars.begin();
    if (state < 0 || state >= dcards[p])
      throw ScopeError("reduce_discrete: state out of range");
    HybridFactor out;
    out.cvars = cvars;
    out.dvars = dvars;
    out.dcards = dcards;
    out.dvars.erase(out.dvars.begin() + p);
    out.dcards.erase(out.dcards.begin() + p);
    out.entries.reserve(out.n_entries());
    std::vector<int> st(dvars.size());
    for (std::size_t t = 0; t < out.n_entries(); ++t) {
      std::vector<int> tst = out.unrank(t);
      for (size_t i = 0, j = 0; i < dvars.size(); ++i)
        st[i] = (i == p) ? state : tst[j++];
      out.entries.push_back(entries[rank(st)]);
    }
    return out;
  }

  HybridFactor reduce_continuous(VarId var, double value) const {
    HybridFactor out;
    out.dvars = dvars;
    out.dcards = dcards;
    out.entries.reserve(entries.size());
    for (const auto& e : entries)
      out.entries.push_back(reduce_continuous_evidence(e, var, value));
    out.cvars = out.entries.front().scope;  // table is never empty
    return out;
  }

  HybridFactor integrate_out_continuous(const std::vector<VarId>& out_cvars) const {
    if (out_cvars.empty()) return *this;
    HybridFactor out;
    out.dvars = dvars;
    out.dcards = dcards;
    out.entries.reserve(entries.size());
    for (const auto& e : entries)
      out.entries.push_back(marginalize_continuous(e, out_cvars));
    out.cvars = out.entries.front().scope;
    return out;
  }

  HybridFactor sum_out_discrete(const std::vector<VarId>& out_dvars,
                                MarginalPolicy policy) const {
    if (out_dvars.empty()) return *this;
    HybridFactor out;
    out.cvars = cvars;
    std::vector<int> keep_pos;
    for (size_t i = 0; i < dvars.size(); ++i) {
      if (std::find(out_dvars.begin(), out_dvars.end(), dvars[i]) == out_dvars.end()) {
        keep_pos.push_back(static_cast<int>(i));
        out.dvars.push_back(dvars[i]);
        out.dcards.push_back(dcards[i]);
      }
    }
    std::vector<std::vector<const CanonicalForm*>> groups(out.n_entries());
    for (std::size_t s = 0; s < entries.size(); ++s) {
      std::vector<int> st = unrank(s);
      std::vector<int> tst(keep_pos.size());
      for (size_t i = 0; i < keep_pos.size(); ++i) tst[i] = st[keep_pos[i]];
      groups[out.rank(tst)].push_back(&entries[s]);
    }
    out.entries.reserve(groups.size());
    for (auto& grp : groups) {
      if (cvars.empty()) {
        std::vector<double> gs;
        gs.reserve(grp.size());
        for (const auto* e : grp) gs.push_back(e->g);
        CanonicalForm cf = CanonicalForm::vacuous({});
        cf.g = log_sum_exp(gs);
        if (is_log_zero(cf.g)) cf.g = kNegInf;
        out.entries.push_back(std::move(cf));
        continue;
      }
      std::vector<const CanonicalForm*> live;
      for (const auto* e : grp)
        if (!e->is_zero()) live.push_back(e);
      if (live.empty()) {
        out.entries.push_back(CanonicalForm::zero(cvars));
      } else if (live.size() == 1) {
        out.entries.push_back(*live.front());
      } else if (policy == MarginalPolicy::Exact) {
        throw NonIntegrableFactor(
            "sum over discrete states of distinct Gaussian potentials is not exact");
      } else {
        std::vector<LogMoments> comps;
        comps.reserve(live.size());
        for (const auto* e : live) comps.push_back(to_log_moments(*e));
        out.entries.push_back(from_log_moments(collapse_log(comps), cvars));
      }
    }
    return out;
  }

  // Keep exactly the given scopes: integrate out the other continuous
  // variables, then sum (or collapse) the other discrete ones.
  HybridFactor marginalize_to(const std::vector<VarId>& keep_dvars,
                              const std::vector<VarId>& keep_cvars,
                              MarginalPolicy policy) const {
    std::vector<VarId> out_c, out_d;
    for (VarId v : cvars)
      if (std::find(keep_cvars.begin(), keep_cvars.end(), v) == keep_cvars.end())
        out_c.push_back(v);
    for (VarId v : dvars)
      if (std::find(keep_dvars.begin(), keep_dvars.end(), v) == keep_dvars.end())
        out_d.push_back(v);
    return integrate_out_continuous(out_c).sum_out_discrete(out_d, policy);
  }

  // log of the factor's total mass; requires every nonzero entry integrable.
  double log_total_mass() const {
    std::vector<double> ls;
    ls.reserve(entries.size());
    for (const auto& e : entries) ls.push_back(to_log_moments(e).log_weight);
    return log_sum_exp(ls);
  }

  HybridFactor normalized() const {
    double lz = log_total_mass();
    if (is_log_zero(lz))
      throw EmptyMixture("normalize: factor has zero total mass");
    HybridFactor out = *this;
    for (auto& e : out.entries)
      if (!e.is_zero()) e.g -= lz;
    return out;
  }

  void sort_discrete() {
    std::vector<size_t> idx(dvars.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return dvars[a] < dvars[b]; });
    std::vector<VarId> dv;
    std::vector<int> dc;
    for (size_t i : idx) {
      dv.push_back(dvars[i]);
      dc.push_back(dcards[i]);
    }
    dvars = std::move(dv);
    dcards = std::move(dc);
  }
};

namespace detail {

inline void union_scopes(const HybridFactor& a, const HybridFactor& b,
                         std::vector<VarId>& dv, std::vector<int>& dc,
                         std::vector<VarId>& cv) {
  dv = a.dvars;
  dc = a.dcards;
  for (size_t i = 0; i < b.dvars.size(); ++i) {
    auto it = std::lower_bound(dv.begin(), dv.end(), b.dvars[i]);
    if (it != dv.end() && *it == b.dvars[i]) {
      if (dc[it - dv.begin()] != b.dcards[i])
        throw ScopeError("multiply: cardinality clash for variable " +
                         std::to_string(b.dvars[i]));
      continue;
    }
    dc.insert(dc.begin() + (it - dv.begin()), b.dcards[i]);
    dv.insert(it, b.dvars[i]);
  }
  cv = a.cvars;
  for (VarId v : b.cvars)
    if (std::find(cv.begin(), cv.end(), v) == cv.end()) cv.push_back(v);
  std::sort(cv.begin(), cv.end());
}

}  // namespace detail

inline HybridFactor multiply(const HybridFactor& a, const HybridFactor& b) {
  std::vector<VarId> dv, cv;
  std::vector<int> dc;
  detail::union_scopes(a, b, dv, dc, cv);
  HybridFactor ea = a.extend_to(dv, dc, cv);
  HybridFactor eb = b.extend_to(dv, dc, cv);
  for (std::size_t i = 0; i < ea.entries.size(); ++i)
    ea.entries[i] = multiply(ea.entries[i], eb.entries[i]);
  return ea;
}

// Pointwise quotient with the 0/0 -> 0 convention used by belief absorption.
// b's scope must be contained in a's.
inline HybridFactor divide(const HybridFactor& a, const HybridFactor& b) {
  for (VarId v : b.dvars)
    if (std::find(a.dvars.begin(), a.dvars.end(), v) == a.dvars.end())
      throw ScopeError("divide: divisor scope not contained in dividend");
  for (VarId v : b.cvars)
    if (std::find(a.cvars.begin(), a.cvars.end(), v) == a.cvars.end())
      throw ScopeError("divide: divisor scope not contained in dividend");
  HybridFactor eb = b.extend_to(a.dvars, a.dcards, a.cvars);
  HybridFactor out = a;
  for (std::size_t i = 0; i < out.entries.size(); ++i)
    out.entries[i] = divide(out.entries[i], eb.entries[i]);
  return out;
}

}  // namespace hybridbn
