#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hybridbn/errors.hpp"
#include "hybridbn/model.hpp"
#include "hybridbn/numeric.hpp"

namespace hybridbn {

struct VarEstimate {
  VarId var = -1;
  // discrete
  std::vector<double> probs;
  std::vector<double> probs_se;
  // continuous
  double mean = 0.0, mean_se = 0.0;
  double variance = 0.0, variance_se = 0.0;
};

struct EstimateReport {
  std::vector<VarEstimate> estimates;
  double ess = 0.0;
  double log_mean_weight = kNegInf;  // log of the P(e) estimate
  std::int64_t samples = 0;
  std::uint64_t seed = 0;
  std::int64_t zero_weight_count = 0;
};

// Forward sampling in topological order; evidence variables are fixed and
// contribute their CPD probability (or density) to the importance weight.
// Per-variable estimates are ratio estimators with batch-means standard
// errors. Deterministic per seed.
inline EstimateReport likelihood_weighting(const Network& net, const Evidence& ev,
                                           const std::vector<VarId>& query,
                                           std::int64_t n, std::uint64_t seed,
                                           int batches = 100) {
  if (n < 1) throw ConfigError("likelihood_weighting: need at least one sample");
  validate_evidence(net, ev);
  std::vector<VarId> topo = net.topological_order();
  NormalSampler rng(seed);

  std::vector<double> logw(n);
  std::vector<std::vector<double>> cvals(query.size());
  std::vector<std::vector<int>> dvals(query.size());
  for (size_t qi = 0; qi < query.size(); ++qi) {
    if (net.is_discrete(query[qi]))
      dvals[qi].resize(n);
    else
      cvals[qi].resize(n);
  }

  std::vector<int> dstate(net.variables.size(), -1);
  std::vector<double> cval(net.variables.size(), 0.0);

  auto pick = [&](const std::vector<double>& probs) {
    double u = rng.unit_open();
    double acc = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u <= acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  };

  std::int64_t zero_count = 0;
  for (std::int64_t s = 0; s < n; ++s) {
    double lw = 0.0;
    for (VarId v : topo) {
      const auto& ref = net.cpd_of.at(v);
      switch (ref.kind) {
        case CPDKind::Table: {
          const auto& cpd = net.tables[ref.index];
          std::vector<int> pcards, pstates;
          for (VarId p : cpd.parents) {
            pcards.push_back(net.card(p));
            pstates.push_back(dstate[p]);
          }
          const auto& row = cpd.rows[rank_assignment(pcards, pstates)];
          auto it = ev.discrete.find(v);
          if (it != ev.discrete.end()) {
            dstate[v] = it->second;
            double p = row[it->second];
            lw += p > 0.0 ? std::log(p) : kNegInf;
          } else {
            dstate[v] = pick(row);
          }
          break;
        }
        case CPDKind::CLG: {
          const auto& cpd = net.clgs[ref.index];
          std::vector<int> pcards, pstates;
          for (VarId p : cpd.dparents) {
            pcards.push_back(net.card(p));
            pstates.push_back(dstate[p]);
          }
          const auto& row = cpd.rows[rank_assignment(pcards, pstates)];
          double mu = row.intercept;
          for (size_t i = 0; i < cpd.cparents.size(); ++i)
            mu += row.weights[i] * cval[cpd.cparents[i]];
          auto it = ev.continuous.find(v);
          if (it != ev.continuous.end()) {
            cval[v] = it->second;
            double d = it->second - mu;
            lw += -0.5 * d * d / row.variance - 0.5 * std::log(2.0 * M_PI * row.variance);
          } else {
            cval[v] = mu + std::sqrt(row.variance) * rng();
          }
          break;
        }
        case CPDKind::Softmax: {
          const auto& cpd = net.softmaxes[ref.index];
          std::vector<int> pcards, pstates;
          for (VarId p : cpd.dparents) {
            pcards.push_back(net.card(p));
            pstates.push_back(dstate[p]);
          }
          Vector y(cpd.cparents.size());
          for (size_t i = 0; i < cpd.cparents.size(); ++i) y[i] = cval[cpd.cparents[i]];
          auto probs = eval_cd(cpd, rank_assignment(pcards, pstates), y);
          auto it = ev.discrete.find(v);
          if (it != ev.discrete.end()) {
            dstate[v] = it->second;
            double p = probs[it->second];
            lw += p > 0.0 ? std::log(p) : kNegInf;
          } else {
            dstate[v] = pick(probs);
          }
          break;
        }
      }
    }
    logw[s] = lw;
    if (is_log_zero(lw)) ++zero_count;
    for (size_t qi = 0; qi < query.size(); ++qi) {
      if (net.is_discrete(query[qi]))
        dvals[qi][s] = dstate[query[qi]];
      else
        cvals[qi][s] = cval[query[qi]];
    }
  }

  double mx = *std::max_element(logw.begin(), logw.end());
  if (is_log_zero(mx))
    throw DegenerateWeights("likelihood_weighting: all " + std::to_string(n) +
                            " sample weights are zero");
  std::vector<double> w(n);
  double wsum = 0.0, wsq = 0.0;
  for (std::int64_t s = 0; s < n; ++s) {
    w[s] = is_log_zero(logw[s]) ? 0.0 : std::exp(logw[s] - mx);
    wsum += w[s];
    wsq += w[s] * w[s];
  }

  EstimateReport rep;
  rep.samples = n;
  rep.seed = seed;
  rep.zero_weight_count = zero_count;
  rep.ess = wsum * wsum / wsq;
  rep.log_mean_weight = mx + std::log(wsum / double(n));

  int nb = static_cast<int>(std::min<std::int64_t>(batches, n));
  std::int64_t bsz = n / nb;

  // batch-means SE of a ratio estimator sum(w*f)/sum(w)
  auto ratio_se = [&](auto&& f, double& est_out) {
    double num = 0.0;
    for (std::int64_t s = 0; s < n; ++s) num += w[s] * f(s);
    est_out = num / wsum;
    std::vector<double> bests;
    for (int b = 0; b < nb; ++b) {
      std::int64_t lo = b * bsz, hi = (b == nb - 1) ? n : lo + bsz;
      double bn = 0.0, bw = 0.0;
      for (std::int64_t s = lo; s < hi; ++s) {
        bn += w[s] * f(s);
        bw += w[s];
      }
      if (bw > 0.0) bests.push_back(bn / bw);
    }
    if (bests.size() < 2) return 0.0;
    double m = 0.0;
    for (double x : bests) m += x;
    m /= bests.size();
    double v = 0.0;
    for (double x : bests) v += (x - m) * (x - m);
    v /= (bests.size() - 1);
    return std::sqrt(v / bests.size());
  };

  for (size_t qi = 0; qi < query.size(); ++qi) {
    VarEstimate est;
    est.var = query[qi];
    if (net.is_discrete(query[qi])) {
      int card = net.card(query[qi]);
      est.probs.resize(card);
      est.probs_se.resize(card);
      for (int k = 0; k < card; ++k)
        est.probs_se[k] = ratio_se(
            [&](std::int64_t s) { return dvals[qi][s] == k ? 1.0 : 0.0; }, est.probs[k]);
    } else {
      est.mean_se = ratio_se([&](std::int64_t s) { return cvals[qi][s]; }, est.mean);
      // weighted variance around the global mean estimate; batch spread of
      // the same centered ratio gives its SE
      est.variance_se = ratio_se(
          [&](std::int64_t s) {
            double d = cvals[qi][s] - est.mean;
            return d * d;
          },
          est.variance);
    }
    rep.estimates.push_back(std::move(est));
  }
  return rep;
}

}  // namespace hybridbn
