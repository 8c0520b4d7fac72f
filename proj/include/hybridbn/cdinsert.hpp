#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "hybridbn/errors.hpp"
#include "hybridbn/model.hpp"
#include "hybridbn/propagation.hpp"
#include "hybridbn/quadrature.hpp"

namespace hybridbn {

// One CD-CPD state's logit as a function of the reduced variable z.
struct LogitMap {
  Vector alpha;  // over z
  double gamma = 0.0;
};

// Linear map z = W y + b from a clique's (effective) continuous scope onto
// the space the CD integrands actually depend on. Two flavors:
//  - reduced: W stacks the rank-reduced difference rows of all linear-feature
//    CD CPDs; probabilities are computed from per-state LogitMaps.
//  - selection: W selects the unobserved continuous parents verbatim;
//    probabilities are computed by eval_cd on reconstructed parent vectors
//    (the fallback for nonlinear features).
struct FeatureProjection {
  std::vector<VarId> yvars;  // source scope
  Matrix W;
  Vector b;
  bool reduced = true;
  std::vector<std::size_t> cpds;  // softmax cpd indices covered

  // reduced mode: per cpd, per discrete-parent block, per child state
  std::vector<std::vector<std::vector<LogitMap>>> maps;

  // selection mode: per cpd, per continuous parent: either a z coordinate or
  // an observed constant
  struct ParentSource {
    int z_pos = -1;  // < 0: use `value`
    double value = 0.0;
  };
  std::vector<std::vector<ParentSource>> parent_sources;

  int rank() const { return static_cast<int>(W.rows()); }

  // probability of child state `state` of cpds[j] under block `block` at z
  double state_prob(const Network& net, std::size_t j, std::size_t block, int state,
                    const Vector& z) const {
    const SoftmaxCPD& cpd = net.softmaxes[cpds[j]];
    if (reduced) {
      const auto& ms = maps[j][block];
      double mx = -std::numeric_limits<double>::infinity();
      std::vector<double> lg(ms.size());
      for (size_t i = 0; i < ms.size(); ++i) {
        lg[i] = ms[i].gamma + ms[i].alpha.dot(z);
        mx = std::max(mx, lg[i]);
      }
      double den = 0.0;
      for (double& v : lg) den += std::exp(v - mx);
      return std::exp(lg[state] - mx) / den;
    }
    Vector y(cpd.cparents.size());
    for (size_t i = 0; i < cpd.cparents.size(); ++i) {
      const auto& src = parent_sources[j][i];
      y[i] = src.z_pos >= 0 ? z[src.z_pos] : src.value;
    }
    return eval_cd(cpd, block, y)[state];
  }
};

namespace detail {

// Expand each row of V on an orthonormal basis of the row space (built by
// modified Gram-Schmidt with the given tolerance). Returns basis B (r x k)
// and coefficients C (rows x r) with V = C B.
inline void row_space_basis(const Matrix& V, double tol, Matrix& B, Matrix& C) {
  int k = static_cast<int>(V.cols());
  std::vector<Vector> basis;
  for (int i = 0; i < V.rows(); ++i) {
    Vector v = V.row(i).transpose();
    for (const auto& b : basis) v -= b.dot(v) * b;
    double nrm = v.norm();
    if (nrm > tol) basis.push_back(v / nrm);
  }
  int r = static_cast<int>(basis.size());
  B = Matrix(r, k);
  for (int i = 0; i < r; ++i) B.row(i) = basis[i].transpose();
  C = V * B.transpose();  // exact because rows lie in span(B) up to tol
}

}  // namespace detail

// Build the projection for the listed CD CPDs over the effective continuous
// scope `yvars` (clique scope minus observed variables). Observed parents are
// folded into the per-state constants. Returns the selection-mode projection
// when any CPD has nonlinear features.
inline FeatureProjection build_feature_projection(const Network& net,
                                                  const std::vector<std::size_t>& cd_cpds,
                                                  const std::vector<VarId>& yvars,
                                                  const Evidence& ev,
                                                  double rank_tol = 1e-10) {
  FeatureProjection proj;
  proj.yvars = yvars;
  proj.cpds = cd_cpds;
  int ny = static_cast<int>(yvars.size());

  bool all_linear = true;
  for (std::size_t s : cd_cpds)
    if (!net.softmaxes[s].all_features_linear()) all_linear = false;

  auto ypos = [&](VarId v) {
    auto it = std::find(yvars.begin(), yvars.end(), v);
    return it == yvars.end() ? -1 : static_cast<int>(it - yvars.begin());
  };

  if (!all_linear) {
    proj.reduced = false;
    std::vector<VarId> zvars;
    for (std::size_t s : cd_cpds)
      for (VarId p : net.softmaxes[s].cparents)
        if (!ev.continuous.count(p) && std::find(zvars.begin(), zvars.end(), p) == zvars.end())
          zvars.push_back(p);
    std::sort(zvars.begin(), zvars.end());
    proj.W = Matrix::Zero(zvars.size(), ny);
    proj.b = Vector::Zero(zvars.size());
    for (size_t i = 0; i < zvars.size(); ++i) {
      int p = ypos(zvars[i]);
      if (p < 0)
        throw ScopeError("feature projection: CD parent " + net.var(zvars[i]).name +
                         " missing from clique scope");
      proj.W(static_cast<int>(i), p) = 1.0;
    }
    for (std::size_t s : cd_cpds) {
      const auto& cpd = net.softmaxes[s];
      std::vector<FeatureProjection::ParentSource> srcs;
      for (VarId p : cpd.cparents) {
        FeatureProjection::ParentSource src;
        auto it = ev.continuous.find(p);
        if (it != ev.continuous.end()) {
          src.value = it->second;
        } else {
          auto zit = std::find(zvars.begin(), zvars.end(), p);
          src.z_pos = static_cast<int>(zit - zvars.begin());
        }
        srcs.push_back(src);
      }
      proj.parent_sources.push_back(std::move(srcs));
    }
    return proj;
  }

  // stack the reduced difference rows (state i minus state 0) of every cpd
  // and block, expressed over yvars with observed parents folded out
  struct RowRef {
    std::size_t cpd_j;  // position in cd_cpds
    std::size_t block;
    int state;  // 1..m-1
    double dbias;
  };
  std::vector<RowRef> refs;
  std::vector<Vector> rows;
  std::vector<std::vector<std::vector<double>>> dbias_all;  // [j][block][state]
  for (size_t j = 0; j < cd_cpds.size(); ++j) {
    const auto& cpd = net.softmaxes[cd_cpds[j]];
    int m = net.card(cpd.child);
    dbias_all.emplace_back();
    for (std::size_t blk = 0; blk < cpd.blocks.size(); ++blk) {
      Vector bias;
      Matrix wy;  // m x |cparents|
      cpd.linear_rows(blk, bias, wy);
      // fold observed parents into the bias
      Vector bias_eff = bias;
      for (size_t p = 0; p < cpd.cparents.size(); ++p) {
        auto it = ev.continuous.find(cpd.cparents[p]);
        if (it != ev.continuous.end())
          for (int i = 0; i < m; ++i) bias_eff[i] += wy(i, p) * it->second;
      }
      dbias_all[j].emplace_back();
      for (int i = 1; i < m; ++i) {
        Vector v = Vector::Zero(ny);
        for (size_t p = 0; p < cpd.cparents.size(); ++p) {
          if (ev.continuous.count(cpd.cparents[p])) continue;
          int q = ypos(cpd.cparents[p]);
          if (q < 0)
            throw ScopeError("feature projection: CD parent " +
                             net.var(cpd.cparents[p]).name + " missing from clique scope");
          v[q] += wy(i, p) - wy(0, p);
        }
        rows.push_back(v);
        refs.push_back({j, blk, i, bias_eff[i] - bias_eff[0]});
        dbias_all[j].back().push_back(bias_eff[i] - bias_eff[0]);
      }
    }
  }

  Matrix V(rows.size(), ny);
  for (size_t i = 0; i < rows.size(); ++i) V.row(i) = rows[i].transpose();
  Matrix C;
  detail::row_space_basis(V, rank_tol, proj.W, C);
  proj.b = Vector::Zero(proj.W.rows());

  // per cpd/block/state logit maps on z; state 0 is the zero map
  proj.maps.resize(cd_cpds.size());
  for (size_t j = 0; j < cd_cpds.size(); ++j) {
    const auto& cpd = net.softmaxes[cd_cpds[j]];
    proj.maps[j].resize(cpd.blocks.size());
    for (std::size_t blk = 0; blk < cpd.blocks.size(); ++blk) {
      int m = net.card(cpd.child);
      proj.maps[j][blk].resize(m);
      proj.maps[j][blk][0].alpha = Vector::Zero(proj.rank());
      proj.maps[j][blk][0].gamma = 0.0;
    }
  }
  for (size_t i = 0; i < refs.size(); ++i) {
    const auto& rf = refs[i];
    LogitMap lm;
    lm.alpha = C.row(i).transpose();
    lm.gamma = rf.dbias;
    proj.maps[rf.cpd_j][rf.block][rf.state] = std::move(lm);
  }
  return proj;
}

struct IntegrationTask {
  double log_p = 0.0;  // component mass (for reporting; not used by the integral)
  Vector mu;           // prior mean in integration space
  Matrix cov;          // prior covariance in integration space
  QuadratureConfig backend;
};

struct IntegrationResult {
  double r = 0.0;  // mass ratio E[integrand]
  Vector mean;
  Matrix cov;
  std::size_t evals = 0;
};

// E[f], E[u f]/E[f] and Cov under the prior, all from one node set so the
// three moments are mutually consistent. Throws ZeroMass when the mass ratio
// vanishes (caller drops the component).
template <class F>
IntegrationResult integrate_cd(const IntegrationTask& task, F&& f) {
  int n = static_cast<int>(task.mu.size());
  int active = 0;
  Matrix L = detail::covariance_sqrt_active(task.cov, active);
  const auto& cfg = task.backend;

  IntegrationResult res;
  double m0 = 0.0;
  Vector m1 = Vector::Zero(n);
  Matrix m2 = Matrix::Zero(n, n);

  auto accumulate = [&](const Vector& x, double w) {
    double v = f(x);
    if (!std::isfinite(v) || v < 0.0)
      throw NumericalError("integrate_cd: integrand must be finite and nonnegative");
    m0 += w * v;
    m1 += (w * v) * x;
    m2 += (w * v) * (x * x.transpose());
    ++res.evals;
  };

  if (cfg.backend == QuadratureConfig::Backend::MonteCarlo) {
    NormalSampler rng(cfg.mc_seed);
    Vector z(active);
    double w = 1.0 / double(cfg.mc_samples);
    for (std::int64_t s = 0; s < cfg.mc_samples; ++s) {
      for (int j = 0; j < active; ++j) z[j] = rng();
      accumulate(task.mu + L * z, w);
    }
  } else {
    if (active > cfg.max_dim)
      throw DimensionCap("integrate_cd: " + std::to_string(active) +
                         " integration dimensions exceed cap " +
                         std::to_string(cfg.max_dim) +
                         " (use the MC backend or sequential mode)");
    QuadratureRule rule = gauss_hermite_rule(cfg.points_per_dim);
    std::vector<int> idx(active, 0);
    Vector z(active);
    while (true) {
      double w = 1.0;
      for (int j = 0; j < active; ++j) {
        z[j] = rule.nodes[idx[j]];
        w *= rule.weights[idx[j]];
      }
      accumulate(task.mu + L * z, w);
      int j = active - 1;
      for (; j >= 0; --j) {
        if (++idx[j] < rule.size()) break;
        idx[j] = 0;
      }
      if (j < 0) break;
    }
  }

  if (m0 < 1e-300)
    throw ZeroMass("integrate_cd: mass ratio " + std::to_string(m0) + " is numerically zero");
  res.r = m0;
  res.mean = m1 / m0;
  res.cov = psd_repair(m2 / m0 - res.mean * res.mean.transpose(), 1e-7);
  return res;
}

// Propagate a z-space posterior back to the full scope Y through the joint
// prior: G = Cov(Y,z) pinv(Cov(z)); exact whenever the posterior shift lives
// in the z subspace.
inline void recover_full_moments(const Vector& mu_y, const Matrix& cov_y,
                                 const FeatureProjection& proj, const Vector& mean_z,
                                 const Matrix& cov_z, Vector& mean_out, Matrix& cov_out) {
  const Matrix& W = proj.W;
  Vector mu_z = W * mu_y + proj.b;
  Matrix S_zz = W * cov_y * W.transpose();
  Matrix S_yz = cov_y * W.transpose();
  // pseudo-inverse via eigendecomposition (z-space prior can be rank deficient)
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(S_zz));
  if (es.info() != Eigen::Success)
    throw NumericalError("recover_full_moments: eigensolver failed");
  int r = static_cast<int>(S_zz.rows());
  double scale = r ? std::max(1e-300, es.eigenvalues().cwiseAbs().maxCoeff()) : 1.0;
  Matrix pinv = Matrix::Zero(r, r);
  for (int i = 0; i < r; ++i) {
    double ev = es.eigenvalues()[i];
    if (ev > 1e-12 * scale)
      pinv += es.eigenvectors().col(i) * es.eigenvectors().col(i).transpose() / ev;
  }
  Matrix G = S_yz * pinv;
  mean_out = mu_y + G * (mean_z - mu_z);
  cov_out = psd_repair(
      symmetrize(cov_y - G * S_yz.transpose() + G * cov_z * G.transpose()), 1e-7);
}

enum class InsertMode { Joint, Sequential };

struct InsertionStats {
  struct Component {
    int component = -1;
    int clique = -1;
    int z_dim = 0;
    bool reduced = true;
    std::size_t integrand_evals = 0;
    // per cd cpd: max over entries/states of |alpha| * sigma_z (linear mode)
    std::vector<double> sharpness;
  };
  std::vector<Component> items;
};

namespace detail {

// inserts the given CD CPDs into the designated clique's belief in one joint
// pass; returns the new belief
inline HybridFactor insert_into_belief(const Network& net, const HybridFactor& belief,
                                       const std::vector<std::size_t>& cd_cpds,
                                       const Evidence& ev, const QuadratureConfig& backend,
                                       InsertionStats::Component& stats) {
  FeatureProjection proj = build_feature_projection(net, cd_cpds, belief.cvars, ev);
  stats.z_dim = proj.rank();
  stats.reduced = proj.reduced;
  stats.sharpness.assign(cd_cpds.size(), 0.0);

  // positions of each cpd's child and discrete parents inside the belief scope
  struct CpdPos {
    int child_pos;
    std::vector<int> dparent_pos;
    std::vector<int> dparent_cards;
  };
  std::vector<CpdPos> pos(cd_cpds.size());
  for (size_t j = 0; j < cd_cpds.size(); ++j) {
    const auto& cpd = net.softmaxes[cd_cpds[j]];
    auto find_d = [&](VarId v) {
      auto it = std::find(belief.dvars.begin(), belief.dvars.end(), v);
      if (it == belief.dvars.end())
        throw ScopeError("cd insertion: " + net.var(v).name +
                         " missing from designated clique");
      return static_cast<int>(it - belief.dvars.begin());
    };
    pos[j].child_pos = find_d(cpd.child);
    for (VarId p : cpd.dparents) {
      pos[j].dparent_pos.push_back(find_d(p));
      pos[j].dparent_cards.push_back(net.card(p));
    }
  }

  HybridFactor out = belief;
  for (std::size_t e = 0; e < belief.entries.size(); ++e) {
    const CanonicalForm& entry = belief.entries[e];
    if (entry.is_zero()) continue;
    LogMoments prior = to_log_moments(entry);
    std::vector<int> dstates = belief.unrank(e);

    // per-cpd block index and pinned child state for this entry
    std::vector<std::size_t> blocks(cd_cpds.size());
    std::vector<int> states(cd_cpds.size());
    for (size_t j = 0; j < cd_cpds.size(); ++j) {
      std::vector<int> bst(pos[j].dparent_pos.size());
      for (size_t i = 0; i < bst.size(); ++i) bst[i] = dstates[pos[j].dparent_pos[i]];
      blocks[j] = rank_assignment(pos[j].dparent_cards, bst);
      states[j] = dstates[pos[j].child_pos];
    }

    IntegrationTask task;
    task.log_p = prior.log_weight;
    task.mu = proj.W * prior.mean + proj.b;
    task.cov = symmetrize(proj.W * prior.cov * proj.W.transpose());
    task.backend = backend;

    if (proj.reduced) {
      for (size_t j = 0; j < cd_cpds.size(); ++j) {
        const auto& ms = proj.maps[j][blocks[j]];
        for (const auto& lm : ms) {
          double s2 = lm.alpha.dot(task.cov * lm.alpha);
          stats.sharpness[j] =
              std::max(stats.sharpness[j], std::sqrt(std::max(0.0, s2)));
        }
      }
    }

    try {
      IntegrationResult ir = integrate_cd(task, [&](const Vector& z) {
        double p = 1.0;
        for (size_t j = 0; j < cd_cpds.size(); ++j)
          p *= proj.state_prob(net, j, blocks[j], states[j], z);
        return p;
      });
      stats.integrand_evals += ir.evals;
      Vector mean_y;
      Matrix cov_y;
      recover_full_moments(prior.mean, prior.cov, proj, ir.mean, ir.cov, mean_y, cov_y);
      LogMoments post;
      post.log_weight = prior.log_weight + std::log(ir.r);
      post.mean = std::move(mean_y);
      post.cov = std::move(cov_y);
      out.entries[e] = from_log_moments(post, belief.cvars);
    } catch (const ZeroMass&) {
      out.entries[e] = CanonicalForm::zero(belief.cvars);
    }
  }
  return out;
}

}  // namespace detail

// Fig.-3 style insertion of all pending CD CPDs into an evidence-calibrated
// tree. Joint mode treats each component's CPDs as one product integrand;
// sequential mode inserts them one at a time in declaration order,
// re-approximating in between.
inline InsertionStats insert_cd_cpds(CalibratedTree& ct, InsertMode mode,
                                     const QuadratureConfig& backend) {
  if (ct.phase() == TreePhase::Uninitialized)
    throw ConfigError("insert_cd_cpds: calibrate the tree first");
  InsertionStats stats;
  const Network& net = ct.network();
  const CliqueTree& tree = ct.tree();
  for (const auto& [comp, clique] : tree.designated) {
    const auto& cds = tree.component_cds[comp];
    InsertionStats::Component cs;
    cs.component = comp;
    cs.clique = clique;
    if (mode == InsertMode::Joint) {
      HybridFactor nb =
          detail::insert_into_belief(net, ct.belief(clique), cds, ct.evidence(), backend, cs);
      ct.absorb_at(clique, nb);
    } else {
      std::vector<std::size_t> order = cds;
      std::sort(order.begin(), order.end());  // declaration order
      bool first = true;
      for (std::size_t s : order) {
        InsertionStats::Component one;
        one.component = comp;
        one.clique = clique;
        HybridFactor nb = detail::insert_into_belief(net, ct.belief(clique), {s},
                                                     ct.evidence(), backend, one);
        ct.absorb_at(clique, nb);
        cs.integrand_evals += one.integrand_evals;
        cs.z_dim = first ? one.z_dim : std::max(cs.z_dim, one.z_dim);
        cs.reduced = cs.reduced && one.reduced;
        cs.sharpness.insert(cs.sharpness.end(), one.sharpness.begin(), one.sharpness.end());
        first = false;
      }
    }
    stats.items.push_back(std::move(cs));
  }
  ct.mark_cd_calibrated();
  return stats;
}

}  // namespace hybridbn
