#pragma once

#include <chrono>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "hybridbn/engine.hpp"
#include "hybridbn/kl.hpp"
#include "hybridbn/lw.hpp"
#include "hybridbn/model.hpp"

namespace hybridbn {

namespace detail {

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline VarId add_cont(Network& net, const std::string& name) {
  Variable v;
  v.id = static_cast<VarId>(net.variables.size());
  v.name = name;
  v.kind = VarKind::Continuous;
  net.variables.push_back(v);
  return v.id;
}

inline VarId add_disc(Network& net, const std::string& name,
                      std::vector<std::string> states) {
  Variable v;
  v.id = static_cast<VarId>(net.variables.size());
  v.name = name;
  v.kind = VarKind::Discrete;
  v.states = std::move(states);
  net.variables.push_back(v);
  return v.id;
}

inline void add_clg(Network& net, VarId child, std::vector<VarId> dparents,
                    std::vector<VarId> cparents, std::vector<CLGCPD::Row> rows) {
  CLGCPD cpd;
  cpd.child = child;
  cpd.dparents = std::move(dparents);
  cpd.cparents = std::move(cparents);
  cpd.rows = std::move(rows);
  net.cpd_of[child] = {CPDKind::CLG, net.clgs.size()};
  net.clgs.push_back(std::move(cpd));
}

inline void add_table(Network& net, VarId child, std::vector<VarId> parents,
                      std::vector<std::vector<double>> rows) {
  DiscreteTableCPD cpd;
  cpd.child = child;
  cpd.parents = std::move(parents);
  cpd.rows = std::move(rows);
  net.cpd_of[child] = {CPDKind::Table, net.tables.size()};
  net.tables.push_back(std::move(cpd));
}

// binary child with identity features: logit(state1) - logit(state0) = b + w.y
inline void add_binary_sigmoid(Network& net, VarId child, std::vector<VarId> cparents,
                               double bias, const std::vector<double>& weights) {
  SoftmaxCPD cpd;
  cpd.child = child;
  cpd.cparents = std::move(cparents);
  for (size_t i = 0; i < cpd.cparents.size(); ++i)
    cpd.features.push_back(Feature::identity(static_cast<int>(i)));
  SoftmaxCPD::Block blk;
  blk.bias = {0.0, bias};
  blk.weights = Matrix::Zero(2, cpd.cparents.size());
  for (size_t i = 0; i < weights.size(); ++i) blk.weights(1, i) = weights[i];
  cpd.blocks.push_back(std::move(blk));
  net.cpd_of[child] = {CPDKind::Softmax, net.softmaxes.size()};
  net.softmaxes.push_back(std::move(cpd));
}

}  // namespace detail

// X ~ N(0,1) with a binary softmax child A, P(A=a1|x) = sigmoid(x).
inline Network make_xa_toy() {
  Network net;
  VarId x = detail::add_cont(net, "X");
  VarId a = detail::add_disc(net, "A", {"a0", "a1"});
  detail::add_clg(net, x, {}, {}, {{0.0, {}, 1.0}});
  // P(a1|x) = sigmoid(x): encode state a1's logit as x, a0's as 0
  SoftmaxCPD cpd;
  cpd.child = a;
  cpd.cparents = {x};
  cpd.features.push_back(Feature::identity(0));
  SoftmaxCPD::Block blk;
  blk.bias = {0.0, 0.0};
  blk.weights = Matrix::Zero(2, 1);
  blk.weights(1, 0) = 1.0;
  cpd.blocks.push_back(std::move(blk));
  net.cpd_of[a] = {CPDKind::Softmax, net.softmaxes.size()};
  net.softmaxes.push_back(std::move(cpd));
  return net;
}

// A <- X -> Y -> B with corr(X, Y) = rho (both marginally standard normal)
// and sigmoid weight w on each discrete child.
inline Network make_axyb(double rho = 0.5, double w = 1.0) {
  Network net;
  VarId x = detail::add_cont(net, "X");
  VarId y = detail::add_cont(net, "Y");
  VarId a = detail::add_disc(net, "A", {"a0", "a1"});
  VarId b = detail::add_disc(net, "B", {"b0", "b1"});
  detail::add_clg(net, x, {}, {}, {{0.0, {}, 1.0}});
  detail::add_clg(net, y, {}, {x}, {{0.0, {rho}, 1.0 - rho * rho}});
  detail::add_binary_sigmoid(net, a, {x}, 0.0, {w});
  detail::add_binary_sigmoid(net, b, {y}, 0.0, {w});
  return net;
}

// X1 -> X2 -> ... -> Xn, with A a sigmoid child of every Xi.
inline Network make_chain(int n, double c = 0.5, double w = 0.3, double bias = 0.0) {
  if (n < 1) throw ConfigError("make_chain: need n >= 1");
  Network net;
  std::vector<VarId> xs;
  for (int i = 1; i <= n; ++i) xs.push_back(detail::add_cont(net, "X" + std::to_string(i)));
  VarId a = detail::add_disc(net, "A", {"a0", "a1"});
  detail::add_clg(net, xs[0], {}, {}, {{0.0, {}, 1.0}});
  for (int i = 1; i < n; ++i) detail::add_clg(net, xs[i], {}, {xs[i - 1]}, {{0.0, {c}, 1.0}});
  detail::add_binary_sigmoid(net, a, xs, bias, std::vector<double>(n, w));
  return net;
}

// Joint prior of the chain's continuous part.
inline void chain_prior(int n, double c, Vector& mean, Matrix& cov) {
  mean = Vector::Zero(n);
  cov = Matrix(n, n);
  std::vector<double> var(n);
  var[0] = 1.0;
  for (int i = 1; i < n; ++i) var[i] = c * c * var[i - 1] + 1.0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) cov(i, j) = cov(j, i) = std::pow(c, j - i) * var[i];
}

struct ChainDimResult {
  // P(A=a1) and E[Xi | A=a1] by three routes plus evaluation counts
  double p_reduced = 0, p_direct = 0, p_mc = 0;
  Vector mean_reduced, mean_direct, mean_mc;
  std::size_t evals_reduced = 0, evals_direct = 0, evals_mc = 0;
};

// One chain-dim configuration: reduced 1-D rule vs direct n-D tensor grid vs
// MC at the direct grid's budget.
inline ChainDimResult chain_dim_compare(int n, double c, double w, double bias,
                                        int reduced_points, int direct_points,
                                        std::uint64_t mc_seed) {
  Vector mu;
  Matrix cov;
  chain_prior(n, c, mu, cov);
  Vector wv = Vector::Constant(n, w);
  auto sig = [&](double t) { return 1.0 / (1.0 + std::exp(-t)); };

  ChainDimResult out;
  // reduced: z = w.x is 1-D; recover E[X|A] through the joint prior
  {
    double sz2 = wv.dot(cov * wv);
    QuadratureConfig cfg;
    cfg.points_per_dim = reduced_points;
    Vector mz = Vector::Zero(1);
    Matrix Sz = Matrix::Constant(1, 1, sz2);
    Vector v = gaussian_expectation(
        [&](const Vector& z) {
          double s = sig(z[0] + bias);
          return Vector(Vector::Constant(2, s).cwiseProduct(Vector{{1.0, z[0]}}));
        },
        mz, Sz, cfg);
    out.p_reduced = v[0];
    double ez = v[1] / v[0];
    Vector G = cov * wv / sz2;
    out.mean_reduced = G * ez;  // prior mean is zero
    out.evals_reduced = static_cast<std::size_t>(reduced_points);
  }
  // direct: full n-D tensor grid
  {
    QuadratureConfig cfg;
    cfg.points_per_dim = direct_points;
    cfg.max_dim = n;
    Vector v = gaussian_expectation(
        [&](const Vector& x) {
          double s = sig(wv.dot(x) + bias);
          Vector r(n + 1);
          r[0] = s;
          r.tail(n) = s * x;
          return r;
        },
        mu, cov, cfg);
    out.p_direct = v[0];
    out.mean_direct = v.tail(n) / v[0];
    out.evals_direct = 1;
    for (int i = 0; i < n; ++i) out.evals_direct *= direct_points;
  }
  // MC at the direct budget
  {
    QuadratureConfig cfg;
    cfg.backend = QuadratureConfig::Backend::MonteCarlo;
    cfg.mc_samples = static_cast<std::int64_t>(out.evals_direct);
    cfg.mc_seed = mc_seed;
    Vector v = gaussian_expectation(
        [&](const Vector& x) {
          double s = sig(wv.dot(x) + bias);
          Vector r(n + 1);
          r[0] = s;
          r.tail(n) = s * x;
          return r;
        },
        mu, cov, cfg);
    out.p_mc = v[0];
    out.mean_mc = v.tail(n) / v[0];
    out.evals_mc = static_cast<std::size_t>(cfg.mc_samples);
  }
  return out;
}

// CSV: error-vs-points curves against a 64-point reduced reference.
inline std::string experiment_chain_dim(int n = 8, double c = 0.5, double w = 0.3,
                                        double bias = 0.0,
                                        std::vector<int> points = {2, 3, 4, 5},
                                        std::uint64_t mc_seed = 7001) {
  ChainDimResult ref = chain_dim_compare(n, c, w, bias, 64, 2, mc_seed);
  std::ostringstream os;
  os << "method,points,evals,abs_err_p,max_abs_err_mean\n";
  auto emit = [&](const char* method, int pts, std::size_t evals, double p,
                  const Vector& mean) {
    double ep = std::abs(p - ref.p_reduced);
    double em = (mean - ref.mean_reduced).cwiseAbs().maxCoeff();
    os << method << "," << pts << "," << evals << "," << detail::fmt(ep) << ","
       << detail::fmt(em) << "\n";
  };
  for (int p : points) {
    ChainDimResult r = chain_dim_compare(n, c, w, bias, p, p, mc_seed);
    emit("reduced", p, r.evals_reduced, r.p_reduced, r.mean_reduced);
    emit("direct", p, r.evals_direct, r.p_direct, r.mean_direct);
    emit("mc", p, r.evals_mc, r.p_mc, r.mean_mc);
  }
  return os.str();
}

// CSV: KL between joint-mode and sequential-mode insertion on A<-X->Y->B.
inline std::string experiment_joint_vs_sequential(
    std::vector<double> corrs = {0.0, 0.25, 0.5, 0.75, 0.95},
    std::vector<std::pair<std::string, double>> sharpness = {{"flat", 1.0}, {"sharp", 8.0}},
    int points = 20) {
  std::ostringstream os;
  os << "corr,sharpness,kl_discrete,kl_continuous\n";
  for (const auto& [label, w] : sharpness) {
    for (double rho : corrs) {
      Network net = make_axyb(rho, w);
      EngineConfig cfg;
      cfg.backend.points_per_dim = points;
      cfg.insert_mode = InsertMode::Joint;
      std::vector<VarId> q = {*net.id_of("A"), *net.id_of("B"), *net.id_of("X"),
                              *net.id_of("Y")};
      QueryResult joint = run_infer(net, {}, q, cfg).result;
      cfg.insert_mode = InsertMode::Sequential;
      QueryResult seq = run_infer(net, {}, q, cfg).result;
      double kld = kl_discrete(joint.probs, seq.probs);
      double klc = 0.0;
      for (size_t i = 0; i < joint.probs.size(); ++i)
        if (joint.probs[i] > 0)
          klc += joint.probs[i] *
                 kl_gaussian(joint.means[i], joint.covs[i], seq.means[i], seq.covs[i]);
      os << detail::fmt(rho) << "," << label << "," << detail::fmt(kld) << ","
         << detail::fmt(klc) << "\n";
    }
  }
  return os.str();
}

// CSV: engine and LW accuracy against a 150-points-per-dimension reference on
// the extended crop network (P(Price) without evidence; P(Rain) given
// Profit=Even).
inline std::string experiment_crop_convergence(
    const Network& crop, std::vector<int> points = {2, 3, 5, 8, 12, 20},
    std::vector<std::int64_t> samples = {1000, 10000, 100000, 1000000},
    std::uint64_t seed = 9001) {
  VarId price = *crop.id_of("Price");
  VarId rain = *crop.id_of("Rain");
  VarId profit = *crop.id_of("Profit");
  Evidence even;
  even.discrete[profit] = 1;  // state "Even"

  auto engine_pair = [&](int pts, double& mean, double& var, std::vector<double>& probs) {
    EngineConfig cfg;
    cfg.backend.points_per_dim = pts;
    QueryResult noe = run_infer(crop, {}, {price}, cfg).result;
    mean = noe.means[0][0];
    var = noe.covs[0](0, 0);
    QueryResult re = run_infer(crop, even, {rain}, cfg).result;
    probs = re.probs;
  };

  double ref_mean, ref_var;
  std::vector<double> ref_rain;
  engine_pair(150, ref_mean, ref_var, ref_rain);

  auto kl_price = [&](double m, double v) {
    return kl_gaussian(Vector::Constant(1, ref_mean), Matrix::Constant(1, 1, ref_var),
                       Vector::Constant(1, m), Matrix::Constant(1, 1, v));
  };
  auto kl_rain = [&](std::vector<double> q) {
    double floor = 1e-12, s = 0.0;
    for (double& x : q) {
      x = std::max(x, floor);
      s += x;
    }
    for (double& x : q) x /= s;
    return kl_discrete(ref_rain, q);
  };

  std::ostringstream os;
  os << "method,budget,elapsed_ms,kl_price_no_evidence,kl_rain_profit_even\n";
  for (int pts : points) {
    auto t0 = std::chrono::steady_clock::now();
    double m, v;
    std::vector<double> probs;
    engine_pair(pts, m, v, probs);
    double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    os << "engine," << pts << "," << detail::fmt(ms) << "," << detail::fmt(kl_price(m, v))
       << "," << detail::fmt(kl_rain(probs)) << "\n";
  }
  for (std::int64_t s : samples) {
    auto t0 = std::chrono::steady_clock::now();
    EstimateReport a = likelihood_weighting(crop, {}, {price}, s, seed);
    EstimateReport b = likelihood_weighting(crop, even, {rain}, s, seed + 1);
    double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    os << "lw," << s << "," << detail::fmt(ms) << ","
       << detail::fmt(kl_price(a.estimates[0].mean, a.estimates[0].variance)) << ","
       << detail::fmt(kl_rain(b.estimates[0].probs)) << "\n";
  }
  return os.str();
}

}  // namespace hybridbn
