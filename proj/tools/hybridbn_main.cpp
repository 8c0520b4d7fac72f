#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hybridbn/hybridbn.hpp"

namespace hb = hybridbn;
using nlohmann::json;

namespace {

std::vector<hb::VarId> resolve_query(const hb::Network& net,
                                     const std::vector<std::string>& names) {
  std::vector<hb::VarId> out;
  for (const auto& n : names) {
    auto id = net.id_of(n);
    if (!id) throw hb::ParseError("query: unknown variable '" + n + "'");
    out.push_back(*id);
  }
  return out;
}

struct BackendFlags {
  int points = 3;
  int max_dim = 6;
  std::string backend = "gh";
  std::int64_t mc_samples = 100000;
  std::uint64_t seed = 20240501;
  std::string mode = "joint";
  std::string tree = "exact";

  void attach(CLI::App* cmd) {
    cmd->add_option("--points", points, "Quadrature points per dimension");
    cmd->add_option("--max-dim", max_dim, "Tensor-grid dimension cap");
    cmd->add_option("--backend", backend, "Integration backend")
        ->check(CLI::IsMember({"gh", "mc"}));
    cmd->add_option("--mc-samples", mc_samples, "Monte Carlo sample count");
    cmd->add_option("--seed", seed, "Monte Carlo seed");
    cmd->add_option("--mode", mode, "CD insertion mode")
        ->check(CLI::IsMember({"joint", "sequential"}));
    cmd->add_option("--tree", tree, "Clique tree construction mode")
        ->check(CLI::IsMember({"exact", "approximate"}));
  }

  hb::EngineConfig engine_config() const {
    hb::EngineConfig cfg;
    cfg.backend.points_per_dim = points;
    cfg.backend.max_dim = max_dim;
    cfg.backend.backend = backend == "mc" ? hb::QuadratureConfig::Backend::MonteCarlo
                                          : hb::QuadratureConfig::Backend::GaussHermite;
    cfg.backend.mc_samples = mc_samples;
    cfg.backend.mc_seed = seed;
    cfg.insert_mode =
        mode == "sequential" ? hb::InsertMode::Sequential : hb::InsertMode::Joint;
    cfg.tree.mode = tree == "approximate" ? hb::TreeOptions::Mode::Approximate
                                          : hb::TreeOptions::Mode::Exact;
    return cfg;
  }
};

hb::Evidence gather_evidence(const hb::Network& net, const std::string& file,
                             const std::vector<std::string>& args) {
  hb::Evidence ev;
  if (!file.empty()) ev = hb::load_evidence(net, file);
  hb::Evidence cli = hb::parse_evidence_args(net, args);
  for (auto [v, s] : cli.discrete) ev.discrete[v] = s;
  for (auto [v, x] : cli.continuous) ev.continuous[v] = x;
  hb::validate_evidence(net, ev);
  return ev;
}

json matrix_to_json(const hb::Matrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

json report_to_json(const hb::Network& net, const hb::ResultReport& rep,
                    const BackendFlags& flags) {
  const hb::QueryResult& r = rep.result;
  json doc;
  doc["elapsed_ms"] = rep.elapsed_ms;
  doc["log_p_evidence"] = r.log_mass;
  doc["p_evidence"] = std::exp(r.log_mass);
  json qd = json::array(), qc = json::array();
  for (hb::VarId v : r.dvars) qd.push_back(net.var(v).name);
  for (hb::VarId v : r.cvars) qc.push_back(net.var(v).name);
  doc["query"] = {{"discrete", qd}, {"continuous", qc}};
  json marg = json::array();
  std::vector<int> states(r.dvars.size(), 0);
  for (size_t idx = 0; idx < r.probs.size(); ++idx) {
    json entry;
    json asg = json::object();
    for (size_t i = 0; i < r.dvars.size(); ++i)
      asg[net.var(r.dvars[i]).name] = net.var(r.dvars[i]).states[states[i]];
    entry["assignment"] = asg;
    entry["prob"] = r.probs[idx];
    if (!r.cvars.empty()) {
      json mean = json::object();
      for (size_t i = 0; i < r.cvars.size(); ++i)
        mean[net.var(r.cvars[i]).name] = r.means[idx][static_cast<int>(i)];
      entry["mean"] = mean;
      entry["cov"] = matrix_to_json(r.covs[idx]);
    }
    marg.push_back(entry);
    for (int i = static_cast<int>(states.size()) - 1; i >= 0; --i) {
      if (++states[i] < r.dcards[i]) break;
      states[i] = 0;
    }
  }
  doc["marginals"] = marg;
  json ins = json::array();
  for (const auto& c : rep.insertion.items) {
    ins.push_back({{"component", c.component},
                   {"clique", c.clique},
                   {"z_dim", c.z_dim},
                   {"reduced", c.reduced},
                   {"integrand_evals", c.integrand_evals},
                   {"sharpness", c.sharpness}});
  }
  doc["backend"] = {{"backend", flags.backend},
                    {"points_per_dim", flags.points},
                    {"max_dim", flags.max_dim},
                    {"mode", flags.mode},
                    {"tree", flags.tree},
                    {"n_cliques", rep.n_cliques},
                    {"insertion", ins}};
  return doc;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
  if (out.empty()) throw hb::ConfigError("empty list: '" + s + "'");
  return out;
}

std::vector<std::int64_t> parse_i64_list(const std::string& s) {
  std::vector<std::int64_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoll(tok));
  if (out.empty()) throw hb::ConfigError("empty list: '" + s + "'");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact inference for hybrid Bayesian networks with discrete children "
               "of continuous parents"};
  app.require_subcommand(1);

  std::string net_path, ev_file, experiment_name, out_path;
  std::vector<std::string> ev_args, query_names;
  BackendFlags flags;
  std::int64_t lw_samples = 100000;
  std::uint64_t lw_seed = 20240501;
  int lw_batches = 100;
  int chain_n = 8;
  double chain_c = 0.5, chain_w = 0.3, chain_b = 0.0;
  std::string points_list, samples_list;

  auto* infer = app.add_subcommand("infer", "Run clique-tree inference on a query");
  infer->add_option("--network", net_path, "Network JSON file")->required();
  infer->add_option("--query", query_names, "Query variable (repeatable)")->required();
  infer->add_option("--evidence", ev_args, "Evidence as name=value (repeatable)");
  infer->add_option("--evidence-file", ev_file, "Evidence JSON file");
  flags.attach(infer);

  auto* sample = app.add_subcommand("sample", "Likelihood-weighting estimates");
  sample->add_option("--network", net_path, "Network JSON file")->required();
  sample->add_option("--query", query_names, "Query variable (repeatable)")->required();
  sample->add_option("--evidence", ev_args, "Evidence as name=value (repeatable)");
  sample->add_option("--evidence-file", ev_file, "Evidence JSON file");
  sample->add_option("--samples", lw_samples, "Sample count");
  sample->add_option("--seed", lw_seed, "Sampler seed");
  sample->add_option("--batches", lw_batches, "Batches for batch-means SEs");

  auto* exp = app.add_subcommand("experiment", "Emit CSV for a built-in experiment");
  exp->add_option("name", experiment_name, "chain-dim | joint-vs-sequential | crop-convergence")
      ->required();
  exp->add_option("--network", net_path, "Network file (crop-convergence)");
  exp->add_option("--n", chain_n, "Chain length (chain-dim)");
  exp->add_option("--c", chain_c, "Chain coupling coefficient");
  exp->add_option("--w", chain_w, "Sigmoid weight per chain variable");
  exp->add_option("--b", chain_b, "Sigmoid bias");
  exp->add_option("--points", points_list, "Comma-separated points-per-dim sweep");
  exp->add_option("--samples", samples_list, "Comma-separated LW sample sweep");
  exp->add_option("--seed", lw_seed, "Seed for stochastic branches");

  auto* dump = app.add_subcommand("dump-tree", "Print the strong clique tree");
  dump->add_option("--network", net_path, "Network JSON file")->required();
  dump->add_option("--tree", flags.tree, "exact | approximate")
      ->check(CLI::IsMember({"exact", "approximate"}));

  auto* gen = app.add_subcommand("gen-chain", "Emit a chain network as JSON");
  gen->add_option("--n", chain_n, "Chain length")->required();
  gen->add_option("--c", chain_c, "Coupling coefficient");
  gen->add_option("--w", chain_w, "Sigmoid weight per variable");
  gen->add_option("--b", chain_b, "Sigmoid bias");

  CLI11_PARSE(app, argc, argv);

  try {
    if (infer->parsed()) {
      hb::Network net = hb::load_network(net_path);
      hb::Evidence ev = gather_evidence(net, ev_file, ev_args);
      hb::ResultReport rep =
          hb::run_infer(net, ev, resolve_query(net, query_names), flags.engine_config());
      std::cout << report_to_json(net, rep, flags).dump(2) << "\n";
    } else if (sample->parsed()) {
      hb::Network net = hb::load_network(net_path);
      hb::Evidence ev = gather_evidence(net, ev_file, ev_args);
      hb::EstimateReport rep = hb::likelihood_weighting(
          net, ev, resolve_query(net, query_names), lw_samples, lw_seed, lw_batches);
      json doc;
      doc["samples"] = rep.samples;
      doc["seed"] = rep.seed;
      doc["ess"] = rep.ess;
      doc["log_p_evidence_estimate"] = rep.log_mean_weight;
      doc["zero_weight_count"] = rep.zero_weight_count;
      json est = json::array();
      for (const auto& e : rep.estimates) {
        json je;
        je["variable"] = net.var(e.var).name;
        if (net.is_discrete(e.var)) {
          je["states"] = net.var(e.var).states;
          je["probs"] = e.probs;
          je["probs_se"] = e.probs_se;
        } else {
          je["mean"] = e.mean;
          je["mean_se"] = e.mean_se;
          je["variance"] = e.variance;
          je["variance_se"] = e.variance_se;
        }
        est.push_back(je);
      }
      doc["estimates"] = est;
      std::cout << doc.dump(2) << "\n";
    } else if (exp->parsed()) {
      if (experiment_name == "chain-dim") {
        std::vector<int> pts = points_list.empty() ? std::vector<int>{2, 3, 4, 5}
                                                   : parse_int_list(points_list);
        std::cout << hb::experiment_chain_dim(chain_n, chain_c, chain_w, chain_b, pts,
                                              lw_seed);
      } else if (experiment_name == "joint-vs-sequential") {
        int pts = points_list.empty() ? 20 : parse_int_list(points_list).front();
        std::cout << hb::experiment_joint_vs_sequential(
            {0.0, 0.25, 0.5, 0.75, 0.95}, {{"flat", 1.0}, {"sharp", 8.0}}, pts);
      } else if (experiment_name == "crop-convergence") {
        if (net_path.empty()) net_path = "data/extended_crop.json";
        hb::Network crop = hb::load_network(net_path);
        std::vector<int> pts = points_list.empty() ? std::vector<int>{2, 3, 5, 8, 12, 20}
                                                   : parse_int_list(points_list);
        std::vector<std::int64_t> smp =
            samples_list.empty() ? std::vector<std::int64_t>{1000, 10000, 100000}
                                 : parse_i64_list(samples_list);
        std::cout << hb::experiment_crop_convergence(crop, pts, smp, lw_seed);
      } else {
        throw hb::ConfigError("unknown experiment '" + experiment_name + "'");
      }
    } else if (dump->parsed()) {
      hb::Network net = hb::load_network(net_path);
      hb::TreeOptions opts;
      opts.mode = flags.tree == "approximate" ? hb::TreeOptions::Mode::Approximate
                                              : hb::TreeOptions::Mode::Exact;
      std::cout << hb::dump_tree(net, hb::build_clique_tree(net, opts));
    } else if (gen->parsed()) {
      std::cout << hb::network_to_json(hb::make_chain(chain_n, chain_c, chain_w, chain_b))
                       .dump(2)
                << "\n";
    }
  } catch (const hb::Error& e) {
    json err = {{"error", e.kind()}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    json err = {{"error", "Unexpected"}, {"message", e.what()}};
    std::cerr << err.dump() << "\n";
    return 2;
  }
  return 0;
}
