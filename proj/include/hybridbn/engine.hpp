#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "hybridbn/cdinsert.hpp"
#include "hybridbn/cliquetree.hpp"
#include "hybridbn/model.hpp"
#include "hybridbn/propagation.hpp"

namespace hybridbn {

struct EngineConfig {
  QuadratureConfig backend;
  InsertMode insert_mode = InsertMode::Joint;
  TreeOptions tree;
};

struct ResultReport {
  QueryResult result;
  InsertionStats insertion;
  int n_cliques = 0;
  double elapsed_ms = 0.0;  // excluded from the determinism contract
};

// The full pipeline: build a strong tree, place non-CD CPDs, calibrate,
// enter evidence and re-calibrate, insert CD CPDs (instantiated with the
// continuous evidence), re-calibrate, then answer the query.
inline ResultReport run_infer(const Network& net, const Evidence& ev,
                              const std::vector<VarId>& query,
                              const EngineConfig& cfg = {}) {
  auto t0 = std::chrono::steady_clock::now();
  auto violations = validate_network(net);
  if (!violations.empty()) {
    std::string msg = "network invalid:";
    for (const auto& v : violations) msg += "\n  - " + v;
    throw ValidationError(msg);
  }
  CliqueTree tree = build_clique_tree(net, cfg.tree);
  CalibratedTree ct(net, std::move(tree));
  ct.calibrate();
  if (!ev.empty()) ct.enter_evidence(ev);
  ResultReport rep;
  rep.insertion = insert_cd_cpds(ct, cfg.insert_mode, cfg.backend);
  rep.result = ct.query(query);
  rep.n_cliques = ct.n_cliques();
  rep.elapsed_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
  return rep;
}

// Calibrated tree ready for repeated queries (same pipeline, no query step).
inline CalibratedTree prepare_tree(const Network& net, const Evidence& ev,
                                   const EngineConfig& cfg = {},
                                   InsertionStats* stats_out = nullptr) {
  CliqueTree tree = build_clique_tree(net, cfg.tree);
  CalibratedTree ct(net, std::move(tree));
  ct.calibrate();
  if (!ev.empty()) ct.enter_evidence(ev);
  InsertionStats st = insert_cd_cpds(ct, cfg.insert_mode, cfg.backend);
  if (stats_out) *stats_out = st;
  return ct;
}

}  // namespace hybridbn
