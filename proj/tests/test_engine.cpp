#include <catch2/catch_amalgamated.hpp>

#include "hybridbn/engine.hpp"
#include "hybridbn/experiments.hpp"
#include "hybridbn/io.hpp"
#include "hybridbn/kl.hpp"
#include "hybridbn/lw.hpp"

using namespace hybridbn;

namespace {

const std::string kData = HYBRIDBN_DATA_DIR;

}  // namespace

TEST_CASE("crop pipeline produces a coherent posterior", "[engine]") {
  Network net = load_network(kData + "/extended_crop.json");
  Evidence ev;
  ev.discrete[*net.id_of("Profit")] = 1;  // Even
  EngineConfig cfg;
  ResultReport rep = run_infer(net, ev, {*net.id_of("Rain")}, cfg);
  REQUIRE(rep.result.probs.size() == 3);
  double sum = rep.result.probs[0] + rep.result.probs[1] + rep.result.probs[2];
  CHECK(sum == Catch::Approx(1.0).margin(1e-9));
  CHECK(rep.result.log_mass < 0.0);  // genuine evidence
  CHECK(rep.n_cliques >= 1);
  CHECK(rep.insertion.items.size() == 1);

  // identical runs give identical numbers
  ResultReport rep2 = run_infer(net, ev, {*net.id_of("Rain")}, cfg);
  CHECK(rep.result.probs == rep2.result.probs);
  CHECK(rep.result.log_mass == rep2.result.log_mass);
}

TEST_CASE("point count refines toward the dense reference", "[engine]") {
  Network net = load_network(kData + "/extended_crop.json");
  VarId price = *net.id_of("Price");
  auto query_price = [&](int pts) {
    EngineConfig cfg;
    cfg.backend.points_per_dim = pts;
    return run_infer(net, {}, {price}, cfg).result;
  };
  QueryResult ref = query_price(50);
  QueryResult coarse = query_price(3);
  QueryResult fine = query_price(10);
  double err_coarse = std::abs(coarse.means[0][0] - ref.means[0][0]);
  double err_fine = std::abs(fine.means[0][0] - ref.means[0][0]);
  CHECK(err_coarse < 0.05);
  CHECK(err_fine <= err_coarse + 1e-12);
  CHECK(std::exp(ref.log_mass) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("engine agrees with likelihood weighting on the crop", "[engine]") {
  Network net = load_network(kData + "/extended_crop.json");
  VarId price = *net.id_of("Price");
  EngineConfig cfg;
  cfg.backend.points_per_dim = 8;
  QueryResult q = run_infer(net, {}, {price}, cfg).result;
  EstimateReport lw = likelihood_weighting(net, {}, {price}, 200000, 555);
  const auto& e = lw.estimates[0];
  CHECK(std::abs(q.means[0][0] - e.mean) < 3.0 * e.mean_se);
  CHECK(std::abs(q.covs[0](0, 0) - e.variance) < 3.0 * e.variance_se);

  Evidence ev;
  ev.discrete[*net.id_of("Profit")] = 1;
  VarId rain = *net.id_of("Rain");
  QueryResult qr = run_infer(net, ev, {rain}, cfg).result;
  EstimateReport lwr = likelihood_weighting(net, ev, {rain}, 200000, 556);
  for (int s = 0; s < 3; ++s)
    CHECK(std::abs(qr.probs[s] - lwr.estimates[0].probs[s]) <
          3.0 * lwr.estimates[0].probs_se[s]);
}

TEST_CASE("tree modes agree on the crop", "[engine]") {
  Network net = load_network(kData + "/extended_crop.json");
  Evidence ev;
  ev.discrete[*net.id_of("Profit")] = 2;  // Profit
  VarId rain = *net.id_of("Rain");
  EngineConfig exact;
  EngineConfig approx;
  approx.tree.mode = TreeOptions::Mode::Approximate;
  QueryResult a = run_infer(net, ev, {rain}, exact).result;
  QueryResult b = run_infer(net, ev, {rain}, approx).result;
  for (int s = 0; s < 3; ++s) CHECK(a.probs[s] == Catch::Approx(b.probs[s]).margin(1e-6));
}

TEST_CASE("sequential mode runs the crop", "[engine]") {
  Network net = load_network(kData + "/extended_crop.json");
  EngineConfig cfg;
  cfg.insert_mode = InsertMode::Sequential;
  VarId price = *net.id_of("Price");
  QueryResult q = run_infer(net, {}, {price}, cfg).result;
  CHECK(std::exp(q.log_mass) == Catch::Approx(1.0).margin(1e-9));
  CHECK(q.means[0][0] > 4.0);
  CHECK(q.means[0][0] < 8.0);
}

TEST_CASE("monte carlo backend approximates the quadrature result", "[engine]") {
  Network net = load_network(kData + "/extended_crop.json");
  VarId price = *net.id_of("Price");
  EngineConfig gh;
  gh.backend.points_per_dim = 20;
  EngineConfig mc;
  mc.backend.backend = QuadratureConfig::Backend::MonteCarlo;
  mc.backend.mc_samples = 200000;
  QueryResult a = run_infer(net, {}, {price}, gh).result;
  QueryResult b = run_infer(net, {}, {price}, mc).result;
  CHECK(b.means[0][0] == Catch::Approx(a.means[0][0]).margin(0.05));
  // MC runs are reproducible too
  QueryResult c = run_infer(net, {}, {price}, mc).result;
  CHECK(b.means[0][0] == c.means[0][0]);
}

TEST_CASE("emission network cross-checks against sampling", "[engine]") {
  Network net = load_network(kData + "/emission_example.json");
  Evidence ev;
  ev.discrete[*net.id_of("MetalSensor")] = 1;
  ev.discrete[*net.id_of("CO2Sensor")] = 1;
  VarId dust = *net.id_of("DustEmission");
  EngineConfig cfg;
  cfg.backend.points_per_dim = 12;
  QueryResult q = run_infer(net, ev, {dust}, cfg).result;
  EstimateReport lw = likelihood_weighting(net, ev, {dust}, 300000, 777);
  const auto& e = lw.estimates[0];
  CHECK(std::abs(q.means[0][0] - e.mean) < 3.0 * e.mean_se);
  CHECK(std::abs(q.covs[0](0, 0) - e.variance) < 3.0 * e.variance_se);

  VarId burning = *net.id_of("Burning");
  QueryResult qb = run_infer(net, ev, {burning}, cfg).result;
  EstimateReport lwb = likelihood_weighting(net, ev, {burning}, 300000, 778);
  for (int s = 0; s < 2; ++s)
    CHECK(std::abs(qb.probs[s] - lwb.estimates[0].probs[s]) <
          3.0 * lwb.estimates[0].probs_se[s]);
}

TEST_CASE("queries outside any clique are refused with names", "[engine]") {
  Network net = load_network(kData + "/extended_crop.json");
  EngineConfig cfg;
  try {
    run_infer(net, {}, {*net.id_of("Policy"), *net.id_of("Price")}, cfg);
    FAIL("expected OutOfCliqueQuery");
  } catch (const OutOfCliqueQuery& e) {
    CHECK(std::string(e.what()).find("Policy") != std::string::npos);
  }
}

TEST_CASE("prepared trees answer repeated queries", "[engine]") {
  Network net = load_network(kData + "/extended_crop.json");
  Evidence ev;
  ev.continuous[*net.id_of("Crop")] = 4.0;
  EngineConfig cfg;
  InsertionStats stats;
  CalibratedTree ct = prepare_tree(net, ev, cfg, &stats);
  QueryResult qp = ct.query({*net.id_of("Price")});
  QueryResult qr = ct.query({*net.id_of("Rain")});
  CHECK(std::isfinite(qp.means[0][0]));
  CHECK(qr.probs[0] + qr.probs[1] + qr.probs[2] == Catch::Approx(1.0).margin(1e-9));
  // observing Crop shrinks the CD integration space to Price alone
  REQUIRE(stats.items.size() == 1);
  CHECK(stats.items[0].z_dim == 1);
}

TEST_CASE("experiment csv emitters produce stable schemas", "[engine][experiments]") {
  std::string chain = experiment_chain_dim(3, 0.5, 0.3, 0.0, {2, 3}, 123);
  CHECK(chain.rfind("method,points,evals,abs_err_p,max_abs_err_mean\n", 0) == 0);
  CHECK(std::count(chain.begin(), chain.end(), '\n') == 7);  // header + 2x3 rows

  std::string jvs = experiment_joint_vs_sequential({0.0, 0.5}, {{"flat", 1.0}}, 8);
  CHECK(jvs.rfind("corr,sharpness,kl_discrete,kl_continuous\n", 0) == 0);
  CHECK(std::count(jvs.begin(), jvs.end(), '\n') == 3);

  Network crop = load_network(kData + "/extended_crop.json");
  std::string cc = experiment_crop_convergence(crop, {3}, {5000}, 9);
  CHECK(cc.rfind("method,budget,elapsed_ms,kl_price_no_evidence,kl_rain_profit_even\n", 0) == 0);
  CHECK(std::count(cc.begin(), cc.end(), '\n') == 3);
}
