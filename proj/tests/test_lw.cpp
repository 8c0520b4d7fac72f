#include <catch2/catch_amalgamated.hpp>

#include "hybridbn/experiments.hpp"
#include "hybridbn/io.hpp"
#include "hybridbn/lw.hpp"
#include "oracles.hpp"

using namespace hybridbn;

namespace {

const std::string kData = HYBRIDBN_DATA_DIR;

Network sprinkler() {
  Network net;
  VarId c = detail::add_disc(net, "Cloudy", {"0", "1"});
  VarId s = detail::add_disc(net, "Sprinkler", {"0", "1"});
  VarId r = detail::add_disc(net, "Rain", {"0", "1"});
  VarId w = detail::add_disc(net, "Wet", {"0", "1"});
  detail::add_table(net, c, {}, {{0.5, 0.5}});
  detail::add_table(net, s, {c}, {{0.5, 0.5}, {0.9, 0.1}});
  detail::add_table(net, r, {c}, {{0.8, 0.2}, {0.2, 0.8}});
  detail::add_table(net, w, {s, r},
                    {{1.0, 0.0}, {0.1, 0.9}, {0.1, 0.9}, {0.01, 0.99}});
  return net;
}

}  // namespace

TEST_CASE("unweighted sampling matches enumeration", "[lw]") {
  Network net = sprinkler();
  EstimateReport rep = likelihood_weighting(net, {}, {0, 3}, 50000, 31337);
  CHECK(rep.ess == Catch::Approx(50000.0));  // no evidence: all weights equal
  CHECK(rep.zero_weight_count == 0);
  auto joint = oracles::enumerate_discrete(net, {});
  double p_wet = 0.0;
  for (const auto& [asg, w] : joint)
    if (asg[3] == 1) p_wet += w;
  const auto& wet = rep.estimates[1];
  CHECK(wet.probs_se[1] > 0.0);
  CHECK(std::abs(wet.probs[1] - p_wet) < 3.0 * wet.probs_se[1]);
  CHECK(wet.probs[0] + wet.probs[1] == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("evidence weighting matches the conditional", "[lw]") {
  Network net = sprinkler();
  Evidence ev;
  ev.discrete[3] = 1;
  EstimateReport rep = likelihood_weighting(net, ev, {0}, 100000, 7);
  CHECK(rep.ess < 100000.0);
  auto joint = oracles::enumerate_discrete(net, {{3, 1}});
  double pe = 0.0, pc = 0.0;
  for (const auto& [asg, w] : joint) {
    pe += w;
    if (asg[0] == 1) pc += w;
  }
  const auto& cloudy = rep.estimates[0];
  CHECK(std::abs(cloudy.probs[1] - pc / pe) < 3.0 * cloudy.probs_se[1]);
  CHECK(std::exp(rep.log_mean_weight) == Catch::Approx(pe).margin(0.01));
}

TEST_CASE("continuous queries report weighted moments", "[lw]") {
  Network net = make_xa_toy();
  Evidence ev;
  ev.discrete[1] = 1;  // A = a1
  EstimateReport rep = likelihood_weighting(net, ev, {0}, 100000, 2024);
  oracles::SigmoidMoments truth = oracles::sigmoid_gaussian_moments();
  const auto& x = rep.estimates[0];
  CHECK(std::abs(x.mean - truth.mean) < 3.0 * x.mean_se);
  CHECK(std::abs(x.variance - truth.var) < 3.0 * x.variance_se);
  CHECK(std::exp(rep.log_mean_weight) == Catch::Approx(0.5).margin(0.01));
}

TEST_CASE("continuous evidence contributes densities", "[lw]") {
  Network net;
  VarId x = detail::add_cont(net, "X");
  VarId d = detail::add_disc(net, "D", {"0", "1"});
  VarId y = detail::add_cont(net, "Y");
  VarId z = detail::add_cont(net, "Z");
  detail::add_table(net, d, {}, {{0.4, 0.6}});
  detail::add_clg(net, x, {}, {}, {{0.0, {}, 1.0}});
  detail::add_clg(net, y, {d}, {x}, {{1.0, {2.0}, 0.5}, {-1.0, {1.0}, 2.0}});
  detail::add_clg(net, z, {}, {y}, {{3.0, {0.5}, 1.0}});
  Evidence ev;
  ev.continuous[z] = 2.5;
  EstimateReport rep = likelihood_weighting(net, ev, {d, x}, 200000, 99);
  oracles::CLGOracle oracle = oracles::clg_oracle(net, {}, {{z, 2.5}});
  const auto& de = rep.estimates[0];
  CHECK(std::abs(de.probs[0] - oracle.prob(d, 0)) < 3.0 * de.probs_se[0]);
  double mean, var;
  oracle.moments(x, mean, var);
  const auto& xe = rep.estimates[1];
  CHECK(std::abs(xe.mean - mean) < 3.0 * xe.mean_se);
  CHECK(std::abs(xe.variance - var) < 3.0 * xe.variance_se);
}

TEST_CASE("standard errors follow the square-root law", "[lw]") {
  Network net = sprinkler();
  Evidence ev;
  ev.discrete[3] = 1;
  EstimateReport small = likelihood_weighting(net, ev, {0}, 8000, 5);
  EstimateReport big = likelihood_weighting(net, ev, {0}, 32000, 5);
  double ratio = small.estimates[0].probs_se[1] / big.estimates[0].probs_se[1];
  CHECK(ratio > 2.0 / 1.5);
  CHECK(ratio < 2.0 * 1.5);
}

TEST_CASE("reports are deterministic per seed", "[lw]") {
  Network net = load_network(kData + "/extended_crop.json");
  Evidence ev;
  ev.discrete[*net.id_of("Profit")] = 1;
  VarId rain = *net.id_of("Rain");
  EstimateReport a = likelihood_weighting(net, ev, {rain}, 20000, 42);
  EstimateReport b = likelihood_weighting(net, ev, {rain}, 20000, 42);
  CHECK(a.estimates[0].probs == b.estimates[0].probs);
  CHECK(a.ess == b.ess);
  EstimateReport c = likelihood_weighting(net, ev, {rain}, 20000, 43);
  CHECK(a.estimates[0].probs != c.estimates[0].probs);
}

TEST_CASE("degenerate weights are reported", "[lw]") {
  Network net = sprinkler();
  Evidence ev;
  ev.discrete[1] = 0;
  ev.discrete[2] = 0;
  ev.discrete[3] = 1;  // impossible configuration
  CHECK_THROWS_AS(likelihood_weighting(net, ev, {0}, 1000, 1), DegenerateWeights);
}

TEST_CASE("crop sampling brackets the sigmoid children", "[lw]") {
  Network net = load_network(kData + "/extended_crop.json");
  EstimateReport rep =
      likelihood_weighting(net, {}, {*net.id_of("Buy"), *net.id_of("Price")}, 50000, 11);
  // price sits in single digits, so Buy=Yes is essentially impossible
  CHECK(rep.estimates[0].probs[1] > 0.99);
  CHECK(rep.estimates[1].mean > 4.0);
  CHECK(rep.estimates[1].mean < 8.0);
  CHECK(rep.ess == Catch::Approx(50000.0));
}
