#include <catch2/catch_amalgamated.hpp>

#include "hybridbn/cliquetree.hpp"
#include "hybridbn/experiments.hpp"
#include "hybridbn/io.hpp"

using namespace hybridbn;

namespace {

const std::string kData = HYBRIDBN_DATA_DIR;

}  // namespace

TEST_CASE("moralization marries co-parents", "[cliquetree]") {
  Network net = load_network(kData + "/extended_crop.json");
  MoralGraph g = moralize(net);
  VarId policy = *net.id_of("Policy"), rain = *net.id_of("Rain"), sub = *net.id_of("Subsidize");
  VarId price = *net.id_of("Price"), cropv = *net.id_of("Crop"), buy = *net.id_of("Buy");
  VarId profit = *net.id_of("Profit");
  CHECK(g.has_edge(rain, policy));   // co-parents of Subsidize
  CHECK(g.has_edge(sub, cropv));     // co-parents of Price
  CHECK(g.has_edge(price, cropv));   // parent edges kept
  CHECK(g.has_edge(buy, price));
  CHECK(g.has_edge(profit, cropv));
  CHECK(g.has_edge(sub, buy));       // co-parents of Profit
  CHECK(!g.has_edge(policy, price));
}

TEST_CASE("continuous components and discrete neighbors", "[cliquetree]") {
  Network net = load_network(kData + "/emission_example.json");
  MoralGraph g = moralize(net);
  auto comps = continuous_components(g, net);
  REQUIRE(comps.size() == 2);
  VarId miw = *net.id_of("MetalInWaste"), me = *net.id_of("MetalEmission");
  VarId co2 = *net.id_of("CO2Emission"), dust = *net.id_of("DustEmission");
  CHECK(comps[0] == std::vector<VarId>{miw, me});
  CHECK(comps[1] == std::vector<VarId>{co2, dust});
  auto dn = discrete_neighbors(g, net, comps[1]);
  // Burning, Filter plus both sensor children
  CHECK(dn == std::vector<VarId>{*net.id_of("Filter"), *net.id_of("Burning"),
                                 *net.id_of("CO2Sensor"), *net.id_of("DustSensor")});
}

TEST_CASE("strong order eliminates continuous variables first", "[cliquetree]") {
  Network net = load_network(kData + "/extended_crop.json");
  MoralGraph g = moralize(net);
  auto order = strong_elimination_order(g, net);
  REQUIRE(order.size() == net.variables.size());
  bool seen_discrete = false;
  for (VarId v : order) {
    if (net.is_discrete(v))
      seen_discrete = true;
    else
      CHECK(!seen_discrete);  // no continuous after a discrete
  }
}

TEST_CASE("crop tree satisfies the structural contracts", "[cliquetree]") {
  Network net = load_network(kData + "/extended_crop.json");
  for (auto mode : {TreeOptions::Mode::Exact, TreeOptions::Mode::Approximate}) {
    TreeOptions opts;
    opts.mode = mode;
    CliqueTree ct = build_clique_tree(net, opts);
    INFO((mode == TreeOptions::Mode::Exact ? "exact" : "approximate"));
    CHECK(ct.check_running_intersection());
    CHECK(ct.check_strong_root(net, ct.root));
    REQUIRE(ct.designated.size() == 1);
    int d = ct.designated.begin()->second;
    // the designated clique must hold every CD child with its full family
    for (std::size_t ci : ct.component_cds[ct.designated.begin()->first]) {
      const auto& cpd = net.softmaxes[ci];
      CHECK(ct.contains(d, cpd.child));
      CHECK(ct.contains_all(d, cpd.cparents));
      CHECK(ct.contains_all(d, cpd.dparents));
    }
    // family preservation for every CPD
    for (const auto& cpd : net.tables) {
      std::vector<VarId> fam = cpd.parents;
      fam.push_back(cpd.child);
      bool found = false;
      for (int c = 0; c < static_cast<int>(ct.cliques.size()) && !found; ++c)
        found = ct.contains_all(c, fam);
      CHECK(found);
    }
    for (const auto& cpd : net.clgs) {
      std::vector<VarId> fam = cpd.dparents;
      fam.insert(fam.end(), cpd.cparents.begin(), cpd.cparents.end());
      fam.push_back(cpd.child);
      bool found = false;
      for (int c = 0; c < static_cast<int>(ct.cliques.size()) && !found; ++c)
        found = ct.contains_all(c, fam);
      CHECK(found);
    }
  }
}

TEST_CASE("emission tree has one designated clique per component", "[cliquetree]") {
  Network net = load_network(kData + "/emission_example.json");
  CliqueTree ct = build_clique_tree(net);
  CHECK(ct.check_running_intersection());
  CHECK(ct.check_strong_root(net, ct.root));
  REQUIRE(ct.designated.size() == 2);
  for (auto [comp, cl] : ct.designated)
    for (std::size_t ci : ct.component_cds[comp]) {
      const auto& cpd = net.softmaxes[ci];
      CHECK(ct.contains(cl, cpd.child));
      CHECK(ct.contains_all(cl, cpd.cparents));
    }
}

TEST_CASE("pure discrete networks build without designated cliques", "[cliquetree]") {
  Network net;
  VarId a = detail::add_disc(net, "A", {"0", "1"});
  VarId b = detail::add_disc(net, "B", {"0", "1"});
  VarId c = detail::add_disc(net, "C", {"0", "1"});
  detail::add_table(net, a, {}, {{0.3, 0.7}});
  detail::add_table(net, b, {a}, {{0.9, 0.1}, {0.2, 0.8}});
  detail::add_table(net, c, {b}, {{0.5, 0.5}, {0.1, 0.9}});
  CliqueTree ct = build_clique_tree(net);
  CHECK(ct.designated.empty());
  CHECK(ct.check_running_intersection());
  CHECK(ct.check_strong_root(net, ct.root));
}

TEST_CASE("disconnected networks form a forest glued at the root", "[cliquetree]") {
  Network net;
  VarId a = detail::add_disc(net, "A", {"0", "1"});
  VarId x = detail::add_cont(net, "X");
  VarId b = detail::add_disc(net, "B", {"0", "1"});
  detail::add_table(net, a, {}, {{0.3, 0.7}});
  detail::add_clg(net, x, {}, {}, {{0.0, {}, 1.0}});
  detail::add_table(net, b, {}, {{0.6, 0.4}});
  CliqueTree ct = build_clique_tree(net);
  CHECK(ct.check_running_intersection());
  CHECK(ct.check_strong_root(net, ct.root));
  // all cliques reachable from the root
  int reach = 0;
  for (const auto& cl : ct.cliques)
    if (cl.parent >= 0 || (&cl - ct.cliques.data()) == ct.root) ++reach;
  CHECK(reach == static_cast<int>(ct.cliques.size()));
}

TEST_CASE("oversized cliques are rejected early", "[cliquetree]") {
  // 15 binary parents of one child: 2^16 table entries > the default cap
  Network net;
  std::vector<VarId> parents;
  for (int i = 0; i < 15; ++i)
    parents.push_back(detail::add_disc(net, "P" + std::to_string(i), {"0", "1"}));
  VarId child = detail::add_disc(net, "C", {"0", "1"});
  for (VarId p : parents) detail::add_table(net, p, {}, {{0.5, 0.5}});
  std::vector<std::vector<double>> rows(1 << 15, {0.5, 0.5});
  detail::add_table(net, child, parents, rows);
  CHECK_THROWS_AS(build_clique_tree(net), TreeTooLarge);

  // 17 continuous variables in one clique exceeds the dimension cap
  Network chain = make_chain(17);
  CHECK_THROWS_AS(build_clique_tree(chain), TreeTooLarge);

  // a larger cap admits it
  TreeOptions opts;
  opts.max_cont_dims = 32;
  CHECK_NOTHROW(build_clique_tree(chain, opts));
}

TEST_CASE("chain tree is one fat clique plus ancestors", "[cliquetree]") {
  Network net = make_chain(6);
  CliqueTree ct = build_clique_tree(net);
  CHECK(ct.check_running_intersection());
  CHECK(ct.check_strong_root(net, ct.root));
  REQUIRE(ct.designated.size() == 1);
  int d = ct.designated.begin()->second;
  CHECK(ct.cliques[d].cvars.size() == 6);
  CHECK(ct.cliques[d].dvars == std::vector<VarId>{*net.id_of("A")});
}

TEST_CASE("dump_tree mentions every clique", "[cliquetree]") {
  Network net = load_network(kData + "/extended_crop.json");
  CliqueTree ct = build_clique_tree(net);
  std::string text = dump_tree(net, ct);
  CHECK(text.find("Price") != std::string::npos);
  CHECK(text.find("root") != std::string::npos);
}
