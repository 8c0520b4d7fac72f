#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "hybridbn/errors.hpp"
#include "hybridbn/model.hpp"

namespace hybridbn {

struct MoralGraph {
  std::vector<std::set<VarId>> adj;

  explicit MoralGraph(std::size_t n = 0) : adj(n) {}

  void add_edge(VarId a, VarId b) {
    if (a == b) return;
    adj[a].insert(b);
    adj[b].insert(a);
  }
  bool has_edge(VarId a, VarId b) const { return adj[a].count(b) > 0; }
  void make_clique(const std::vector<VarId>& vs) {
    for (size_t i = 0; i < vs.size(); ++i)
      for (size_t j = i + 1; j < vs.size(); ++j) add_edge(vs[i], vs[j]);
  }
};

// BN edges undirected plus marriages between co-parents of every family.
inline MoralGraph moralize(const Network& net) {
  MoralGraph g(net.variables.size());
  for (const auto& v : net.variables) {
    std::vector<VarId> family = net.parents_of(v.id);
    family.push_back(v.id);
    g.make_clique(family);
  }
  return g;
}

// Connected components of the continuous-only induced subgraph, each sorted,
// listed by smallest member.
inline std::vector<std::vector<VarId>> continuous_components(const MoralGraph& g,
                                                             const Network& net) {
  std::vector<std::vector<VarId>> comps;
  std::vector<char> seen(net.variables.size(), 0);
  for (const auto& v : net.variables) {
    if (v.kind != VarKind::Continuous || seen[v.id]) continue;
    std::vector<VarId> comp;
    std::queue<VarId> q;
    q.push(v.id);
    seen[v.id] = 1;
    while (!q.empty()) {
      VarId u = q.front();
      q.pop();
      comp.push_back(u);
      for (VarId w : g.adj[u])
        if (!seen[w] && net.var(w).kind == VarKind::Continuous) {
          seen[w] = 1;
          q.push(w);
        }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  return comps;
}

inline std::vector<VarId> discrete_neighbors(const MoralGraph& g, const Network& net,
                                             const std::vector<VarId>& component) {
  std::set<VarId> dn;
  for (VarId u : component)
    for (VarId w : g.adj[u])
      if (net.var(w).kind == VarKind::Discrete) dn.insert(w);
  return std::vector<VarId>(dn.begin(), dn.end());
}

namespace detail {

// min-fill cost of eliminating v from the working graph
inline int fill_cost(const MoralGraph& g, VarId v) {
  std::vector<VarId> nb(g.adj[v].begin(), g.adj[v].end());
  int fill = 0;
  for (size_t i = 0; i < nb.size(); ++i)
    for (size_t j = i + 1; j < nb.size(); ++j)
      if (!g.has_edge(nb[i], nb[j])) ++fill;
  return fill;
}

inline void eliminate(MoralGraph& g, VarId v, std::vector<VarId>& clique_out) {
  clique_out.assign(g.adj[v].begin(), g.adj[v].end());
  clique_out.push_back(v);
  std::sort(clique_out.begin(), clique_out.end());
  std::vector<VarId> nb(g.adj[v].begin(), g.adj[v].end());
  for (size_t i = 0; i < nb.size(); ++i)
    for (size_t j = i + 1; j < nb.size(); ++j) g.add_edge(nb[i], nb[j]);
  for (VarId w : nb) g.adj[w].erase(v);
  g.adj[v].clear();
}

}  // namespace detail

// Continuous block eliminated entirely before the discrete block; min-fill
// greedy inside each block with lowest-id tie break.
inline std::vector<VarId> strong_elimination_order(MoralGraph g, const Network& net) {
  std::vector<VarId> cont, disc, order;
  for (const auto& v : net.variables)
    (v.kind == VarKind::Continuous ? cont : disc).push_back(v.id);
  auto run_block = [&](std::vector<VarId> block) {
    while (!block.empty()) {
      VarId best = block.front();
      int best_cost = detail::fill_cost(g, best);
      for (VarId v : block) {
        int c = detail::fill_cost(g, v);
        if (c < best_cost || (c == best_cost && v < best)) {
          best = v;
          best_cost = c;
        }
      }
      std::vector<VarId> dummy;
      detail::eliminate(g, best, dummy);
      order.push_back(best);
      block.erase(std::find(block.begin(), block.end(), best));
    }
  };
  run_block(std::move(cont));
  run_block(std::move(disc));
  return order;
}

struct Clique {
  std::vector<VarId> vars;   // sorted
  std::vector<VarId> dvars;  // sorted
  std::vector<VarId> cvars;  // sorted
  std::vector<std::size_t> table_cpds;
  std::vector<std::size_t> clg_cpds;
  int parent = -1;  // toward strong root; -1 at root
  std::vector<int> children;
  std::vector<VarId> sep;  // separator with parent (sorted)
};

struct TreeOptions {
  enum class Mode { Exact, Approximate };
  Mode mode = Mode::Exact;
  std::size_t max_table_entries = std::size_t(1) << 14;
  int max_cont_dims = 16;
};

struct CliqueTree {
  std::vector<Clique> cliques;
  int root = -1;
  TreeOptions::Mode mode = TreeOptions::Mode::Exact;
  std::vector<std::vector<VarId>> components;       // all continuous components
  std::vector<std::vector<std::size_t>> component_cds;  // softmax cpd indices per component
  std::map<int, int> designated;                    // component -> clique index

  bool contains(int c, VarId v) const {
    const auto& vs = cliques[c].vars;
    return std::binary_search(vs.begin(), vs.end(), v);
  }

  bool contains_all(int c, const std::vector<VarId>& vs) const {
    for (VarId v : vs)
      if (!contains(c, v)) return false;
    return true;
  }

  // cliques holding v form a subtree
  bool check_running_intersection() const {
    std::set<VarId> all;
    for (const auto& c : cliques) all.insert(c.vars.begin(), c.vars.end());
    for (VarId v : all) {
      std::vector<int> holders;
      for (int i = 0; i < static_cast<int>(cliques.size()); ++i)
        if (contains(i, v)) holders.push_back(i);
      // count holders whose parent also holds v; a subtree has exactly one
      // holder without such a parent
      int roots = 0;
      for (int c : holders) {
        int p = cliques[c].parent;
        if (p < 0 || !contains(p, v)) ++roots;
      }
      if (roots != 1) return false;
    }
    return true;
  }

  // every tree edge, oriented toward the root, satisfies the strong
  // condition: the variables eliminated by the message are all continuous,
  // or the separator is all discrete
  bool check_strong_root(const Network& net, int root_candidate) const {
    // stored parent pointers encode the edge set; re-orient from the
    // candidate before checking each edge
    std::vector<std::pair<int, int>> edges;
    for (int c = 0; c < static_cast<int>(cliques.size()); ++c)
      if (cliques[c].parent >= 0) edges.push_back({c, cliques[c].parent});
    // BFS orientation from candidate
    std::vector<std::vector<int>> adj(cliques.size());
    for (auto [a, b] : edges) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    std::vector<int> par(cliques.size(), -2);
    std::queue<int> q;
    q.push(root_candidate);
    par[root_candidate] = -1;
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (int w : adj[u])
        if (par[w] == -2) {
          par[w] = u;
          q.push(w);
        }
    }
    for (int c = 0; c < static_cast<int>(cliques.size()); ++c) {
      int p = par[c];
      if (p < 0) continue;
      std::vector<VarId> sep;
      std::set_intersection(cliques[c].vars.begin(), cliques[c].vars.end(),
                            cliques[p].vars.begin(), cliques[p].vars.end(),
                            std::back_inserter(sep));
      bool residual_all_cont = true;
      for (VarId v : cliques[c].vars)
        if (!std::binary_search(sep.begin(), sep.end(), v) && net.is_discrete(v))
          residual_all_cont = false;
      bool sep_all_disc = true;
      for (VarId v : sep)
        if (!net.is_discrete(v)) sep_all_disc = false;
      if (!residual_all_cont && !sep_all_disc) return false;
    }
    return true;
  }
};

inline CliqueTree build_clique_tree(const Network& net, const TreeOptions& opts = {}) {
  MoralGraph moral = moralize(net);
  CliqueTree ct;
  ct.mode = opts.mode;
  ct.components = continuous_components(moral, net);
  ct.component_cds.assign(ct.components.size(), {});

  auto component_of = [&](VarId v) -> int {
    for (int i = 0; i < static_cast<int>(ct.components.size()); ++i)
      if (std::binary_search(ct.components[i].begin(), ct.components[i].end(), v)) return i;
    return -1;
  };

  for (std::size_t s = 0; s < net.softmaxes.size(); ++s) {
    const auto& cpd = net.softmaxes[s];
    if (cpd.cparents.empty()) continue;  // rejected by validate anyway
    ct.component_cds[component_of(cpd.cparents.front())].push_back(s);
  }

  // seed the graph so the designated clique exists after triangulation
  MoralGraph seeded = moral;
  std::vector<std::vector<VarId>> seeds(ct.components.size());
  for (size_t i = 0; i < ct.components.size(); ++i) {
    if (ct.component_cds[i].empty()) continue;
    std::set<VarId> seed;
    if (opts.mode == TreeOptions::Mode::Exact) {
      seed.insert(ct.components[i].begin(), ct.components[i].end());
      auto dn = discrete_neighbors(moral, net, ct.components[i]);
      seed.insert(dn.begin(), dn.end());
    } else {
      for (std::size_t s : ct.component_cds[i]) {
        const auto& cpd = net.softmaxes[s];
        for (VarId y : cpd.cparents) {
          seed.insert(y);
          for (VarId w : moral.adj[y])
            if (net.is_discrete(w)) seed.insert(w);
        }
      }
    }
    seeds[i].assign(seed.begin(), seed.end());
    seeded.make_clique(seeds[i]);
  }

  std::vector<VarId> order = strong_elimination_order(seeded, net);

  // elimination cliques in order
  std::vector<std::vector<VarId>> ecliques;
  {
    MoralGraph work = seeded;
    for (VarId v : order) {
      std::vector<VarId> c;
      detail::eliminate(work, v, c);
      ecliques.push_back(std::move(c));
    }
  }

  // maximal cliques, keeping first occurrence order
  std::vector<std::vector<VarId>> maximal;
  for (const auto& c : ecliques) {
    bool sub = false;
    for (const auto& m : maximal)
      if (std::includes(m.begin(), m.end(), c.begin(), c.end())) {
        sub = true;
        break;
      }
    if (sub) continue;
    maximal.erase(std::remove_if(maximal.begin(), maximal.end(),
                                 [&](const std::vector<VarId>& m) {
                                   return std::includes(c.begin(), c.end(), m.begin(),
                                                        m.end());
                                 }),
                  maximal.end());
    maximal.push_back(c);
  }

  for (const auto& c : maximal) {
    Clique cl;
    cl.vars = c;
    for (VarId v : c)
      (net.is_discrete(v) ? cl.dvars : cl.cvars).push_back(v);
    std::size_t entries = 1;
    for (VarId v : cl.dvars) entries *= static_cast<std::size_t>(net.card(v));
    if (entries > opts.max_table_entries ||
        static_cast<int>(cl.cvars.size()) > opts.max_cont_dims) {
      std::string names;
      for (VarId v : c) names += (names.empty() ? "" : ", ") + net.var(v).name;
      throw TreeTooLarge("clique {" + names + "} exceeds size cap (" +
                         std::to_string(entries) + " table entries, " +
                         std::to_string(cl.cvars.size()) + " continuous dims)");
    }
    ct.cliques.push_back(std::move(cl));
  }

  // maximum-weight spanning tree over pairwise intersection sizes (Kruskal,
  // deterministic tie-break by index pair); zero-weight edges allowed so a
  // disconnected moral graph still yields one tree
  int n = static_cast<int>(ct.cliques.size());
  struct E {
    int w, a, b;
  };
  std::vector<E> es;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) {
      std::vector<VarId> inter;
      std::set_intersection(ct.cliques[a].vars.begin(), ct.cliques[a].vars.end(),
                            ct.cliques[b].vars.begin(), ct.cliques[b].vars.end(),
                            std::back_inserter(inter));
      es.push_back({static_cast<int>(inter.size()), a, b});
    }
  std::stable_sort(es.begin(), es.end(), [](const E& x, const E& y) { return x.w > y.w; });
  std::vector<int> uf(n);
  for (int i = 0; i < n; ++i) uf[i] = i;
  std::function<int(int)> find = [&](int x) { return uf[x] == x ? x : uf[x] = find(uf[x]); };
  std::vector<std::pair<int, int>> tree_edges;
  for (const auto& e : es) {
    int ra = find(e.a), rb = find(e.b);
    if (ra == rb) continue;
    uf[ra] = rb;
    tree_edges.push_back({e.a, e.b});
  }

  std::vector<std::vector<int>> adj(n);
  for (auto [a, b] : tree_edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }

  auto orient = [&](int root) {
    for (auto& c : ct.cliques) {
      c.parent = -1;
      c.children.clear();
      c.sep.clear();
    }
    std::vector<char> seen(n, 0);
    std::queue<int> q;
    q.push(root);
    seen[root] = 1;
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (int w : adj[u]) {
        if (seen[w]) continue;
        seen[w] = 1;
        ct.cliques[w].parent = u;
        ct.cliques[u].children.push_back(w);
        std::set_intersection(ct.cliques[w].vars.begin(), ct.cliques[w].vars.end(),
                              ct.cliques[u].vars.begin(), ct.cliques[u].vars.end(),
                              std::back_inserter(ct.cliques[w].sep));
        q.push(w);
      }
    }
  };

  // strong root: prefer the clique created by the last elimination step,
  // fall back to scanning every clique
  int candidate = 0;
  {
    const auto& last = ecliques.back();
    for (int c = 0; c < n; ++c)
      if (std::includes(ct.cliques[c].vars.begin(), ct.cliques[c].vars.end(), last.begin(),
                        last.end())) {
        candidate = c;
        break;
      }
  }
  orient(candidate);
  std::vector<int> candidates;
  candidates.push_back(candidate);
  for (int c = 0; c < n; ++c)
    if (c != candidate) candidates.push_back(c);
  ct.root = -1;
  for (int c : candidates) {
    if (ct.check_strong_root(net, c)) {
      ct.root = c;
      break;
    }
  }
  if (ct.root < 0)
    throw StrongRootViolation("no strong root exists for the constructed tree");
  orient(ct.root);

  // assign every non-CD CPD to the lowest-index clique containing its family
  auto assign = [&](VarId child, const std::vector<VarId>& parents) -> int {
    std::vector<VarId> fam = parents;
    fam.push_back(child);
    std::sort(fam.begin(), fam.end());
    for (int c = 0; c < n; ++c)
      if (ct.contains_all(c, fam)) return c;
    throw StrongRootViolation("family of " + net.var(child).name +
                              " not preserved by the clique tree");
  };
  for (std::size_t i = 0; i < net.tables.size(); ++i)
    ct.cliques[assign(net.tables[i].child, net.tables[i].parents)].table_cpds.push_back(i);
  for (std::size_t i = 0; i < net.clgs.size(); ++i) {
    std::vector<VarId> ps = net.clgs[i].dparents;
    ps.insert(ps.end(), net.clgs[i].cparents.begin(), net.clgs[i].cparents.end());
    ct.cliques[assign(net.clgs[i].child, ps)].clg_cpds.push_back(i);
  }

  // designated clique per CD-carrying component
  for (size_t i = 0; i < ct.components.size(); ++i) {
    if (ct.component_cds[i].empty()) continue;
    int chosen = -1;
    for (int c = 0; c < n && chosen < 0; ++c)
      if (ct.contains_all(c, seeds[i])) chosen = c;
    if (chosen < 0)
      throw StrongRootViolation("designated clique for a CD component was not preserved");
    ct.designated[static_cast<int>(i)] = chosen;
  }
  return ct;
}

inline std::string dump_tree(const Network& net, const CliqueTree& ct) {
  std::ostringstream os;
  auto names = [&](const std::vector<VarId>& vs) {
    std::string s;
    for (VarId v : vs) s += (s.empty() ? "" : " ") + net.var(v).name;
    return s.empty() ? "-" : s;
  };
  os << "cliques: " << ct.cliques.size() << "\n";
  os << "root: " << ct.root << "\n";
  os << "mode: " << (ct.mode == TreeOptions::Mode::Exact ? "exact" : "approximate") << "\n";
  for (int c = 0; c < static_cast<int>(ct.cliques.size()); ++c) {
    const auto& cl = ct.cliques[c];
    os << "clique " << c << ": {" << names(cl.vars) << "}";
    if (cl.parent >= 0) os << "  parent " << cl.parent << "  sep {" << names(cl.sep) << "}";
    os << "\n";
  }
  for (const auto& [comp, cl] : ct.designated) {
    os << "designated clique for component {" << names(ct.components[comp]) << "}: " << cl
       << "  (cd cpds:";
    for (std::size_t s : ct.component_cds[comp])
      os << " " << net.var(net.softmaxes[s].child).name;
    os << ")\n";
  }
  return os.str();
}

}  // namespace hybridbn
