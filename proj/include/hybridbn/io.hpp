#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "hybridbn/errors.hpp"
#include "hybridbn/model.hpp"

namespace hybridbn {

using nlohmann::json;

namespace detail {

inline VarId require_var(const Network& net, const std::string& name, const char* ctx) {
  auto id = net.id_of(name);
  if (!id) throw ParseError(std::string(ctx) + ": unknown variable '" + name + "'");
  return *id;
}

inline std::vector<VarId> var_list(const Network& net, const json& j, const char* ctx) {
  std::vector<VarId> out;
  for (const auto& e : j) out.push_back(require_var(net, e.get<std::string>(), ctx));
  return out;
}

inline std::vector<double> prob_row(const json& j, const std::string& ctx) {
  std::vector<double> row = j.get<std::vector<double>>();
  double s = 0.0;
  for (double p : row) {
    if (p < 0.0) throw ParseError(ctx + ": negative probability");
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-9)
    throw ParseError(ctx + ": probabilities sum to " + std::to_string(s) + ", not 1");
  for (double& p : row) p /= s;
  return row;
}

inline Feature parse_feature(const Network& net, const SoftmaxCPD& cpd, const json& j,
                             const std::string& ctx) {
  Feature f;
  for (const auto& jt : j) {
    FeatureTerm t;
    t.coeff = jt.value("coeff", 1.0);
    if (jt.contains("powers")) {
      for (const auto& [name, exp] : jt.at("powers").items()) {
        VarId v = require_var(net, name, ctx.c_str());
        auto it = std::find(cpd.cparents.begin(), cpd.cparents.end(), v);
        if (it == cpd.cparents.end())
          throw ParseError(ctx + ": feature references non-parent '" + name + "'");
        t.powers.push_back({static_cast<int>(it - cpd.cparents.begin()), exp.get<int>()});
      }
    }
    f.terms.push_back(std::move(t));
  }
  return f;
}

}  // namespace detail

inline Network network_from_json(const json& doc) {
  Network net;
  if (!doc.contains("variables") || !doc.contains("cpds"))
    throw ParseError("network file needs top-level 'variables' and 'cpds'");
  for (const auto& jv : doc.at("variables")) {
    Variable v;
    v.id = static_cast<VarId>(net.variables.size());
    v.name = jv.at("name").get<std::string>();
    if (net.id_of(v.name) && *net.id_of(v.name) != v.id)
      throw ParseError("duplicate variable name '" + v.name + "'");
    std::string kind = jv.at("kind").get<std::string>();
    if (kind == "discrete") {
      v.kind = VarKind::Discrete;
      v.states = jv.at("states").get<std::vector<std::string>>();
      if (v.card() < 2)
        throw ParseError("variable '" + v.name + "': discrete needs >= 2 states");
    } else if (kind == "continuous") {
      v.kind = VarKind::Continuous;
    } else {
      throw ParseError("variable '" + v.name + "': unknown kind '" + kind + "'");
    }
    net.variables.push_back(std::move(v));
  }
  for (const auto& jc : doc.at("cpds")) {
    std::string kind = jc.at("kind").get<std::string>();
    std::string child_name = jc.at("child").get<std::string>();
    VarId child = detail::require_var(net, child_name, "cpd");
    if (net.cpd_of.count(child))
      throw ParseError("variable '" + child_name + "' has two CPDs");
    std::string ctx = "cpd for '" + child_name + "'";
    if (kind == "table") {
      DiscreteTableCPD cpd;
      cpd.child = child;
      if (jc.contains("parents"))
        cpd.parents = detail::var_list(net, jc.at("parents"), ctx.c_str());
      for (const auto& jr : jc.at("rows")) cpd.rows.push_back(detail::prob_row(jr, ctx));
      net.cpd_of[child] = {CPDKind::Table, net.tables.size()};
      net.tables.push_back(std::move(cpd));
    } else if (kind == "clg") {
      CLGCPD cpd;
      cpd.child = child;
      if (jc.contains("discrete_parents"))
        cpd.dparents = detail::var_list(net, jc.at("discrete_parents"), ctx.c_str());
      if (jc.contains("continuous_parents"))
        cpd.cparents = detail::var_list(net, jc.at("continuous_parents"), ctx.c_str());
      for (const auto& jr : jc.at("rows")) {
        CLGCPD::Row r;
        r.intercept = jr.at("intercept").get<double>();
        if (jr.contains("weights")) r.weights = jr.at("weights").get<std::vector<double>>();
        r.variance = jr.at("variance").get<double>();
        if (r.variance <= 0.0) throw ParseError(ctx + ": variance must be positive");
        if (r.weights.size() != cpd.cparents.size())
          throw ParseError(ctx + ": weight length != continuous parent count");
        cpd.rows.push_back(std::move(r));
      }
      net.cpd_of[child] = {CPDKind::CLG, net.clgs.size()};
      net.clgs.push_back(std::move(cpd));
    } else if (kind == "softmax") {
      SoftmaxCPD cpd;
      cpd.child = child;
      if (jc.contains("discrete_parents"))
        cpd.dparents = detail::var_list(net, jc.at("discrete_parents"), ctx.c_str());
      if (jc.contains("continuous_parents"))
        cpd.cparents = detail::var_list(net, jc.at("continuous_parents"), ctx.c_str());
      if (jc.contains("features")) {
        for (const auto& jf : jc.at("features"))
          cpd.features.push_back(detail::parse_feature(net, cpd, jf, ctx));
      } else {
        for (size_t i = 0; i < cpd.cparents.size(); ++i)
          cpd.features.push_back(Feature::identity(static_cast<int>(i)));
      }
      int m = net.card(child);
      for (const auto& jb : jc.at("blocks")) {
        SoftmaxCPD::Block b;
        b.bias = jb.at("bias").get<std::vector<double>>();
        auto w = jb.at("weights").get<std::vector<std::vector<double>>>();
        if (static_cast<int>(b.bias.size()) != m || static_cast<int>(w.size()) != m)
          throw ParseError(ctx + ": block needs one bias/weight row per child state");
        b.weights = Matrix(m, cpd.features.size());
        for (int i = 0; i < m; ++i) {
          if (w[i].size() != cpd.features.size())
            throw ParseError(ctx + ": weight row length != feature count");
          for (size_t f = 0; f < cpd.features.size(); ++f) b.weights(i, f) = w[i][f];
        }
        cpd.blocks.push_back(std::move(b));
      }
      net.cpd_of[child] = {CPDKind::Softmax, net.softmaxes.size()};
      net.softmaxes.push_back(std::move(cpd));
    } else {
      throw ParseError(ctx + ": unknown cpd kind '" + kind + "'");
    }
  }
  net.topological_order();  // propagates CycleError naming the cycle
  auto violations = validate_network(net);
  if (!violations.empty()) {
    std::string msg = "network invalid:";
    for (const auto& v : violations) msg += "\n  - " + v;
    throw ValidationError(msg);
  }
  return net;
}

inline json network_to_json(const Network& net) {
  json doc;
  doc["variables"] = json::array();
  for (const auto& v : net.variables) {
    json jv;
    jv["name"] = v.name;
    if (v.kind == VarKind::Discrete) {
      jv["kind"] = "discrete";
      jv["states"] = v.states;
    } else {
      jv["kind"] = "continuous";
    }
    doc["variables"].push_back(jv);
  }
  doc["cpds"] = json::array();
  auto names = [&](const std::vector<VarId>& vs) {
    std::vector<std::string> out;
    for (VarId v : vs) out.push_back(net.var(v).name);
    return out;
  };
  // emit in child id order for stable files
  for (const auto& v : net.variables) {
    auto it = net.cpd_of.find(v.id);
    if (it == net.cpd_of.end()) continue;
    json jc;
    if (it->second.kind == CPDKind::Table) {
      const auto& c = net.tables[it->second.index];
      jc["kind"] = "table";
      jc["child"] = v.name;
      jc["parents"] = names(c.parents);
      jc["rows"] = c.rows;
    } else if (it->second.kind == CPDKind::CLG) {
      const auto& c = net.clgs[it->second.index];
      jc["kind"] = "clg";
      jc["child"] = v.name;
      jc["discrete_parents"] = names(c.dparents);
      jc["continuous_parents"] = names(c.cparents);
      jc["rows"] = json::array();
      for (const auto& r : c.rows)
        jc["rows"].push_back(
            {{"intercept", r.intercept}, {"weights", r.weights}, {"variance", r.variance}});
    } else {
      const auto& c = net.softmaxes[it->second.index];
      jc["kind"] = "softmax";
      jc["child"] = v.name;
      jc["discrete_parents"] = names(c.dparents);
      jc["continuous_parents"] = names(c.cparents);
      jc["features"] = json::array();
      for (const auto& f : c.features) {
        json jf = json::array();
        for (const auto& t : f.terms) {
          json jt;
          jt["coeff"] = t.coeff;
          json powers = json::object();
          for (auto [p, e] : t.powers) powers[net.var(c.cparents[p]).name] = e;
          jt["powers"] = powers;
          jf.push_back(jt);
        }
        jc["features"].push_back(jf);
      }
      jc["blocks"] = json::array();
      for (const auto& b : c.blocks) {
        json jb;
        jb["bias"] = b.bias;
        jb["weights"] = json::array();
        for (int i = 0; i < b.weights.rows(); ++i) {
          std::vector<double> row(b.weights.cols());
          for (int j = 0; j < b.weights.cols(); ++j) row[j] = b.weights(i, j);
          jb["weights"].push_back(row);
        }
        jc["blocks"].push_back(jb);
      }
    }
    doc["cpds"].push_back(jc);
  }
  return doc;
}

inline Network load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open network file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError("network file " + path + ": " + e.what());
  }
  return network_from_json(doc);
}

// Evidence document: flat map variable name -> state name (or index) for
// discrete, number for continuous.
inline Evidence evidence_from_json(const Network& net, const json& doc) {
  Evidence ev;
  for (const auto& [name, val] : doc.items()) {
    VarId id = detail::require_var(net, name, "evidence");
    const Variable& v = net.var(id);
    if (ev.observed(id)) throw ParseError("evidence: '" + name + "' observed twice");
    if (v.kind == VarKind::Discrete) {
      int st = -1;
      if (val.is_string()) {
        auto it = std::find(v.states.begin(), v.states.end(), val.get<std::string>());
        if (it == v.states.end())
          throw ParseError("evidence: '" + name + "' has no state '" +
                           val.get<std::string>() + "'");
        st = static_cast<int>(it - v.states.begin());
      } else if (val.is_number_integer()) {
        st = val.get<int>();
      } else {
        throw ParseError("evidence: '" + name + "' needs a state name or index");
      }
      if (st < 0 || st >= v.card())
        throw ParseError("evidence: state index out of range for '" + name + "'");
      ev.discrete[id] = st;
    } else {
      if (!val.is_number())
        throw ParseError("evidence: '" + name + "' needs a numeric value");
      ev.continuous[id] = val.get<double>();
    }
  }
  validate_evidence(net, ev);
  return ev;
}

inline Evidence load_evidence(const Network& net, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open evidence file: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError("evidence file " + path + ": " + e.what());
  }
  return evidence_from_json(net, doc);
}

inline Evidence parse_evidence_args(const Network& net, const std::vector<std::string>& args) {
  json doc = json::object();
  for (const auto& a : args) {
    auto eq = a.find('=');
    if (eq == std::string::npos)
      throw ParseError("evidence argument '" + a + "' is not name=value");
    std::string name = a.substr(0, eq);
    std::string val = a.substr(eq + 1);
    auto id = net.id_of(name);
    if (!id) throw ParseError("evidence: unknown variable '" + name + "'");
    if (net.is_discrete(*id)) {
      doc[name] = val;  // state name; numeric states resolved by name first
      const auto& states = net.var(*id).states;
      if (std::find(states.begin(), states.end(), val) == states.end()) {
        try {
          size_t pos = 0;
          int st = std::stoi(val, &pos);
          if (pos == val.size()) doc[name] = st;
        } catch (...) {
        }
      }
    } else {
      try {
        size_t pos = 0;
        double x = std::stod(val, &pos);
        if (pos != val.size()) throw std::invalid_argument("trailing");
        doc[name] = x;
      } catch (...) {
        throw ParseError("evidence: '" + a + "' needs a numeric value");
      }
    }
  }
  return evidence_from_json(net, doc);
}

}  // namespace hybridbn
