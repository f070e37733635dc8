#pragma once

// Text formats: model files, graph files, cover specs and pseudomarginals.
// Readers accept JSON; writers print every real with 17 significant digits.

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bethe/core.hpp"
#include "bethe/covers.hpp"
#include "bethe/errors.hpp"
#include "bethe/models.hpp"
#include "bethe/pseudomarginals.hpp"

namespace bethe {

using Json = nlohmann::json;

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline Json parse_text(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // byte offset -> line:column
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(source + ":" + std::to_string(line) + ":" +
                     std::to_string(col) + ": " + e.what());
  }
}

template <typename T>
T field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw ParseError(where + ": missing field \"" + key + "\"");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(where + ": field \"" + key + "\": " + e.what());
  }
}

inline std::string real_list(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += format_real(v[i]);
  }
  return s + "]";
}

template <typename Int>
std::string int_list(const std::vector<Int>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(v[i]);
  }
  return s + "]";
}

}  // namespace detail

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open file");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path + ": cannot write file");
  out << text;
}

// ---- model files: {"n", "unary": [[a,b],...], "factors": [{"scope","table"}]}

inline FactorGraph model_from_json(const Json& j, const std::string& where = "model") {
  const auto n = detail::field<std::size_t>(j, "n", where);
  const auto unary_raw =
      detail::field<std::vector<std::vector<double>>>(j, "unary", where);
  std::vector<PotentialTable> unary;
  for (std::size_t i = 0; i < unary_raw.size(); ++i) {
    if (unary_raw[i].size() != 2) {
      throw ParseError(where + ": unary[" + std::to_string(i) +
                       "] must have two entries");
    }
    unary.emplace_back(1, unary_raw[i]);
  }
  std::vector<Factor> factors;
  if (j.contains("factors")) {
    const auto& fs = j.at("factors");
    if (!fs.is_array()) throw ParseError(where + ": \"factors\" must be a list");
    for (std::size_t a = 0; a < fs.size(); ++a) {
      const std::string fw = where + ": factors[" + std::to_string(a) + "]";
      auto scope = detail::field<std::vector<std::size_t>>(fs[a], "scope", fw);
      auto table = detail::field<std::vector<double>>(fs[a], "table", fw);
      if (table.size() != (std::size_t{1} << scope.size())) {
        throw ParseError(fw + ": table needs 2^|scope| entries");
      }
      const std::size_t arity = scope.size();
      factors.push_back({std::move(scope), PotentialTable(arity, std::move(table))});
    }
  }
  return FactorGraph(n, std::move(unary), std::move(factors));
}

inline FactorGraph parse_model(const std::string& text,
                               const std::string& source = "model") {
  const Json j = detail::parse_text(text, source);
  try {
    return model_from_json(j, source);
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(source + ": " + e.what());
  }
}

inline FactorGraph load_model(const std::string& path) {
  return parse_model(read_file(path), path);
}

inline std::string model_to_text(const FactorGraph& g) {
  std::string s = "{\"n\": " + std::to_string(g.num_variables()) + ", \"unary\": [";
  for (std::size_t i = 0; i < g.num_variables(); ++i) {
    if (i) s += ", ";
    s += detail::real_list({g.unary(i)[0], g.unary(i)[1]});
  }
  s += "], \"factors\": [";
  for (std::size_t a = 0; a < g.num_factors(); ++a) {
    const auto& f = g.factor(a);
    if (a) s += ", ";
    const auto v = f.table.values();
    s += "{\"scope\": " + detail::int_list(f.scope) +
         ", \"table\": " + detail::real_list({v.begin(), v.end()}) + "}";
  }
  return s + "]}";
}

// ---- graph files: {"n", "edges": [[i,j],...], "partition": [A...]}

inline SimpleGraph parse_graph(const std::string& text,
                               const std::string& source = "graph") {
  const Json j = detail::parse_text(text, source);
  SimpleGraph g;
  g.n = detail::field<std::size_t>(j, "n", source);
  const auto edges = detail::field<std::vector<std::vector<std::size_t>>>(j, "edges", source);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (edges[e].size() != 2) {
      throw ParseError(source + ": edges[" + std::to_string(e) +
                       "] must have two endpoints");
    }
    g.edges.emplace_back(edges[e][0], edges[e][1]);
  }
  if (j.contains("partition") && !j.at("partition").is_null()) {
    g.partition = detail::field<std::vector<std::size_t>>(j, "partition", source);
  }
  return g;
}

inline SimpleGraph load_graph(const std::string& path) {
  return parse_graph(read_file(path), path);
}

inline std::string graph_to_text(const SimpleGraph& g) {
  std::string s = "{\"n\": " + std::to_string(g.n) + ", \"edges\": [";
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    if (e) s += ", ";
    s += "[" + std::to_string(g.edges[e].first) + ", " +
         std::to_string(g.edges[e].second) + "]";
  }
  s += "]";
  if (g.partition) s += ", \"partition\": " + detail::int_list(*g.partition);
  return s + "}";
}

// ---- cover specs: {"k", "perms": [[...], ...]} in incidence order

inline Json cover_to_json(const CoverSpec& spec) {
  return Json{{"k", spec.k}, {"perms", spec.perms}};
}

inline CoverSpec cover_from_json(const Json& j, const std::string& where = "cover") {
  CoverSpec spec;
  spec.k = detail::field<std::size_t>(j, "k", where);
  spec.perms = detail::field<std::vector<std::vector<std::size_t>>>(j, "perms", where);
  return spec;
}

inline std::string cover_to_text(const CoverSpec& spec) {
  return cover_to_json(spec).dump();
}

inline CoverSpec parse_cover(const std::string& text,
                             const std::string& source = "cover") {
  return cover_from_json(detail::parse_text(text, source), source);
}

// ---- pseudomarginals: {"nodes": [[a,b],...], "factors": [[...],...]}

inline std::string tau_to_text(const PseudoMarginals& tau) {
  std::string s = "{\"nodes\": [";
  for (std::size_t i = 0; i < tau.nodes.size(); ++i) {
    if (i) s += ", ";
    s += detail::real_list({tau.nodes[i][0], tau.nodes[i][1]});
  }
  s += "], \"factors\": [";
  for (std::size_t a = 0; a < tau.factors.size(); ++a) {
    if (a) s += ", ";
    s += detail::real_list(tau.factors[a]);
  }
  return s + "]}";
}

inline Json tau_to_json(const PseudoMarginals& tau) {
  return Json::parse(tau_to_text(tau));
}

inline PseudoMarginals tau_from_json(const Json& j, const std::string& where = "tau") {
  PseudoMarginals tau;
  const auto nodes = detail::field<std::vector<std::vector<double>>>(j, "nodes", where);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].size() != 2) {
      throw ParseError(where + ": nodes[" + std::to_string(i) +
                       "] must have two entries");
    }
    tau.nodes.push_back({nodes[i][0], nodes[i][1]});
  }
  tau.factors = detail::field<std::vector<std::vector<double>>>(j, "factors", where);
  return tau;
}

inline PseudoMarginals parse_tau(const std::string& text,
                                 const std::string& source = "tau") {
  return tau_from_json(detail::parse_text(text, source), source);
}

}  // namespace bethe
