#pragma once

// Application models: hard-core independent sets, their bipartite flip, and
// the ferromagnetic Ising model.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bethe/core.hpp"
#include "bethe/errors.hpp"

namespace bethe {

using Edge = std::pair<std::size_t, std::size_t>;

struct SimpleGraph {
  std::size_t n = 0;
  std::vector<Edge> edges;
  std::optional<std::vector<std::size_t>> partition;  // side A, if supplied
};

/// Raised for graphs or partitions that do not admit the flip. Carries an odd
/// cycle when the graph itself is not bipartite.
class BipartitionError : public StructureError {
 public:
  BipartitionError(const std::string& what, std::vector<std::size_t> odd_cycle)
      : StructureError(what), odd_cycle_(std::move(odd_cycle)) {}

  const std::vector<std::size_t>& odd_cycle() const { return odd_cycle_; }

 private:
  std::vector<std::size_t> odd_cycle_;
};

namespace detail {

inline void check_simple(std::size_t n, const std::vector<Edge>& edges) {
  std::vector<Edge> seen;
  for (auto [i, j] : edges) {
    if (i >= n || j >= n) {
      throw StructureError("edge (" + std::to_string(i) + "," +
                           std::to_string(j) + ") outside [0, " +
                           std::to_string(n) + ")");
    }
    if (i == j) {
      throw StructureError("self-loop at vertex " + std::to_string(i));
    }
    seen.emplace_back(std::min(i, j), std::max(i, j));
  }
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
    throw StructureError("duplicate edge in a simple graph");
  }
}

inline std::string cycle_string(const std::vector<std::size_t>& cycle) {
  std::string s;
  for (std::size_t v : cycle) {
    if (!s.empty()) s += '-';
    s += std::to_string(v);
  }
  return s;
}

}  // namespace detail

struct TwoColoring {
  std::vector<int> color;               // 0 = side A, 1 = side B
  std::vector<std::size_t> odd_cycle;   // nonempty iff not bipartite

  bool bipartite() const { return odd_cycle.empty(); }
};

/// Breadth-first 2-coloring, rooted at the lowest unvisited vertex (vertex 0
/// first). On failure returns an odd cycle as a closed vertex sequence.
inline TwoColoring two_coloring(std::size_t n, const std::vector<Edge>& edges) {
  std::vector<std::vector<std::size_t>> adj(n);
  for (auto [i, j] : edges) {
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  TwoColoring out;
  out.color.assign(n, -1);
  std::vector<std::size_t> parent(n, n);
  std::vector<std::size_t> depth(n, 0);
  for (std::size_t root = 0; root < n; ++root) {
    if (out.color[root] != -1) continue;
    out.color[root] = 0;
    std::deque<std::size_t> queue{root};
    while (!queue.empty()) {
      const std::size_t u = queue.front();
      queue.pop_front();
      for (std::size_t w : adj[u]) {
        if (out.color[w] == -1) {
          out.color[w] = 1 - out.color[u];
          parent[w] = u;
          depth[w] = depth[u] + 1;
          queue.push_back(w);
        } else if (out.color[w] == out.color[u]) {
          // walk both tree paths up to the common ancestor
          std::vector<std::size_t> left{u};
          std::vector<std::size_t> right{w};
          std::size_t a = u;
          std::size_t b = w;
          while (depth[a] > depth[b]) left.push_back(a = parent[a]);
          while (depth[b] > depth[a]) right.push_back(b = parent[b]);
          while (a != b) {
            left.push_back(a = parent[a]);
            right.push_back(b = parent[b]);
          }
          right.pop_back();
          out.odd_cycle = left;
          out.odd_cycle.insert(out.odd_cycle.end(), right.rbegin(), right.rend());
          out.odd_cycle.push_back(u);
          return out;
        }
      }
    }
  }
  return out;
}

/// I^G(x) = prod_{(i,j) in E} (1 - x_i x_j) as pairwise 0/1 tables.
inline FactorGraph independent_set_model(std::size_t n,
                                         const std::vector<Edge>& edges) {
  detail::check_simple(n, edges);
  std::vector<Factor> factors;
  factors.reserve(edges.size());
  for (auto [i, j] : edges) {
    factors.push_back({{std::min(i, j), std::max(i, j)},
                       PotentialTable(2, {1.0, 1.0, 1.0, 0.0})});
  }
  return FactorGraph(
      n, std::vector<PotentialTable>(n, PotentialTable::constant(1, 1.0)),
      std::move(factors));
}

/// Change of variables y_v = 1 - x_v for every v in `flipped`; reindexes the
/// unary and factor tables, leaving the partition function unchanged.
inline FactorGraph flip_variables(const FactorGraph& g,
                                  const std::vector<bool>& flipped) {
  if (flipped.size() != g.num_variables()) {
    throw DimensionError("flip mask length does not match the model");
  }
  std::vector<PotentialTable> unary;
  for (std::size_t i = 0; i < g.num_variables(); ++i) {
    const auto& u = g.unary(i);
    unary.push_back(flipped[i] ? PotentialTable(1, {u[1], u[0]}) : u);
  }
  std::vector<Factor> factors;
  for (const auto& f : g.factors()) {
    std::size_t mask = 0;
    for (std::size_t j = 0; j < f.scope.size(); ++j) {
      if (flipped[f.scope[j]]) mask |= std::size_t{1} << j;
    }
    std::vector<double> values(f.table.size());
    for (std::size_t idx = 0; idx < values.size(); ++idx) {
      values[idx] = f.table[idx ^ mask];
    }
    factors.push_back({f.scope, PotentialTable(f.table.arity(), std::move(values))});
  }
  return FactorGraph(g.num_variables(), std::move(unary), std::move(factors));
}

namespace detail {

inline std::vector<Edge> pairwise_edges(const FactorGraph& g) {
  std::vector<Edge> edges;
  for (const auto& f : g.factors()) {
    if (f.scope.size() != 2) {
      throw StructureError("bipartite flip needs a pairwise model");
    }
    edges.emplace_back(f.scope[0], f.scope[1]);
  }
  return edges;
}

}  // namespace detail

/// Flips the B side of a supplied bipartition (A, B) of the model's edges.
inline FactorGraph flip_bipartite(const FactorGraph& g,
                                  const std::vector<std::size_t>& part_a,
                                  const std::vector<std::size_t>& part_b) {
  const std::size_t n = g.num_variables();
  const auto edges = detail::pairwise_edges(g);
  std::vector<int> side(n, -1);
  auto assign = [&](const std::vector<std::size_t>& part, int s) {
    for (std::size_t v : part) {
      if (v >= n || side[v] != -1) {
        throw BipartitionError("parts must be disjoint vertex sets within [0, " +
                                   std::to_string(n) + ")",
                               {});
      }
      side[v] = s;
    }
  };
  assign(part_a, 0);
  assign(part_b, 1);
  if (std::find(side.begin(), side.end(), -1) != side.end()) {
    throw BipartitionError("parts do not cover every vertex", {});
  }
  for (auto [i, j] : edges) {
    if (side[i] == side[j]) {
      auto coloring = two_coloring(n, edges);
      if (!coloring.bipartite()) {
        throw BipartitionError("graph is not bipartite; odd cycle " +
                                   detail::cycle_string(coloring.odd_cycle),
                               coloring.odd_cycle);
      }
      throw BipartitionError("edge (" + std::to_string(i) + "," +
                                 std::to_string(j) +
                                 ") lies inside one part of the partition",
                             {});
    }
  }
  std::vector<bool> mask(n);
  for (std::size_t v = 0; v < n; ++v) mask[v] = side[v] == 1;
  return flip_variables(g, mask);
}

/// Discovers the bipartition by 2-coloring from vertex 0 and flips side B.
inline FactorGraph flip_bipartite(const FactorGraph& g) {
  const auto edges = detail::pairwise_edges(g);
  const auto coloring = two_coloring(g.num_variables(), edges);
  if (!coloring.bipartite()) {
    throw BipartitionError("graph is not bipartite; odd cycle " +
                               detail::cycle_string(coloring.odd_cycle),
                           coloring.odd_cycle);
  }
  std::vector<std::size_t> a;
  std::vector<std::size_t> b;
  for (std::size_t v = 0; v < g.num_variables(); ++v) {
    (coloring.color[v] == 0 ? a : b).push_back(v);
  }
  return flip_bipartite(g, a, b);
}

/// Ferromagnetic Ising model on spins s = 2x - 1: psi = exp(J s_i s_j),
/// phi = exp(h s_i). Couplings must be nonnegative.
inline FactorGraph ising_model(std::size_t n, const std::vector<Edge>& edges,
                               const std::vector<double>& couplings,
                               const std::vector<double>& fields) {
  if (couplings.size() != edges.size()) {
    throw DimensionError("one coupling per edge required");
  }
  if (fields.size() != n) throw DimensionError("one field per variable required");
  detail::check_simple(n, edges);
  std::vector<PotentialTable> unary;
  for (double h : fields) {
    if (!std::isfinite(h)) throw DomainError("fields must be finite");
    unary.emplace_back(1, std::vector<double>{std::exp(-h), std::exp(h)});
  }
  std::vector<Factor> factors;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double j = couplings[e];
    if (!(j >= 0.0) || !std::isfinite(j)) {
      throw DomainError("ferromagnetic couplings must be finite and >= 0");
    }
    const double agree = std::exp(j);
    const double disagree = std::exp(-j);
    factors.push_back({{std::min(edges[e].first, edges[e].second),
                        std::max(edges[e].first, edges[e].second)},
                       PotentialTable(2, {agree, disagree, disagree, agree})});
  }
  return FactorGraph(n, std::move(unary), std::move(factors));
}

}  // namespace bethe
