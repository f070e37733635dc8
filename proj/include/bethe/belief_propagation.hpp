#pragma once

// Synchronous (flooding) sum-product with damping on a binary factor graph.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "bethe/core.hpp"
#include "bethe/errors.hpp"
#include "bethe/pseudomarginals.hpp"
#include "bethe/random.hpp"

namespace bethe {

using Message = std::array<double, 2>;

/// Messages indexed by incidence (see FactorGraph::incidences).
struct MessageSet {
  std::vector<Message> to_factor;    // m_{i -> alpha}
  std::vector<Message> to_variable;  // m_{alpha -> i}

  static MessageSet uniform(const FactorGraph& g) {
    const std::size_t m = g.incidences().size();
    return {std::vector<Message>(m, {0.5, 0.5}),
            std::vector<Message>(m, {0.5, 0.5})};
  }

  /// Entries uniform in (0, 1], then normalized.
  static MessageSet random(const FactorGraph& g, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto draw = [&] {
      const double a = 1.0 - u(rng);
      const double b = 1.0 - u(rng);
      return Message{a / (a + b), b / (a + b)};
    };
    MessageSet ms;
    const std::size_t m = g.incidences().size();
    for (std::size_t e = 0; e < m; ++e) ms.to_factor.push_back(draw());
    for (std::size_t e = 0; e < m; ++e) ms.to_variable.push_back(draw());
    return ms;
  }
};

struct BpOptions {
  double damping = 0.5;
  double tol = 1e-10;
  std::size_t max_iter = 10'000;
};

struct BpResult {
  MessageSet messages;
  PseudoMarginals beliefs;
  bool converged = false;
  std::size_t iterations = 0;
  double residual = 0.0;  // max message change in the last iteration
};

namespace detail {

inline Message normalized(double a, double b, const char* what) {
  const double s = a + b;
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw DegenerateError(std::string("all-zero ") + what +
                          " message (conflicting hard constraints)");
  }
  return {a / s, b / s};
}

inline PseudoMarginals beliefs_from(const FactorGraph& g, const MessageSet& ms) {
  const auto& incs = g.incidences();
  PseudoMarginals tau;
  tau.nodes.resize(g.num_variables());
  for (std::size_t i = 0; i < g.num_variables(); ++i) {
    tau.nodes[i] = {g.unary(i)[0], g.unary(i)[1]};
  }
  for (std::size_t e = 0; e < incs.size(); ++e) {
    auto& b = tau.nodes[incs[e].variable];
    b[0] *= ms.to_variable[e][0];
    b[1] *= ms.to_variable[e][1];
  }
  for (auto& b : tau.nodes) b = normalized(b[0], b[1], "node belief");

  tau.factors.resize(g.num_factors());
  std::size_t e0 = 0;
  for (std::size_t a = 0; a < g.num_factors(); ++a) {
    const auto& f = g.factor(a);
    auto& ba = tau.factors[a];
    ba.resize(f.table.size());
    double total = 0.0;
    for (std::size_t idx = 0; idx < ba.size(); ++idx) {
      double v = f.table[idx];
      for (std::size_t j = 0; j < f.scope.size(); ++j) {
        v *= ms.to_factor[e0 + j][(idx >> j) & 1u];
      }
      ba[idx] = v;
      total += v;
    }
    if (!(total > 0.0)) {
      throw DegenerateError("factor " + std::to_string(a) +
                            " belief vanishes (conflicting hard constraints)");
    }
    for (double& v : ba) v /= total;
    e0 += f.scope.size();
  }
  return tau;
}

}  // namespace detail

/// Runs sum-product from `init`. Converged iff the max absolute message change
/// in an iteration drops below tol; beliefs come from the final messages.
inline BpResult run_bp(const FactorGraph& g, MessageSet init,
                       const BpOptions& opts = {}) {
  if (!(opts.damping >= 0.0 && opts.damping < 1.0)) {
    throw DomainError("damping must lie in [0, 1)");
  }
  if (!(opts.tol > 0.0)) throw DomainError("tolerance must be positive");
  const auto& incs = g.incidences();
  const std::size_t m = incs.size();
  if (init.to_factor.size() != m || init.to_variable.size() != m) {
    throw DimensionError("message set does not match the model's incidences");
  }

  // incidences grouped by variable, and the first incidence of each factor
  std::vector<std::vector<std::size_t>> by_variable(g.num_variables());
  for (std::size_t e = 0; e < m; ++e) by_variable[incs[e].variable].push_back(e);
  std::vector<std::size_t> first(g.num_factors(), 0);
  for (std::size_t a = 1; a < g.num_factors(); ++a) {
    first[a] = first[a - 1] + g.factor(a - 1).scope.size();
  }

  BpResult result;
  MessageSet cur = std::move(init);
  MessageSet next = cur;
  const double keep = opts.damping;
  const double take = 1.0 - opts.damping;

  while (result.iterations < opts.max_iter) {
    ++result.iterations;
    double delta = 0.0;

    for (std::size_t e = 0; e < m; ++e) {
      const std::size_t i = incs[e].variable;
      double a = g.unary(i)[0];
      double b = g.unary(i)[1];
      for (std::size_t other : by_variable[i]) {
        if (other == e) continue;
        a *= cur.to_variable[other][0];
        b *= cur.to_variable[other][1];
      }
      next.to_factor[e] = detail::normalized(a, b, "variable-to-factor");
    }

    for (std::size_t fa = 0; fa < g.num_factors(); ++fa) {
      const auto& f = g.factor(fa);
      const std::size_t arity = f.scope.size();
      for (std::size_t j = 0; j < arity; ++j) {
        double out[2] = {0.0, 0.0};
        for (std::size_t idx = 0; idx < f.table.size(); ++idx) {
          double v = f.table[idx];
          if (v == 0.0) continue;
          for (std::size_t l = 0; l < arity; ++l) {
            if (l != j) v *= cur.to_factor[first[fa] + l][(idx >> l) & 1u];
          }
          out[(idx >> j) & 1u] += v;
        }
        next.to_variable[first[fa] + j] =
            detail::normalized(out[0], out[1], "factor-to-variable");
      }
    }

    for (std::size_t e = 0; e < m; ++e) {
      for (int x = 0; x < 2; ++x) {
        auto& nf = next.to_factor[e][x];
        nf = take * nf + keep * cur.to_factor[e][x];
        delta = std::max(delta, std::abs(nf - cur.to_factor[e][x]));
        auto& nv = next.to_variable[e][x];
        nv = take * nv + keep * cur.to_variable[e][x];
        delta = std::max(delta, std::abs(nv - cur.to_variable[e][x]));
      }
    }
    std::swap(cur, next);
    result.residual = delta;
    if (delta < opts.tol) {
      result.converged = true;
      break;
    }
  }
  result.beliefs = detail::beliefs_from(g, cur);
  result.messages = std::move(cur);
  return result;
}

inline BpResult run_bp(const FactorGraph& g, std::uint64_t seed,
                       const BpOptions& opts = {}) {
  return run_bp(g, MessageSet::random(g, seed), opts);
}

}  // namespace bethe
