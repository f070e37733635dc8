#pragma once

// Brute-force oracle: log Z(G) and true marginals by full enumeration.

#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <future>
#include <string>
#include <vector>

#include "bethe/core.hpp"
#include "bethe/errors.hpp"
#include "bethe/log_sum_exp.hpp"
#include "bethe/pseudomarginals.hpp"

namespace bethe {

inline constexpr std::size_t kMaxExactVariables = 26;
inline constexpr std::size_t kMaxMarginalVariables = 20;

namespace detail {

// Log-domain tables plus the variable -> (factor, position) adjacency, so the
// Gray-code walk only touches factors that see the flipped bit.
class Enumerator {
 public:
  explicit Enumerator(const FactorGraph& g) : g_(g) {
    const std::size_t n = g.num_variables();
    unary_log_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      unary_log_[i] = {g.unary(i).log_value(0), g.unary(i).log_value(1)};
    }
    factor_log_.resize(g.num_factors());
    for (std::size_t a = 0; a < g.num_factors(); ++a) {
      const auto& t = g.factor(a).table;
      factor_log_[a].resize(t.size());
      for (std::size_t idx = 0; idx < t.size(); ++idx) {
        factor_log_[a][idx] = t.log_value(idx);
      }
    }
    touching_.resize(n);
    for (const auto& inc : g.incidences()) {
      touching_[inc.variable].push_back({inc.factor, inc.position});
    }
  }

  /// Visits every x whose Gray rank lies in [begin, end), calling
  /// visit(x, log f(x)).
  template <typename Visit>
  void walk(std::uint64_t begin, std::uint64_t end, Visit&& visit) const {
    if (begin >= end) return;
    const std::size_t n = g_.num_variables();
    Assignment x(n, begin ^ (begin >> 1));
    std::vector<std::size_t> index(g_.num_factors());
    for (std::size_t a = 0; a < g_.num_factors(); ++a) {
      index[a] = g_.local_index(a, x);
    }
    for (std::uint64_t t = begin;;) {
      double lf = 0.0;
      for (std::size_t i = 0; i < n; ++i) lf += unary_log_[i][x[i] ? 1 : 0];
      for (std::size_t a = 0; a < index.size(); ++a) {
        lf += factor_log_[a][index[a]];
      }
      visit(x, lf);
      if (++t == end) break;
      const auto j = static_cast<std::size_t>(std::countr_zero(t));
      x.set(j, !x[j]);
      for (const auto& [a, pos] : touching_[j]) index[a] ^= std::size_t{1} << pos;
    }
  }

 private:
  struct Slot {
    std::size_t factor;
    std::size_t position;
  };
  const FactorGraph& g_;
  std::vector<std::array<double, 2>> unary_log_;
  std::vector<std::vector<double>> factor_log_;
  std::vector<std::vector<Slot>> touching_;
};

inline constexpr std::size_t kParallelThreshold = 18;
inline constexpr std::uint64_t kChunks = 8;

}  // namespace detail

/// log sum_x f(x). Exactly -inf when f vanishes everywhere.
///
/// Models with at least 18 variables are split into a fixed number of chunks
/// evaluated concurrently; the result does not depend on the thread count.
inline double partition_function(const FactorGraph& g) {
  const std::size_t n = g.num_variables();
  if (n > kMaxExactVariables) {
    throw CapacityError("exact enumeration limited to " +
                        std::to_string(kMaxExactVariables) + " variables, got " +
                        std::to_string(n));
  }
  const detail::Enumerator e(g);
  const std::uint64_t total = std::uint64_t{1} << n;
  if (n < detail::kParallelThreshold) {
    LogSumExp acc;
    e.walk(0, total, [&](const Assignment&, double lf) { acc.add(lf); });
    return acc.value();
  }
  const std::uint64_t chunk = total / detail::kChunks;
  std::vector<std::future<LogSumExp>> parts;
  for (std::uint64_t c = 0; c < detail::kChunks; ++c) {
    parts.push_back(std::async(std::launch::async, [&e, c, chunk] {
      LogSumExp acc;
      e.walk(c * chunk, (c + 1) * chunk,
             [&](const Assignment&, double lf) { acc.add(lf); });
      return acc;
    }));
  }
  LogSumExp acc;
  for (auto& p : parts) acc.merge(p.get());
  return acc.value();
}

/// True marginals of f / Z for every variable and factor.
inline PseudoMarginals exact_marginals(const FactorGraph& g) {
  const std::size_t n = g.num_variables();
  if (n > kMaxMarginalVariables) {
    throw CapacityError("exact marginals limited to " +
                        std::to_string(kMaxMarginalVariables) + " variables");
  }
  const detail::Enumerator e(g);
  const std::uint64_t total = std::uint64_t{1} << n;

  LogSumExp acc;
  e.walk(0, total, [&](const Assignment&, double lf) { acc.add(lf); });
  const double log_z = acc.value();
  if (log_z == kNegInf) {
    throw DegenerateError("partition function is zero; marginals undefined");
  }

  PseudoMarginals tau;
  tau.nodes.assign(n, {0.0, 0.0});
  tau.factors.resize(g.num_factors());
  for (std::size_t a = 0; a < g.num_factors(); ++a) {
    tau.factors[a].assign(g.factor(a).table.size(), 0.0);
  }
  e.walk(0, total, [&](const Assignment& x, double lf) {
    if (lf == kNegInf) return;
    const double p = std::exp(lf - log_z);
    for (std::size_t i = 0; i < n; ++i) tau.nodes[i][x[i] ? 1 : 0] += p;
    for (std::size_t a = 0; a < g.num_factors(); ++a) {
      tau.factors[a][g.local_index(a, x)] += p;
    }
  });
  return tau;
}

}  // namespace bethe
