#pragma once

// Labeled k-covers of a factor graph.
//
// A cover is given by one permutation of {0..k-1} per incidence (i, alpha):
// copy c of factor alpha attaches to copy perm(c) of variable i. Copy c of
// base variable i is cover variable c*n + i and copy c of base factor a is
// cover factor c*F + a.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "bethe/core.hpp"
#include "bethe/errors.hpp"
#include "bethe/exact.hpp"
#include "bethe/lattice.hpp"
#include "bethe/log_sum_exp.hpp"
#include "bethe/parallel.hpp"
#include "bethe/random.hpp"

namespace bethe {

struct CoverSpec {
  std::size_t k = 1;
  std::vector<std::vector<std::size_t>> perms;  // one per incidence

  static CoverSpec identity(const FactorGraph& g, std::size_t k) {
    std::vector<std::size_t> id(k);
    std::iota(id.begin(), id.end(), std::size_t{0});
    return {k, std::vector<std::vector<std::size_t>>(g.incidences().size(), id)};
  }

  friend bool operator==(const CoverSpec&, const CoverSpec&) = default;
};

/// 64-bit FNV-1a over (k, perms); used to key report rows.
inline std::uint64_t spec_hash(const CoverSpec& spec) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  };
  mix(spec.k);
  for (const auto& p : spec.perms) {
    for (auto v : p) mix(v);
  }
  return h;
}

inline void validate_spec(const FactorGraph& g, const CoverSpec& spec) {
  if (spec.k < 1) throw StructureError("cover fold k must be >= 1");
  if (spec.perms.size() != g.incidences().size()) {
    throw StructureError("cover spec has " + std::to_string(spec.perms.size()) +
                         " permutations, model has " +
                         std::to_string(g.incidences().size()) + " incidences");
  }
  for (std::size_t e = 0; e < spec.perms.size(); ++e) {
    const auto& p = spec.perms[e];
    std::vector<bool> seen(spec.k, false);
    bool ok = p.size() == spec.k;
    for (std::size_t c = 0; ok && c < p.size(); ++c) {
      ok = p[c] < spec.k && !seen[p[c]];
      if (ok) seen[p[c]] = true;
    }
    if (!ok) {
      throw StructureError("permutation " + std::to_string(e) +
                           " is not a bijection on {0.." +
                           std::to_string(spec.k - 1) + "}");
    }
  }
}

struct CoverGraph {
  FactorGraph graph;
  std::vector<std::size_t> variable_map;  // cover variable -> base variable
  std::vector<std::size_t> factor_map;    // cover factor -> base factor
  // For each cover factor, base scope position of each of its scope slots.
  std::vector<std::vector<std::size_t>> base_positions;
  FactorGraph base;
  CoverSpec spec;
};

/// Lifts g along spec. Each cover factor carries its base table, with axes
/// reordered when the copies land out of ascending order.
inline CoverGraph build_cover(const FactorGraph& g, const CoverSpec& spec) {
  validate_spec(g, spec);
  const std::size_t n = g.num_variables();
  const std::size_t nf = g.num_factors();
  const std::size_t k = spec.k;

  // incidence offset of each factor
  std::vector<std::size_t> first_incidence(nf + 1, 0);
  for (std::size_t a = 0; a < nf; ++a) {
    first_incidence[a + 1] = first_incidence[a] + g.factor(a).scope.size();
  }

  CoverGraph h;
  std::vector<PotentialTable> unary;
  unary.reserve(k * n);
  h.variable_map.reserve(k * n);
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      unary.push_back(g.unary(i));
      h.variable_map.push_back(i);
    }
  }

  std::vector<Factor> factors;
  factors.reserve(k * nf);
  h.factor_map.reserve(k * nf);
  h.base_positions.reserve(k * nf);
  std::vector<std::pair<std::size_t, std::size_t>> slots;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t a = 0; a < nf; ++a) {
      const auto& f = g.factor(a);
      slots.clear();
      for (std::size_t j = 0; j < f.scope.size(); ++j) {
        const std::size_t copy = spec.perms[first_incidence[a] + j][c];
        slots.emplace_back(copy * n + f.scope[j], j);
      }
      std::sort(slots.begin(), slots.end());
      std::vector<std::size_t> scope;
      std::vector<std::size_t> order;
      for (const auto& [var, pos] : slots) {
        scope.push_back(var);
        order.push_back(pos);
      }
      const bool in_order = std::is_sorted(order.begin(), order.end());
      factors.push_back({std::move(scope),
                         in_order ? f.table : permute_axes(f.table, order)});
      h.factor_map.push_back(a);
      h.base_positions.push_back(std::move(order));
    }
  }
  h.graph = FactorGraph(k * n, std::move(unary), std::move(factors));
  h.base = g;
  h.spec = spec;
  return h;
}

/// Checks the covering-map conditions directly on the cover's structure: k
/// preimages per base node, every factor copy's scope mapping bijectively onto
/// the base scope with the matching table, and every variable copy's
/// neighborhood mapping bijectively onto the base variable's neighborhood.
inline bool validate_cover(const CoverGraph& h) {
  const auto& g = h.base;
  const auto& cover = h.graph;
  const std::size_t n = g.num_variables();
  const std::size_t nf = g.num_factors();
  const std::size_t k = h.spec.k;
  if (k < 1 || cover.num_variables() != k * n || cover.num_factors() != k * nf ||
      h.variable_map.size() != k * n || h.factor_map.size() != k * nf) {
    return false;
  }

  std::vector<std::size_t> var_copies(n, 0);
  for (std::size_t w = 0; w < k * n; ++w) {
    const std::size_t v = h.variable_map[w];
    if (v >= n || cover.unary(w) != g.unary(v)) return false;
    ++var_copies[v];
  }
  std::vector<std::size_t> factor_copies(nf, 0);
  for (std::size_t b = 0; b < k * nf; ++b) {
    if (h.factor_map[b] >= nf) return false;
    ++factor_copies[h.factor_map[b]];
  }
  if (std::any_of(var_copies.begin(), var_copies.end(),
                  [k](std::size_t c) { return c != k; }) ||
      std::any_of(factor_copies.begin(), factor_copies.end(),
                  [k](std::size_t c) { return c != k; })) {
    return false;
  }

  // factor side
  for (std::size_t b = 0; b < k * nf; ++b) {
    const auto& base_factor = g.factor(h.factor_map[b]);
    const auto& scope = cover.factor(b).scope;
    if (scope.size() != base_factor.scope.size()) return false;
    std::vector<std::size_t> order;
    for (auto w : scope) {
      const auto it = std::find(base_factor.scope.begin(),
                                base_factor.scope.end(), h.variable_map[w]);
      if (it == base_factor.scope.end()) return false;
      order.push_back(static_cast<std::size_t>(it - base_factor.scope.begin()));
    }
    auto sorted = order;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      return false;
    }
    if (cover.factor(b).table != permute_axes(base_factor.table, order)) {
      return false;
    }
  }

  // variable side
  std::vector<std::vector<std::size_t>> base_nbrs(n);
  for (const auto& inc : g.incidences()) base_nbrs[inc.variable].push_back(inc.factor);
  std::vector<std::vector<std::size_t>> cover_nbrs(k * n);
  for (const auto& inc : cover.incidences()) {
    cover_nbrs[inc.variable].push_back(h.factor_map[inc.factor]);
  }
  for (std::size_t w = 0; w < k * n; ++w) {
    auto images = cover_nbrs[w];
    std::sort(images.begin(), images.end());
    if (images != base_nbrs[h.variable_map[w]]) return false;
  }
  return true;
}

namespace detail {

inline constexpr std::uint64_t kMaxEnumeratedCovers = 10'000'000;

inline std::uint64_t factorial(std::size_t k) {
  std::uint64_t f = 1;
  for (std::size_t i = 2; i <= k; ++i) {
    if (f > std::numeric_limits<std::uint64_t>::max() / i) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    f *= i;
  }
  return f;
}

// Permutation of {0..k-1} with lexicographic rank r (Lehmer code).
inline std::vector<std::size_t> unrank_permutation(std::uint64_t r,
                                                   std::size_t k) {
  std::vector<std::size_t> pool(k);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  std::vector<std::size_t> perm;
  perm.reserve(k);
  for (std::size_t i = k; i > 0; --i) {
    const std::uint64_t f = factorial(i - 1);
    const auto idx = static_cast<std::size_t>(r / f);
    r %= f;
    perm.push_back(pool[idx]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(idx));
  }
  return perm;
}

}  // namespace detail

/// (k!)^{#incidences}, saturating at UINT64_MAX.
inline std::uint64_t count_covers(const FactorGraph& g, std::size_t k) {
  const std::uint64_t per = detail::factorial(k);
  std::uint64_t total = 1;
  for (std::size_t e = 0; e < g.incidences().size(); ++e) {
    if (per != 0 && total > std::numeric_limits<std::uint64_t>::max() / per) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    total *= per;
  }
  return total;
}

/// The labeled cover with the given rank; the last incidence varies fastest.
inline CoverSpec cover_from_index(const FactorGraph& g, std::size_t k,
                                  std::uint64_t index) {
  const std::uint64_t per = detail::factorial(k);
  const std::size_t m = g.incidences().size();
  CoverSpec spec{k, std::vector<std::vector<std::size_t>>(m)};
  for (std::size_t e = m; e > 0; --e) {
    spec.perms[e - 1] = detail::unrank_permutation(index % per, k);
    index /= per;
  }
  return spec;
}

/// Iterates every labeled k-cover exactly once.
class CoverEnumerator {
 public:
  CoverEnumerator(const FactorGraph& g, std::size_t k) : g_(g), k_(k) {
    if (k < 1) throw StructureError("cover fold k must be >= 1");
    count_ = count_covers(g, k);
    if (count_ > detail::kMaxEnumeratedCovers) {
      throw CapacityError("enumerating " + std::to_string(k) +
                          "-covers would visit more than 10^7 specs");
    }
  }

  std::uint64_t size() const { return count_; }

  /// Writes the next spec into `out`; false once exhausted.
  bool next(CoverSpec& out) {
    if (next_ >= count_) return false;
    if (next_ == 0) {
      current_ = cover_from_index(g_, k_, 0);
    } else {
      // odometer: advance the last incidence, carrying leftwards
      for (std::size_t e = current_.perms.size(); e > 0; --e) {
        auto& p = current_.perms[e - 1];
        if (std::next_permutation(p.begin(), p.end())) break;
      }
    }
    ++next_;
    out = current_;
    return true;
  }

 private:
  const FactorGraph& g_;
  std::size_t k_;
  std::uint64_t count_ = 0;
  std::uint64_t next_ = 0;
  CoverSpec current_;
};

inline std::vector<CoverSpec> enumerate_covers(const FactorGraph& g,
                                               std::size_t k) {
  CoverEnumerator it(g, k);
  std::vector<CoverSpec> specs;
  specs.reserve(static_cast<std::size_t>(it.size()));
  CoverSpec spec;
  while (it.next(spec)) specs.push_back(spec);
  return specs;
}

/// Independent uniform permutation per incidence.
inline CoverSpec sample_cover(const FactorGraph& g, std::size_t k,
                              std::uint64_t seed) {
  if (k < 1) throw StructureError("cover fold k must be >= 1");
  Rng rng = make_rng(seed);
  CoverSpec spec = CoverSpec::identity(g, k);
  for (auto& p : spec.perms) {
    for (std::size_t i = k; i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(p[i - 1], p[pick(rng)]);
    }
  }
  return spec;
}

struct CoverInequality {
  double log_z_cover = 0.0;   // log Z(H)
  double k_log_z_base = 0.0;  // k log Z(G)
  bool holds = true;
};

inline constexpr double kCoverTol = 1e-9;

/// Z(H) <= Z(G)^k for one cover, given log Z(G). Requires a log-supermodular
/// factorization; a violation of that raises with the lattice witness.
inline CoverInequality verify_cover_inequality(const FactorGraph& g,
                                               const CoverSpec& spec,
                                               double log_z_base,
                                               double tol = kCoverTol) {
  if (auto w = is_log_supermodular_factorization(g); !w.holds) {
    throw NotLogSupermodularError(std::move(w));
  }
  const auto h = build_cover(g, spec);
  CoverInequality r;
  r.log_z_cover = partition_function(h.graph);
  r.k_log_z_base = static_cast<double>(spec.k) * log_z_base;
  r.holds = r.log_z_cover <= r.k_log_z_base + tol;
  return r;
}

inline CoverInequality verify_cover_inequality(const FactorGraph& g,
                                               const CoverSpec& spec) {
  return verify_cover_inequality(g, spec, partition_function(g));
}

enum class CoverAverage { automatic, exhaustive, sampled };

struct CoverSample {
  CoverSpec spec;
  double log_z = 0.0;  // log Z(H)
};

struct CoverSweep {
  std::size_t k = 1;
  bool exhaustive = false;
  std::vector<CoverSample> samples;
};

/// log Z(H) for a set of k-covers: every labeled cover when exhaustive,
/// otherwise `samples` independent draws with cover j seeded by
/// derive_seed(seed, j). `automatic` enumerates whenever the cover count does
/// not exceed `samples`.
inline CoverSweep cover_sweep(const FactorGraph& g, std::size_t k,
                              std::uint64_t samples, std::uint64_t seed,
                              CoverAverage mode = CoverAverage::automatic) {
  if (k < 1) throw StructureError("cover fold k must be >= 1");
  if (samples < 1 && mode != CoverAverage::exhaustive) {
    throw DomainError("need at least one sample");
  }
  if (k * g.num_variables() > kMaxExactVariables) {
    throw CapacityError("cover has " + std::to_string(k * g.num_variables()) +
                        " variables, beyond the exact oracle");
  }
  const std::uint64_t total = count_covers(g, k);
  CoverSweep sweep;
  sweep.k = k;
  sweep.exhaustive = mode == CoverAverage::exhaustive ||
                     (mode == CoverAverage::automatic && total <= samples);
  if (sweep.exhaustive && total > detail::kMaxEnumeratedCovers) {
    throw CapacityError("enumerating " + std::to_string(k) +
                        "-covers would visit more than 10^7 specs");
  }
  const std::uint64_t count = sweep.exhaustive ? total : samples;
  sweep.samples.resize(static_cast<std::size_t>(count));
  parallel_for(sweep.samples.size(), [&](std::size_t j) {
    auto& s = sweep.samples[j];
    s.spec = sweep.exhaustive ? cover_from_index(g, k, j)
                              : sample_cover(g, k, derive_seed(seed, j));
    s.log_z = partition_function(build_cover(g, s.spec).graph);
  });
  return sweep;
}

struct CoverEstimate {
  double log_estimate = 0.0;  // (1/k) log mean_H Z(H)
  double stderr_log = 0.0;    // delta-method s.e. of log_estimate; 0 if exact
  std::uint64_t covers = 0;
  bool exhaustive = false;
};

/// (1/k) log of the mean of Z(H) (the mean is over Z, not log Z). Sampled
/// sweeps get a delta-method standard error; exhaustive ones are exact.
inline CoverEstimate summarize_sweep(const CoverSweep& sweep) {
  const std::size_t count = sweep.samples.size();
  if (count == 0) throw DomainError("empty cover sweep");
  std::vector<double> log_z;
  log_z.reserve(count);
  for (const auto& s : sweep.samples) log_z.push_back(s.log_z);
  const double k = static_cast<double>(sweep.k);
  const double log_mean = log_sum_exp(log_z) - std::log(static_cast<double>(count));

  CoverEstimate est;
  est.covers = count;
  est.exhaustive = sweep.exhaustive;
  est.log_estimate = log_mean / k;
  if (!sweep.exhaustive) {
    if (count < 2 || log_mean == kNegInf) {
      est.stderr_log = std::numeric_limits<double>::quiet_NaN();
    } else {
      // relative spread of Z(H) around its mean
      double ss = 0.0;
      for (double l : log_z) {
        const double r = std::exp(l - log_mean) - 1.0;
        ss += r * r;
      }
      const double var = ss / static_cast<double>(count - 1);
      est.stderr_log = std::sqrt(var / static_cast<double>(count)) / k;
    }
  }
  return est;
}

inline CoverEstimate estimate_bethe_by_covers(
    const FactorGraph& g, std::size_t k, std::uint64_t samples,
    std::uint64_t seed, CoverAverage mode = CoverAverage::automatic) {
  return summarize_sweep(cover_sweep(g, k, samples, seed, mode));
}

}  // namespace bethe
