#pragma once

// Binary-variable factor graphs: potential tables, assignments, evaluation.
//
// Tables use a little-endian dense layout: for a scope v_0 < v_1 < ... the
// entry for x_alpha lives at index sum_j x_{v_j} * 2^j.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bethe/errors.hpp"
#include "bethe/random.hpp"

namespace bethe {

/// A point of {0,1}^n packed into one machine word (n <= 64).
class Assignment {
 public:
  static constexpr std::size_t kMaxBits = 64;

  Assignment() = default;

  explicit Assignment(std::size_t size, std::uint64_t bits = 0) : size_(size) {
    if (size > kMaxBits) {
      throw DimensionError("assignment of " + std::to_string(size) +
                           " bits exceeds the 64-bit packing");
    }
    bits_ = bits & mask();
  }

  Assignment(std::initializer_list<int> bits) : Assignment(bits.size()) {
    std::size_t j = 0;
    for (int b : bits) set(j++, b != 0);
  }

  std::size_t size() const { return size_; }
  std::uint64_t bits() const { return bits_; }

  bool operator[](std::size_t j) const { return (bits_ >> j) & 1u; }

  void set(std::size_t j, bool v) {
    if (v) {
      bits_ |= std::uint64_t{1} << j;
    } else {
      bits_ &= ~(std::uint64_t{1} << j);
    }
  }

  int count() const { return std::popcount(bits_); }

  std::uint64_t mask() const {
    return size_ == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << size_) - 1);
  }

  friend bool operator==(const Assignment&, const Assignment&) = default;

  std::string to_string() const {
    std::string s = "(";
    for (std::size_t j = 0; j < size_; ++j) {
      if (j) s += ',';
      s += (*this)[j] ? '1' : '0';
    }
    return s + ")";
  }

 private:
  std::uint64_t bits_ = 0;
  std::size_t size_ = 0;
};

/// Little-endian index of the bits x_alpha for a scope of the same length.
inline std::size_t table_index(std::span<const std::size_t> scope,
                               std::span<const int> bits) {
  if (scope.size() != bits.size()) {
    throw DimensionError("scope has " + std::to_string(scope.size()) +
                         " variables but " + std::to_string(bits.size()) +
                         " bits were given");
  }
  std::size_t index = 0;
  for (std::size_t j = 0; j < bits.size(); ++j) {
    if (bits[j] != 0) index |= std::size_t{1} << j;
  }
  return index;
}

/// Inverse of table_index for a table of the given arity.
inline Assignment table_bits(std::size_t index, std::size_t arity) {
  return Assignment(arity, index);
}

/// Nonnegative function on {0,1}^arity stored densely.
class PotentialTable {
 public:
  static constexpr std::size_t kMaxArity = 30;

  PotentialTable() : PotentialTable(0, {1.0}) {}

  PotentialTable(std::size_t arity, std::vector<double> values)
      : arity_(arity), values_(std::move(values)) {
    if (arity > kMaxArity) {
      throw CapacityError("table arity " + std::to_string(arity) +
                          " exceeds " + std::to_string(kMaxArity));
    }
    if (values_.size() != (std::size_t{1} << arity)) {
      throw DimensionError("table of arity " + std::to_string(arity) +
                           " needs " + std::to_string(std::size_t{1} << arity) +
                           " entries, got " + std::to_string(values_.size()));
    }
    for (double v : values_) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw DomainError("potential entries must be finite and >= 0");
      }
    }
  }

  /// Arity inferred from the number of entries.
  static PotentialTable from_values(std::vector<double> values) {
    const std::size_t size = values.size();
    if (size == 0 || !std::has_single_bit(size)) {
      throw DimensionError("table length " + std::to_string(size) +
                           " is not a power of two");
    }
    return PotentialTable(static_cast<std::size_t>(std::countr_zero(size)),
                          std::move(values));
  }

  static PotentialTable constant(std::size_t arity, double value) {
    return PotentialTable(arity,
                          std::vector<double>(std::size_t{1} << arity, value));
  }

  std::size_t arity() const { return arity_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }

  double operator[](std::size_t index) const { return values_[index]; }
  double at(const Assignment& x) const {
    if (x.size() != arity_) {
      throw DimensionError("assignment length does not match table arity");
    }
    return values_[x.bits()];
  }
  double log_value(std::size_t index) const {
    const double v = values_[index];
    return v > 0.0 ? std::log(v)
                   : -std::numeric_limits<double>::infinity();
  }

  double sum() const {
    double s = 0.0;
    for (double v : values_) s += v;
    return s;
  }

  friend bool operator==(const PotentialTable&,
                         const PotentialTable&) = default;

 private:
  std::size_t arity_;
  std::vector<double> values_;
};

/// Reorders table axes: axis j of the result is axis order[j] of the input.
inline PotentialTable permute_axes(const PotentialTable& t,
                                   std::span<const std::size_t> order) {
  const std::size_t m = t.arity();
  if (order.size() != m) throw DimensionError("axis order length mismatch");
  std::vector<double> out(t.size());
  for (std::size_t idx = 0; idx < t.size(); ++idx) {
    std::size_t src = 0;
    for (std::size_t j = 0; j < m; ++j) {
      if ((idx >> j) & 1u) src |= std::size_t{1} << order[j];
    }
    out[idx] = t[src];
  }
  return PotentialTable(m, std::move(out));
}

struct Factor {
  std::vector<std::size_t> scope;
  PotentialTable table;

  friend bool operator==(const Factor&, const Factor&) = default;
};

/// One variable-factor edge of the factor graph.
struct Incidence {
  std::size_t factor;
  std::size_t position;  // slot within the factor's scope
  std::size_t variable;
};

/// f(x) = prod_i phi_i(x_i) prod_alpha psi_alpha(x_alpha) over binary x.
/// Immutable after construction.
class FactorGraph {
 public:
  FactorGraph() = default;

  FactorGraph(std::size_t n, std::vector<PotentialTable> unary,
              std::vector<Factor> factors)
      : n_(n), unary_(std::move(unary)), factors_(std::move(factors)) {
    if (unary_.size() != n_) {
      throw DimensionError("expected " + std::to_string(n_) +
                           " unary tables, got " +
                           std::to_string(unary_.size()));
    }
    for (const auto& u : unary_) {
      if (u.arity() != 1) throw DimensionError("unary tables must have arity 1");
    }
    for (std::size_t a = 0; a < factors_.size(); ++a) {
      const auto& f = factors_[a];
      if (f.scope.empty()) {
        throw StructureError("factor " + std::to_string(a) +
                             " has an empty scope");
      }
      for (std::size_t j = 0; j < f.scope.size(); ++j) {
        if (f.scope[j] >= n_) {
          throw StructureError("factor " + std::to_string(a) +
                               " references variable " +
                               std::to_string(f.scope[j]) + " outside [0, " +
                               std::to_string(n_) + ")");
        }
        if (j > 0 && f.scope[j] <= f.scope[j - 1]) {
          throw StructureError("factor " + std::to_string(a) +
                               " scope is not strictly increasing");
        }
      }
      if (f.table.arity() != f.scope.size()) {
        throw DimensionError("factor " + std::to_string(a) +
                             " table arity does not match its scope");
      }
    }
    for (std::size_t a = 0; a < factors_.size(); ++a) {
      for (std::size_t j = 0; j < factors_[a].scope.size(); ++j) {
        incidences_.push_back({a, j, factors_[a].scope[j]});
      }
    }
  }

  /// n variables with phi_i = [1,1] and no factors.
  static FactorGraph uniform(std::size_t n) {
    return FactorGraph(n, std::vector<PotentialTable>(
                              n, PotentialTable::constant(1, 1.0)),
                       {});
  }

  std::size_t num_variables() const { return n_; }
  std::size_t num_factors() const { return factors_.size(); }
  const std::vector<PotentialTable>& unary() const { return unary_; }
  const PotentialTable& unary(std::size_t i) const { return unary_[i]; }
  const std::vector<Factor>& factors() const { return factors_; }
  const Factor& factor(std::size_t a) const { return factors_[a]; }

  /// Incidences in canonical order: factors in graph order, scope ascending.
  const std::vector<Incidence>& incidences() const { return incidences_; }

  /// Index of x_alpha inside factor a's table.
  std::size_t local_index(std::size_t a, const Assignment& x) const {
    const auto& scope = factors_[a].scope;
    std::size_t index = 0;
    for (std::size_t j = 0; j < scope.size(); ++j) {
      if (x[scope[j]]) index |= std::size_t{1} << j;
    }
    return index;
  }

  friend bool operator==(const FactorGraph& a, const FactorGraph& b) {
    return a.n_ == b.n_ && a.unary_ == b.unary_ && a.factors_ == b.factors_;
  }

 private:
  std::size_t n_ = 0;
  std::vector<PotentialTable> unary_;
  std::vector<Factor> factors_;
  std::vector<Incidence> incidences_;
};

inline void require_length(const FactorGraph& g, const Assignment& x) {
  if (x.size() != g.num_variables()) {
    throw DimensionError("assignment has " + std::to_string(x.size()) +
                         " bits, model has " +
                         std::to_string(g.num_variables()) + " variables");
  }
}

inline double evaluate(const FactorGraph& g, const Assignment& x) {
  require_length(g, x);
  double value = 1.0;
  for (std::size_t i = 0; i < g.num_variables(); ++i) {
    value *= g.unary(i)[x[i] ? 1 : 0];
  }
  for (std::size_t a = 0; a < g.num_factors(); ++a) {
    value *= g.factor(a).table[g.local_index(a, x)];
  }
  return value;
}

/// log f(x); -inf exactly when some selected entry is zero.
inline double log_evaluate(const FactorGraph& g, const Assignment& x) {
  require_length(g, x);
  double value = 0.0;
  for (std::size_t i = 0; i < g.num_variables(); ++i) {
    value += g.unary(i).log_value(x[i] ? 1 : 0);
  }
  for (std::size_t a = 0; a < g.num_factors(); ++a) {
    value += g.factor(a).table.log_value(g.local_index(a, x));
  }
  return value;
}

/// Pairwise model whose factors are log-supermodular by construction.
///
/// Log-entries are uniform in [-beta, beta]; the diagonal (0,0),(1,1) then
/// receives whatever lift is needed to close the supermodularity gap plus a
/// boost drawn from [0, beta]. Unary log-potentials are uniform in
/// [-beta, beta].
inline FactorGraph random_attractive_pairwise(
    std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> edges,
    double beta, std::uint64_t seed) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw DomainError("strength must be finite and >= 0");
  }
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> sym(-beta, beta);
  std::uniform_real_distribution<double> boost_dist(0.0, beta);

  std::vector<PotentialTable> unary;
  unary.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double l0 = beta > 0 ? sym(rng) : 0.0;
    const double l1 = beta > 0 ? sym(rng) : 0.0;
    unary.emplace_back(1, std::vector<double>{std::exp(l0), std::exp(l1)});
  }

  std::vector<Factor> factors;
  factors.reserve(edges.size());
  for (auto [i, j] : edges) {
    if (i == j || i >= n || j >= n) {
      throw StructureError("invalid edge (" + std::to_string(i) + "," +
                           std::to_string(j) + ") for " + std::to_string(n) +
                           " variables");
    }
    if (i > j) std::swap(i, j);
    // entries indexed (x_i, x_j) -> x_i + 2 x_j
    double l00 = 0, l10 = 0, l01 = 0, l11 = 0, boost = 0;
    if (beta > 0) {
      l00 = sym(rng);
      l10 = sym(rng);
      l01 = sym(rng);
      l11 = sym(rng);
      boost = boost_dist(rng);
    }
    const double deficit = std::max(0.0, (l10 + l01) - (l00 + l11));
    const double lift = 0.5 * (deficit + boost);
    l00 += lift;
    l11 += lift;
    factors.push_back(
        {{i, j},
         PotentialTable(2, {std::exp(l00), std::exp(l10), std::exp(l01),
                            std::exp(l11)})});
  }
  return FactorGraph(n, std::move(unary), std::move(factors));
}

inline FactorGraph random_attractive_pairwise(
    std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
    double beta, std::uint64_t seed) {
  return random_attractive_pairwise(
      n, std::span<const std::pair<std::size_t, std::size_t>>(edges), beta,
      seed);
}

}  // namespace bethe
