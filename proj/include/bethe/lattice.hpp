#pragma once

// Boolean-lattice operators and exhaustive checkers for the correlation
// inequalities used by the cover bound: log-supermodularity, the four
// functions theorem, the k-function variant with a log-supermodular left
// side, the product lemma, and weak majorization.
//
// All comparisons are multiplicative (no logarithms) so zero entries are
// handled exactly; "a <= b" is accepted when a - b <= rel_tol * max(a, b).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bethe/core.hpp"
#include "bethe/errors.hpp"

namespace bethe {

inline constexpr double kLatticeRelTol = 1e-9;

/// Outcome of an inequality scan. When violated, `witness` holds the
/// offending assignments and lhs/rhs the compared products (lhs > rhs).
struct LatticeWitness {
  bool holds = true;
  std::vector<Assignment> witness;
  double lhs = 0.0;
  double rhs = 0.0;
  std::optional<std::size_t> factor;  // set by factorization checks

  explicit operator bool() const { return holds; }
};

/// True when lhs exceeds rhs beyond the relative tolerance. 0 <= 0 holds.
inline bool exceeds(double lhs, double rhs, double rel_tol = kLatticeRelTol) {
  return lhs - rhs > rel_tol * std::max(std::abs(lhs), std::abs(rhs));
}

inline void require_same_size(const Assignment& x, const Assignment& y) {
  if (x.size() != y.size()) {
    throw DimensionError("assignments of different lengths " +
                         std::to_string(x.size()) + " and " +
                         std::to_string(y.size()));
  }
}

inline Assignment meet(const Assignment& x, const Assignment& y) {
  require_same_size(x, y);
  return Assignment(x.size(), x.bits() & y.bits());
}

inline Assignment join(const Assignment& x, const Assignment& y) {
  require_same_size(x, y);
  return Assignment(x.size(), x.bits() | y.bits());
}

/// Componentwise i-th largest value (1-based) across the tuple: bit j is set
/// iff at least i of the inputs have bit j set.
inline Assignment order_stat(std::size_t i, std::span<const Assignment> xs) {
  const std::size_t k = xs.size();
  if (i < 1 || i > k) {
    throw DimensionError("order statistic " + std::to_string(i) +
                         " out of range for " + std::to_string(k) + " inputs");
  }
  const std::size_t n = xs[0].size();
  for (const auto& x : xs) require_same_size(x, xs[0]);
  Assignment z(n);
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t ones = 0;
    for (const auto& x : xs) ones += x[j] ? 1 : 0;
    z.set(j, ones >= i);
  }
  return z;
}

inline std::vector<Assignment> order_stats(std::span<const Assignment> xs) {
  std::vector<Assignment> zs;
  zs.reserve(xs.size());
  for (std::size_t i = 1; i <= xs.size(); ++i) zs.push_back(order_stat(i, xs));
  return zs;
}

namespace detail {

inline constexpr std::size_t kMaxScanArity = 20;

// Scans unordered pairs of incomparable points; comparable pairs give equality.
template <typename Violates>
LatticeWitness scan_pairs(const PotentialTable& t, Violates violates) {
  const std::size_t m = t.arity();
  if (m > kMaxScanArity) {
    throw CapacityError("pair scan limited to arity " +
                        std::to_string(kMaxScanArity));
  }
  const std::size_t size = t.size();
  for (std::size_t x = 0; x < size; ++x) {
    for (std::size_t y = x + 1; y < size; ++y) {
      const std::size_t lo = x & y;
      const std::size_t hi = x | y;
      if (lo == x || lo == y) continue;
      const double lhs = t[x] * t[y];
      const double rhs = t[lo] * t[hi];
      if (violates(lhs, rhs)) {
        LatticeWitness w;
        w.holds = false;
        w.witness = {Assignment(m, x), Assignment(m, y)};
        w.lhs = lhs;
        w.rhs = rhs;
        return w;
      }
    }
  }
  return {};
}

}  // namespace detail

/// f(x)f(y) <= f(x meet y) f(x join y) for all x, y.
inline LatticeWitness is_log_supermodular(const PotentialTable& t,
                                          double rel_tol = kLatticeRelTol) {
  return detail::scan_pairs(t, [rel_tol](double lhs, double rhs) {
    return exceeds(lhs, rhs, rel_tol);
  });
}

/// f(x)f(y) >= f(x meet y) f(x join y) for all x, y. On violation lhs holds
/// the meet/join product and rhs the pair product.
inline LatticeWitness is_log_submodular(const PotentialTable& t,
                                        double rel_tol = kLatticeRelTol) {
  auto w = detail::scan_pairs(t, [rel_tol](double lhs, double rhs) {
    return exceeds(rhs, lhs, rel_tol);
  });
  if (!w.holds) std::swap(w.lhs, w.rhs);
  return w;
}

/// Holds iff every factor table is log-supermodular; unary tables pass
/// vacuously. A violation names the offending factor.
inline LatticeWitness is_log_supermodular_factorization(
    const FactorGraph& g, double rel_tol = kLatticeRelTol) {
  for (std::size_t a = 0; a < g.num_factors(); ++a) {
    auto w = is_log_supermodular(g.factor(a).table, rel_tol);
    if (!w.holds) {
      w.factor = a;
      return w;
    }
  }
  return {};
}

/// Sums out every position not in `keep` (ascending positions of the table).
/// Axis j of the result is position keep[j].
inline PotentialTable marginalize(const PotentialTable& t,
                                  std::span<const std::size_t> keep) {
  const std::size_t m = t.arity();
  for (std::size_t j = 0; j < keep.size(); ++j) {
    if (keep[j] >= m || (j > 0 && keep[j] <= keep[j - 1])) {
      throw DimensionError("keep set must be strictly increasing positions in [0, " +
                           std::to_string(m) + ")");
    }
  }
  std::vector<double> out(std::size_t{1} << keep.size(), 0.0);
  for (std::size_t idx = 0; idx < t.size(); ++idx) {
    std::size_t r = 0;
    for (std::size_t j = 0; j < keep.size(); ++j) {
      if ((idx >> keep[j]) & 1u) r |= std::size_t{1} << j;
    }
    out[r] += t[idx];
  }
  return PotentialTable(keep.size(), std::move(out));
}

struct FourFunctionsReport {
  LatticeWitness hypothesis;  // f1(x) f2(y) <= f3(x meet y) f4(x join y)
  LatticeWitness conclusion;  // (sum f1)(sum f2) <= (sum f3)(sum f4)
};

inline FourFunctionsReport check_four_functions(
    const PotentialTable& f1, const PotentialTable& f2,
    const PotentialTable& f3, const PotentialTable& f4,
    double rel_tol = kLatticeRelTol) {
  const std::size_t n = f1.arity();
  if (f2.arity() != n || f3.arity() != n || f4.arity() != n) {
    throw DimensionError("four functions must share one arity");
  }
  if (n > 12) throw CapacityError("four-functions scan limited to arity 12");
  FourFunctionsReport report;
  const std::size_t size = f1.size();
  for (std::size_t x = 0; x < size && report.hypothesis.holds; ++x) {
    for (std::size_t y = 0; y < size; ++y) {
      const double lhs = f1[x] * f2[y];
      const double rhs = f3[x & y] * f4[x | y];
      if (exceeds(lhs, rhs, rel_tol)) {
        report.hypothesis = {false, {Assignment(n, x), Assignment(n, y)}, lhs,
                             rhs, std::nullopt};
        break;
      }
    }
  }
  const double lhs = f1.sum() * f2.sum();
  const double rhs = f3.sum() * f4.sum();
  report.conclusion.lhs = lhs;
  report.conclusion.rhs = rhs;
  report.conclusion.holds = !exceeds(lhs, rhs, rel_tol);
  return report;
}

struct VariantReport {
  LatticeWitness g_supermodular;
  LatticeWitness hypothesis;  // g(x^1..x^k) <= prod_i f_i(z^i(x^1..x^k))
  LatticeWitness conclusion;  // sum g <= prod_i sum f_i
};

/// Splits a kn-bit point into k consecutive n-bit blocks (block i = x^i).
inline std::vector<Assignment> split_blocks(const Assignment& x, std::size_t k,
                                            std::size_t n) {
  std::vector<Assignment> blocks;
  blocks.reserve(k);
  const std::uint64_t block_mask =
      n == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << n) - 1);
  for (std::size_t i = 0; i < k; ++i) {
    blocks.emplace_back(n, (x.bits() >> (i * n)) & block_mask);
  }
  return blocks;
}

inline VariantReport check_variant_theorem(const PotentialTable& g,
                                           std::span<const PotentialTable> fs,
                                           double rel_tol = kLatticeRelTol) {
  const std::size_t k = fs.size();
  if (k == 0) throw DimensionError("need at least one f_i");
  const std::size_t n = fs[0].arity();
  for (const auto& f : fs) {
    if (f.arity() != n) throw DimensionError("all f_i must share one arity");
  }
  if (g.arity() != k * n) {
    throw DimensionError("g has arity " + std::to_string(g.arity()) +
                         ", expected k*n = " + std::to_string(k * n));
  }
  if (k * n > detail::kMaxScanArity) {
    throw CapacityError("variant scan limited to k*n <= 20");
  }

  VariantReport report;
  report.g_supermodular = is_log_supermodular(g, rel_tol);

  double g_sum = 0.0;
  for (std::size_t idx = 0; idx < g.size(); ++idx) {
    g_sum += g[idx];
    if (!report.hypothesis.holds) continue;
    const auto xs = split_blocks(Assignment(k * n, idx), k, n);
    double rhs = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
      rhs *= fs[i][order_stat(i + 1, xs).bits()];
    }
    if (exceeds(g[idx], rhs, rel_tol)) {
      report.hypothesis = {false, xs, g[idx], rhs, std::nullopt};
    }
  }
  double f_prod = 1.0;
  for (const auto& f : fs) f_prod *= f.sum();
  report.conclusion.lhs = g_sum;
  report.conclusion.rhs = f_prod;
  report.conclusion.holds = !exceeds(g_sum, f_prod, rel_tol);
  return report;
}

/// Table over k blocks of n bits with value prod_i g_i(x^i).
inline PotentialTable product_of_blocks(std::span<const PotentialTable> gs) {
  const std::size_t k = gs.size();
  if (k == 0) throw DimensionError("need at least one factor");
  const std::size_t n = gs[0].arity();
  for (const auto& t : gs) {
    if (t.arity() != n) throw DimensionError("all g_i must share one arity");
  }
  if (k * n > detail::kMaxScanArity) {
    throw CapacityError("block product limited to k*n <= 20");
  }
  std::vector<double> values(std::size_t{1} << (k * n));
  for (std::size_t idx = 0; idx < values.size(); ++idx) {
    const auto xs = split_blocks(Assignment(k * n, idx), k, n);
    double v = 1.0;
    for (std::size_t i = 0; i < k; ++i) v *= gs[i][xs[i].bits()];
    values[idx] = v;
  }
  return PotentialTable(k * n, std::move(values));
}

/// Raised when a routine requires a log-supermodular table and did not get one.
class NotLogSupermodularError : public PreconditionError {
 public:
  explicit NotLogSupermodularError(LatticeWitness w)
      : PreconditionError("table is not log-supermodular: f" +
                          w.witness.at(0).to_string() + " f" +
                          w.witness.at(1).to_string() + " = " +
                          std::to_string(w.lhs) + " > " +
                          std::to_string(w.rhs)),
        witness_(std::move(w)) {}

  const LatticeWitness& witness() const { return witness_; }

 private:
  LatticeWitness witness_;
};

/// prod_i g(x^i) <= prod_i g(z^i(x^1..x^k)) for one tuple.
inline LatticeWitness check_prod_lemma(const PotentialTable& g,
                                       std::span<const Assignment> xs,
                                       double rel_tol = kLatticeRelTol) {
  if (auto w = is_log_supermodular(g, rel_tol); !w.holds) {
    throw NotLogSupermodularError(std::move(w));
  }
  if (xs.empty()) throw DimensionError("need at least one assignment");
  for (const auto& x : xs) {
    if (x.size() != g.arity()) {
      throw DimensionError("assignment length does not match table arity");
    }
  }
  double lhs = 1.0;
  double rhs = 1.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    lhs *= g[xs[i].bits()];
    rhs *= g[order_stat(i + 1, xs).bits()];
  }
  LatticeWitness w;
  w.lhs = lhs;
  w.rhs = rhs;
  if (exceeds(lhs, rhs, rel_tol)) {
    w.holds = false;
    w.witness.assign(xs.begin(), xs.end());
  }
  return w;
}

/// x is weakly majorized by y: descending prefix sums of x never exceed those
/// of y (absolute tolerance 1e-12).
inline bool weakly_majorized(std::span<const double> x,
                             std::span<const double> y) {
  if (x.size() != y.size()) {
    throw DimensionError("weak majorization needs equal lengths");
  }
  std::vector<double> xs(x.begin(), x.end());
  std::vector<double> ys(y.begin(), y.end());
  std::sort(xs.begin(), xs.end(), std::greater<>());
  std::sort(ys.begin(), ys.end(), std::greater<>());
  double sx = 0.0;
  double sy = 0.0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    sx += xs[t];
    sy += ys[t];
    if (sx > sy + 1e-12) return false;
  }
  return true;
}

}  // namespace bethe
