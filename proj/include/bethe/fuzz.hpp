#pragma once

// Randomized property suites over the lattice checkers, covers and the Bethe
// optimizer. Every trial draws its instance from derive_seed(seed, trial), so
// a failure is reproduced from (suite, trial seed) alone.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "bethe/core.hpp"
#include "bethe/covers.hpp"
#include "bethe/exact.hpp"
#include "bethe/free_energy.hpp"
#include "bethe/io.hpp"
#include "bethe/lattice.hpp"
#include "bethe/models.hpp"
#include "bethe/optimize.hpp"
#include "bethe/random.hpp"

namespace bethe {

// ---- instance generators ----------------------------------------------------

/// Random simple graph on n vertices with at most max_edges edges.
inline std::vector<Edge> random_edges(std::size_t n, std::size_t max_edges,
                                      Rng& rng) {
  std::vector<Edge> all;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) all.emplace_back(i, j);
  }
  std::shuffle(all.begin(), all.end(), rng);
  std::uniform_int_distribution<std::size_t> count(
      0, std::min(max_edges, all.size()));
  all.resize(count(rng));
  std::sort(all.begin(), all.end());
  return all;
}

/// Random spanning tree on n vertices (each vertex attaches to an earlier one).
inline std::vector<Edge> random_tree_edges(std::size_t n, Rng& rng) {
  std::vector<Edge> edges;
  for (std::size_t v = 1; v < n; ++v) {
    std::uniform_int_distribution<std::size_t> parent(0, v - 1);
    edges.emplace_back(parent(rng), v);
  }
  return edges;
}

/// Positive table with log-entries uniform in [-spread, spread]; with
/// probability zero_prob each entry is replaced by 0.
inline PotentialTable random_table(std::size_t arity, Rng& rng,
                                   double spread = 1.0, double zero_prob = 0.0) {
  std::uniform_real_distribution<double> u(-spread, spread);
  std::bernoulli_distribution zero(zero_prob);
  std::vector<double> values(std::size_t{1} << arity);
  for (double& v : values) v = zero(rng) ? 0.0 : std::exp(u(rng));
  return PotentialTable(arity, std::move(values));
}

/// Log-supermodular table built as a product of random unary terms and random
/// attractive pairwise terms over pairs of positions. Off-diagonal pairwise
/// entries are occasionally zero.
inline PotentialTable random_log_supermodular_table(std::size_t arity, Rng& rng,
                                                    double spread = 1.0) {
  std::uniform_real_distribution<double> u(-spread, spread);
  std::uniform_real_distribution<double> boost(0.0, spread);
  std::bernoulli_distribution use_pair(0.6);
  std::bernoulli_distribution zero(0.1);
  std::vector<double> logs(std::size_t{1} << arity, 0.0);
  std::vector<bool> dead(logs.size(), false);
  for (std::size_t j = 0; j < arity; ++j) {
    const double l0 = u(rng);
    const double l1 = u(rng);
    for (std::size_t idx = 0; idx < logs.size(); ++idx) {
      logs[idx] += ((idx >> j) & 1u) ? l1 : l0;
    }
  }
  for (std::size_t a = 0; a < arity; ++a) {
    for (std::size_t b = a + 1; b < arity; ++b) {
      if (!use_pair(rng)) continue;
      double l[4] = {u(rng), u(rng), u(rng), u(rng)};
      const double deficit = std::max(0.0, (l[1] + l[2]) - (l[0] + l[3]));
      const double lift = 0.5 * (deficit + boost(rng));
      l[0] += lift;
      l[3] += lift;
      const bool kill10 = zero(rng);
      const bool kill01 = zero(rng);
      for (std::size_t idx = 0; idx < logs.size(); ++idx) {
        const std::size_t local = ((idx >> a) & 1u) | (((idx >> b) & 1u) << 1);
        logs[idx] += l[local];
        if ((local == 1 && kill10) || (local == 2 && kill01)) dead[idx] = true;
      }
    }
  }
  std::vector<double> values(logs.size());
  for (std::size_t idx = 0; idx < logs.size(); ++idx) {
    values[idx] = dead[idx] ? 0.0 : std::exp(logs[idx]);
  }
  return PotentialTable(arity, std::move(values));
}

/// Random attractive pairwise model with n in [2, max_n], at most max_factors
/// factors and strength in [0, max_beta].
inline FactorGraph random_attractive_model(Rng& rng, std::size_t max_n = 5,
                                           std::size_t max_factors = 6,
                                           double max_beta = 2.0) {
  std::uniform_int_distribution<std::size_t> n_dist(2, max_n);
  std::uniform_real_distribution<double> beta(0.0, max_beta);
  const std::size_t n = n_dist(rng);
  const auto edges = random_edges(n, max_factors, rng);
  return random_attractive_pairwise(n, edges, beta(rng), rng());
}

/// Exact marginals of g with every table perturbed by random positive
/// multipliers; a feasible tau for g that is generally not its optimum.
inline PseudoMarginals random_feasible_tau(const FactorGraph& g, Rng& rng,
                                           double spread = 1.0) {
  std::vector<PotentialTable> unary;
  for (std::size_t i = 0; i < g.num_variables(); ++i) {
    const auto noise = random_table(1, rng, spread);
    unary.emplace_back(1, std::vector<double>{g.unary(i)[0] * noise[0],
                                              g.unary(i)[1] * noise[1]});
  }
  std::vector<Factor> factors;
  for (const auto& f : g.factors()) {
    const auto noise = random_table(f.table.arity(), rng, spread);
    std::vector<double> v(f.table.size());
    for (std::size_t idx = 0; idx < v.size(); ++idx) v[idx] = f.table[idx] * noise[idx];
    factors.push_back({f.scope, PotentialTable(f.table.arity(), std::move(v))});
  }
  return exact_marginals(FactorGraph(g.num_variables(), std::move(unary),
                                     std::move(factors)));
}

// ---- suites -------------------------------------------------------------------

struct FuzzOptions {
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  std::size_t restarts = 20;  // bethe suite
  // Test-only: negate every checked inequality so the harness must fail.
  bool mutate = false;
};

struct FuzzFailure {
  std::string suite;
  std::string check;
  std::uint64_t trial = 0;
  std::uint64_t trial_seed = 0;
  std::string detail;
  Json instance;
};

struct FuzzSummary {
  std::string suite;
  std::size_t trials = 0;
  std::size_t checks = 0;
  std::vector<FuzzFailure> failures;
  std::vector<std::pair<std::string, std::size_t>> check_counts;
};

inline Json table_json(const PotentialTable& t) {
  return Json(std::vector<double>(t.values().begin(), t.values().end()));
}

namespace detail {

class TrialRecorder {
 public:
  TrialRecorder(FuzzSummary& summary, const FuzzOptions& opts, std::uint64_t trial,
                std::uint64_t trial_seed)
      : summary_(summary), opts_(opts), trial_(trial), seed_(trial_seed) {}

  // Records one property evaluation; `ok` is the property's truth value.
  bool expect(const std::string& check, bool ok, const Json& instance,
              const std::string& detail = {}) {
    ++summary_.checks;
    auto it = std::find_if(summary_.check_counts.begin(), summary_.check_counts.end(),
                           [&](const auto& p) { return p.first == check; });
    if (it == summary_.check_counts.end()) {
      summary_.check_counts.emplace_back(check, 1);
    } else {
      ++it->second;
    }
    if (opts_.mutate) ok = !ok;
    if (!ok) {
      summary_.failures.push_back(
          {summary_.suite, check, trial_, seed_, detail, instance});
    }
    return ok;
  }

 private:
  FuzzSummary& summary_;
  const FuzzOptions& opts_;
  std::uint64_t trial_;
  std::uint64_t seed_;
};

}  // namespace detail

/// Four-functions instance whose hypothesis holds by construction: f1, f2, f4
/// random and f3(z) the smallest value the hypothesis allows (times a random
/// slack in [1, 1.2]).
inline std::array<PotentialTable, 4> make_four_functions_instance(Rng& rng) {
  std::uniform_int_distribution<std::size_t> n_dist(1, 5);
  std::uniform_real_distribution<double> slack(1.0, 1.2);
  const std::size_t n = n_dist(rng);
  auto f1 = random_table(n, rng, 1.0, 0.1);
  auto f2 = random_table(n, rng, 1.0, 0.1);
  auto f4 = random_table(n, rng, 1.0);
  std::vector<double> f3(f1.size(), 0.0);
  for (std::size_t x = 0; x < f1.size(); ++x) {
    for (std::size_t y = 0; y < f1.size(); ++y) {
      f3[x & y] = std::max(f3[x & y], f1[x] * f2[y] / f4[x | y]);
    }
  }
  for (double& v : f3) v *= slack(rng);
  return {f1, f2, PotentialTable(n, std::move(f3)), f4};
}

struct VariantInstance {
  PotentialTable g;
  std::vector<PotentialTable> fs;
};

/// g log-supermodular over k blocks of n bits (kn <= 12); the f_i satisfy the
/// pointwise premise either by tight envelope on f_k or by global rescaling.
/// One in four instances uses a product g = prod_i g_i(x^i).
inline VariantInstance make_variant_instance(Rng& rng) {
  std::uniform_int_distribution<std::size_t> k_dist(1, 4);
  std::uniform_int_distribution<std::size_t> n_dist(1, 3);
  std::uniform_int_distribution<int> mode(0, 3);
  const std::size_t k = k_dist(rng);
  const std::size_t n = n_dist(rng);
  VariantInstance inst;
  const int m = mode(rng);
  if (m == 3) {
    std::vector<PotentialTable> gs;
    // blocks of one bit are always log-supermodular; wider blocks need it built in
    for (std::size_t i = 0; i < k; ++i) {
      gs.push_back(n == 1 ? random_table(1, rng, 1.0, 0.1)
                          : random_log_supermodular_table(n, rng));
    }
    inst.g = product_of_blocks(gs);
  } else {
    inst.g = random_log_supermodular_table(k * n, rng);
  }
  for (std::size_t i = 0; i < k; ++i) inst.fs.push_back(random_table(n, rng, 1.0));

  if (m == 0) {
    // global rescale of f_1
    double c = 0.0;
    for (std::size_t idx = 0; idx < inst.g.size(); ++idx) {
      const auto xs = split_blocks(Assignment(k * n, idx), k, n);
      double rhs = 1.0;
      for (std::size_t i = 0; i < k; ++i) rhs *= inst.fs[i][order_stat(i + 1, xs).bits()];
      c = std::max(c, inst.g[idx] / rhs);
    }
    std::vector<double> v(inst.fs[0].values().begin(), inst.fs[0].values().end());
    for (double& x : v) x *= c;
    inst.fs[0] = PotentialTable(n, std::move(v));
  } else {
    // tight envelope on f_k
    std::vector<double> fk(std::size_t{1} << n, 0.0);
    for (std::size_t idx = 0; idx < inst.g.size(); ++idx) {
      const auto xs = split_blocks(Assignment(k * n, idx), k, n);
      double rest = 1.0;
      for (std::size_t i = 0; i + 1 < k; ++i) rest *= inst.fs[i][order_stat(i + 1, xs).bits()];
      auto& slot = fk[order_stat(k, xs).bits()];
      slot = std::max(slot, inst.g[idx] / rest);
    }
    inst.fs[k - 1] = PotentialTable(n, std::move(fk));
  }
  return inst;
}

namespace detail {

inline void lattice_trial(detail::TrialRecorder& rec, std::uint64_t trial_seed) {
  Rng rng = make_rng(trial_seed);

  // four functions theorem
  {
    const auto f = make_four_functions_instance(rng);
    const auto r = check_four_functions(f[0], f[1], f[2], f[3]);
    const Json inst{{"f1", table_json(f[0])}, {"f2", table_json(f[1])},
                    {"f3", table_json(f[2])}, {"f4", table_json(f[3])}};
    rec.expect("four_functions", !r.hypothesis.holds || r.conclusion.holds, inst,
               "sum product lhs " + format_real(r.conclusion.lhs) + " rhs " +
                   format_real(r.conclusion.rhs));
  }

  // k-function variant with a log-supermodular g
  {
    const auto v = make_variant_instance(rng);
    const auto r = check_variant_theorem(v.g, v.fs);
    Json fs = Json::array();
    for (const auto& f : v.fs) fs.push_back(table_json(f));
    const Json inst{{"g", table_json(v.g)}, {"fs", fs}};
    const bool premise = r.g_supermodular.holds && r.hypothesis.holds;
    rec.expect("variant", !premise || r.conclusion.holds, inst,
               "sum g " + format_real(r.conclusion.lhs) + " prod sum f " +
                   format_real(r.conclusion.rhs));
  }

  // marginals of log-supermodular tables
  {
    std::uniform_int_distribution<std::size_t> arity(1, 4);
    const auto t = random_log_supermodular_table(arity(rng), rng);
    bool ok = true;
    std::string detail;
    for (std::size_t mask = 1; mask < (std::size_t{1} << t.arity()) && ok; ++mask) {
      std::vector<std::size_t> keep;
      for (std::size_t j = 0; j < t.arity(); ++j) {
        if ((mask >> j) & 1u) keep.push_back(j);
      }
      if (!is_log_supermodular(marginalize(t, keep)).holds) {
        ok = false;
        detail = "marginal mask " + std::to_string(mask);
      }
    }
    rec.expect("marginal_closure", ok, Json{{"table", table_json(t)}}, detail);
  }

  // product lemma on random tuples
  {
    std::uniform_int_distribution<std::size_t> arity(1, 6);
    std::uniform_int_distribution<std::size_t> k_dist(1, 4);
    const auto g = random_log_supermodular_table(arity(rng), rng);
    for (int rep = 0; rep < 10; ++rep) {
      const std::size_t k = k_dist(rng);
      std::vector<Assignment> xs;
      std::uniform_int_distribution<std::uint64_t> bits(0, g.size() - 1);
      for (std::size_t i = 0; i < k; ++i) xs.emplace_back(g.arity(), bits(rng));
      const auto w = check_prod_lemma(g, xs);
      Json tuple = Json::array();
      for (const auto& x : xs) tuple.push_back(x.bits());
      rec.expect("prod_lemma", w.holds,
                 Json{{"g", table_json(g)}, {"tuple", tuple}},
                 "lhs " + format_real(w.lhs) + " rhs " + format_real(w.rhs));
    }
  }
}

inline void covers_trial(detail::TrialRecorder& rec, std::uint64_t trial_seed) {
  Rng rng = make_rng(trial_seed);
  const FactorGraph g = random_attractive_model(rng, 5, 6, 2.0);
  std::uniform_int_distribution<std::size_t> k_dist(2, 3);
  std::size_t k = k_dist(rng);
  if (k * g.num_variables() > 12) k = 2;
  const CoverSpec spec = sample_cover(g, k, rng());
  const Json inst{{"model", Json::parse(model_to_text(g))}, {"cover", cover_to_json(spec)}};

  const CoverGraph h = build_cover(g, spec);
  rec.expect("valid_cover", validate_cover(h), inst);
  rec.expect("inherits_log_supermodularity",
             is_log_supermodular_factorization(h.graph).holds, inst);
  const auto r = verify_cover_inequality(g, spec);
  rec.expect("cover_bound", r.holds, inst,
             "log Z(H) " + format_real(r.log_z_cover) + " k log Z(G) " +
                 format_real(r.k_log_z_base));
}

inline void bethe_trial(detail::TrialRecorder& rec, std::uint64_t trial_seed,
                        std::size_t restarts) {
  Rng rng = make_rng(trial_seed);
  const FactorGraph g = random_attractive_model(rng, 6, 7, 2.0);
  const Json inst{{"model", Json::parse(model_to_text(g))}};
  const double log_z = partition_function(g);

  OptimizeOptions opts;
  opts.restarts = restarts;
  opts.seed = rng();
  const auto best = optimize_bethe(g, opts);
  rec.expect("bethe_below_partition", best.log_z_bethe_lower <= log_z + 1e-9, inst,
             "log Z_B lower " + format_real(best.log_z_bethe_lower) + " log Z " +
                 format_real(log_z));

  for (int rep = 0; rep < 3; ++rep) {
    const auto tau = random_feasible_tau(g, rng);
    const double value = bethe_free_energy(g, tau);
    rec.expect("feasible_value_below_partition", value <= log_z + 1e-9, inst,
               "value " + format_real(value) + " log Z " + format_real(log_z));
  }

  const CoverSpec spec = sample_cover(g, 2, rng());
  const auto h = build_cover(g, spec);
  const double base = bethe_free_energy(g, best.tau);
  const double lifted = bethe_free_energy(h.graph, lift_pseudomarginals(best.tau, h));
  rec.expect("lift_scales_by_k",
             std::abs(lifted - 2.0 * base) <= 1e-12 * std::abs(2.0 * base), inst,
             "lifted " + format_real(lifted) + " base " + format_real(base));
}

}  // namespace detail

inline const std::vector<std::string>& fuzz_suites() {
  static const std::vector<std::string> names{"lattice", "covers", "bethe"};
  return names;
}

/// Runs trial `trial` of a suite (seed already derived). Used both by
/// run_fuzz and for replaying failure artifacts.
inline FuzzSummary run_fuzz_trial(const std::string& suite, std::uint64_t trial,
                                  std::uint64_t trial_seed,
                                  const FuzzOptions& opts = {}) {
  FuzzSummary summary;
  summary.suite = suite;
  summary.trials = 1;
  detail::TrialRecorder rec(summary, opts, trial, trial_seed);
  if (suite == "lattice") {
    detail::lattice_trial(rec, trial_seed);
  } else if (suite == "covers") {
    detail::covers_trial(rec, trial_seed);
  } else if (suite == "bethe") {
    detail::bethe_trial(rec, trial_seed, opts.restarts);
  } else {
    throw DomainError("unknown fuzz suite \"" + suite + "\"");
  }
  return summary;
}

inline FuzzSummary run_fuzz(const std::string& suite, const FuzzOptions& opts) {
  FuzzSummary total;
  total.suite = suite;
  for (std::uint64_t t = 0; t < opts.trials; ++t) {
    auto one = run_fuzz_trial(suite, t, derive_seed(opts.seed, t), opts);
    ++total.trials;
    total.checks += one.checks;
    for (auto& [name, count] : one.check_counts) {
      auto it = std::find_if(total.check_counts.begin(), total.check_counts.end(),
                             [&](const auto& p) { return p.first == name; });
      if (it == total.check_counts.end()) {
        total.check_counts.emplace_back(name, count);
      } else {
        it->second += count;
      }
    }
    for (auto& f : one.failures) total.failures.push_back(std::move(f));
  }
  return total;
}

inline Json failure_to_json(const FuzzFailure& f, std::uint64_t base_seed) {
  return Json{{"suite", f.suite},   {"check", f.check},
              {"seed", base_seed},  {"trial", f.trial},
              {"trial_seed", f.trial_seed}, {"detail", f.detail},
              {"instance", f.instance}};
}

}  // namespace bethe
