// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "bethe/bethe.hpp"
#include "bethe/fuzz.hpp"

using namespace bethe;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

void fail(Outcome& o, const std::string& why) {
  if (o.pass) o.detail = why;
  o.pass = false;
}

std::string num(double v) { return format_real(v); }

std::vector<FactorGraph> attractive_population() {
  std::vector<FactorGraph> models;
  for (std::uint64_t i = 0; i < 50; ++i) {
    Rng rng = make_rng(derive_seed(2024, i));
    models.push_back(random_attractive_model(rng, 5, 6, 2.0));
  }
  return models;
}

FactorGraph triangle() {
  return FactorGraph(3,
                     {PotentialTable(1, {1, 1.5}), PotentialTable(1, {1, 0.8}),
                      PotentialTable(1, {1.2, 1})},
                     {{{0, 1}, PotentialTable(2, {2, 1, 1, 2})},
                      {{1, 2}, PotentialTable(2, {1.5, 0.5, 1, 3})},
                      {{0, 2}, PotentialTable(2, {3, 1, 1, 1.5})}});
}

FactorGraph random_tree_model(std::uint64_t seed, std::size_t max_n) {
  Rng rng = make_rng(seed);
  std::uniform_int_distribution<std::size_t> size(2, max_n);
  const std::size_t n = size(rng);
  return random_attractive_pairwise(n, random_tree_edges(n, rng), 1.5, rng());
}

// Independent count: subsets of [n] with no edge inside.
std::uint64_t brute_independent_sets(std::size_t n, const std::vector<Edge>& edges) {
  std::uint64_t count = 0;
  for (std::uint64_t s = 0; s < (std::uint64_t{1} << n); ++s) {
    bool ok = true;
    for (auto [i, j] : edges) ok = ok && !(((s >> i) & 1u) && ((s >> j) & 1u));
    count += ok;
  }
  return count;
}

Outcome cover_inequality() {
  Outcome o;
  std::size_t covers = 0;
  for (const auto& g : attractive_population()) {
    const double lz = partition_function(g);
    for (const auto& spec : enumerate_covers(g, 2)) {
      ++covers;
      const auto r = verify_cover_inequality(g, spec, lz);
      if (!r.holds) {
        fail(o, "log Z(H) " + num(r.log_z_cover) + " > 2 log Z(G) " + num(r.k_log_z_base));
      }
    }
  }
  if (o.pass) o.detail = std::to_string(covers) + " 2-covers over 50 models, no violations";
  return o;
}

Outcome bethe_lower_bound() {
  Outcome o;
  double worst = -INFINITY;
  for (const auto& g : attractive_population()) {
    const double lz = partition_function(g);
    const double lower = optimize_bethe(g).log_z_bethe_lower;
    worst = std::max(worst, lower - lz);
    if (lower > lz + 1e-9) fail(o, "Bethe " + num(lower) + " above log Z " + num(lz));
  }
  if (o.pass) o.detail = "max (Bethe - log Z) = " + num(worst);
  return o;
}

Outcome cover_convergence() {
  Outcome o;
  const auto g = triangle();
  const double lz = partition_function(g);
  const double bethe = optimize_bethe(g).log_z_bethe_lower;
  std::vector<double> est;
  for (std::size_t k = 1; k <= 3; ++k) {
    const auto e = estimate_bethe_by_covers(g, k, 0, 0, CoverAverage::exhaustive);
    est.push_back(e.log_estimate);
    if (e.log_estimate > lz + 1e-9) fail(o, "k=" + std::to_string(k) + " estimate above log Z");
    if (e.log_estimate < bethe - 1e-6) fail(o, "k=" + std::to_string(k) + " estimate below Bethe");
  }
  if (!(std::abs(est[2] - bethe) < std::abs(est[0] - bethe))) {
    fail(o, "k=3 not closer to Bethe than k=1");
  }
  char buf[200];
  std::snprintf(buf, sizeof buf, "log Z %.6f, k=1 %.6f, k=2 %.6f, k=3 %.6f, Bethe %.6f", lz,
                est[0], est[1], est[2], bethe);
  if (o.pass) o.detail = buf;
  else o.detail += std::string(" (") + buf + ")";
  return o;
}

Outcome lattice_theorems() {
  Outcome o;
  Rng rng = make_rng(77);
  for (int t = 0; t < 1000; ++t) {
    const auto f = make_four_functions_instance(rng);
    const auto r = check_four_functions(f[0], f[1], f[2], f[3]);
    if (r.hypothesis.holds && !r.conclusion.holds) fail(o, "four functions trial " + std::to_string(t));
  }
  for (int t = 0; t < 1000; ++t) {
    const auto v = make_variant_instance(rng);
    const auto r = check_variant_theorem(v.g, v.fs);
    if (r.g_supermodular.holds && r.hypothesis.holds && !r.conclusion.holds) {
      fail(o, "variant trial " + std::to_string(t));
    }
  }
  std::uniform_int_distribution<std::size_t> arity(1, 6);
  for (int t = 0; t < 500; ++t) {
    const auto table = random_log_supermodular_table(arity(rng), rng);
    for (std::size_t mask = 1; mask < (std::size_t{1} << table.arity()); ++mask) {
      std::vector<std::size_t> keep;
      for (std::size_t j = 0; j < table.arity(); ++j) {
        if ((mask >> j) & 1u) keep.push_back(j);
      }
      if (!is_log_supermodular(marginalize(table, keep)).holds) {
        fail(o, "marginal closure trial " + std::to_string(t));
      }
    }
  }
  if (o.pass) o.detail = "1000 four-functions, 1000 variant, 500 marginal-closure trials";
  return o;
}

Outcome trees_exact() {
  Outcome o;
  double worst_gap = 0.0;
  double worst_belief = 0.0;
  for (std::uint64_t i = 0; i < 30; ++i) {
    const auto g = random_tree_model(derive_seed(31, i), 10);
    const double lz = partition_function(g);
    const double lower = optimize_bethe(g).log_z_bethe_lower;
    worst_gap = std::max(worst_gap, std::abs(lower - lz));
    const auto bp = run_bp(g, MessageSet::uniform(g));
    const auto exact = exact_marginals(g);
    double diff = 0.0;
    for (std::size_t v = 0; v < g.num_variables(); ++v) {
      for (int x = 0; x < 2; ++x) diff = std::max(diff, std::abs(bp.beliefs.nodes[v][x] - exact.nodes[v][x]));
    }
    for (std::size_t a = 0; a < g.num_factors(); ++a) {
      for (std::size_t x = 0; x < exact.factors[a].size(); ++x) {
        diff = std::max(diff, std::abs(bp.beliefs.factors[a][x] - exact.factors[a][x]));
      }
    }
    worst_belief = std::max(worst_belief, diff);
    if (!bp.converged) fail(o, "BP did not converge on tree " + std::to_string(i));
  }
  if (worst_gap > 1e-6) fail(o, "max |Bethe - log Z| = " + num(worst_gap));
  if (worst_belief > 1e-8) fail(o, "max belief error = " + num(worst_belief));
  if (o.pass) o.detail = "max |Bethe - log Z| " + num(worst_gap) + ", max belief error " + num(worst_belief);
  return o;
}

Outcome stationarity() {
  Outcome o;
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto g = random_tree_model(derive_seed(57, i), 8);
    const auto bp = run_bp(g, MessageSet::uniform(g));
    const double s = stationarity_check(g, bp.beliefs, 1e-6);
    worst = std::max(worst, s);
  }
  if (worst >= 1e-5) fail(o, "max projected gradient " + num(worst));
  if (o.pass) o.detail = "max projected gradient " + num(worst);
  return o;
}

Outcome independent_sets() {
  Outcome o;
  const std::vector<std::pair<std::vector<Edge>, std::uint64_t>> fixed{
      {{{0, 1}, {1, 2}, {2, 3}, {3, 0}}, 7}, {{{0, 1}, {1, 2}}, 5}, {{{0, 1}}, 3}};
  for (const auto& [edges, want] : fixed) {
    std::size_t n = 0;
    for (auto [i, j] : edges) n = std::max({n, i + 1, j + 1});
    const auto g = flip_bipartite(independent_set_model(n, edges));
    const double count = std::exp(partition_function(g));
    if (std::llround(count) != static_cast<long long>(want)) {
      fail(o, "count " + num(count) + " expected " + std::to_string(want));
    }
  }
  Rng rng = make_rng(91);
  double worst_rel = 0.0;
  for (int t = 0; t < 100; ++t) {
    std::uniform_int_distribution<std::size_t> size(2, 12);
    const std::size_t n = size(rng);
    std::uniform_int_distribution<std::size_t> cut(1, n - 1);
    const std::size_t a = cut(rng);
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < a; ++i) {
      for (std::size_t j = a; j < n; ++j) {
        if (std::bernoulli_distribution(0.4)(rng)) edges.emplace_back(i, j);
      }
    }
    const auto g = independent_set_model(n, edges);
    const auto f = flip_bipartite(g);
    const double want = static_cast<double>(brute_independent_sets(n, edges));
    const double got = std::exp(partition_function(f));
    worst_rel = std::max(worst_rel, std::abs(got - want) / want);
    if (!is_log_supermodular_factorization(f).holds) fail(o, "flip not log-supermodular");
    const double bethe = std::exp(optimize_bethe(f, {.restarts = 5, .seed = 1}).log_z_bethe_lower);
    if (bethe > want * (1 + 1e-9)) fail(o, "Bethe " + num(bethe) + " above count " + num(want));
  }
  if (worst_rel > 1e-12) fail(o, "flip changed a count by relative " + num(worst_rel));
  if (o.pass) o.detail = "counts 7, 5, 3; 100 flips, max relative count error " + num(worst_rel);
  return o;
}

Outcome lift_identity() {
  Outcome o;
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    Rng rng = make_rng(derive_seed(123, i));
    const auto g = random_attractive_model(rng, 5, 6, 2.0);
    const auto tau = random_feasible_tau(g, rng);
    std::uniform_int_distribution<std::size_t> kd(2, 4);
    const std::size_t k = kd(rng);
    const auto h = build_cover(g, sample_cover(g, k, rng()));
    const double base = bethe_free_energy(g, tau);
    const double lifted = bethe_free_energy(h.graph, lift_pseudomarginals(tau, h));
    const double rel = std::abs(lifted - k * base) / std::max(1.0, std::abs(k * base));
    worst = std::max(worst, rel);
  }
  if (worst > 1e-12) fail(o, "max relative error " + num(worst));
  if (o.pass) o.detail = "100 triples, max relative error " + num(worst);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"1 cover inequality on exhaustive 2-covers", cover_inequality},
      {"2 optimized Bethe value is a lower bound", bethe_lower_bound},
      {"3 cover averages approach Bethe from above", cover_convergence},
      {"4 lattice theorems under fuzzing", lattice_theorems},
      {"5 trees: Bethe exact and BP marginals exact", trees_exact},
      {"6 BP fixed points are stationary", stationarity},
      {"7 independent sets and the bipartite flip", independent_sets},
      {"8 lifted pseudomarginals scale the objective by k", lift_identity},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  %s  (%s)\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures ? 1 : 0;
}
