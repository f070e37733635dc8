#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <map>
#include <numeric>
#include <set>
#include <utility>
#include <vector>

#include "bethe/covers.hpp"
#include "bethe/exact.hpp"
#include "bethe/fuzz.hpp"
#include "bethe/lattice.hpp"
#include "bethe/optimize.hpp"
#include "test_util.hpp"

using namespace bethe;

namespace {

using Perm = std::vector<std::size_t>;
const Perm kId{0, 1};
const Perm kSwap{1, 0};

FactorGraph figure1_model() {
  return random_attractive_pairwise(4, test::figure1_edges(), 0.7, 3);
}

CoverSpec figure1_spec() {
  return {2, {kId, kId, kId, kSwap, kId, kSwap, kId, kId, kId, kSwap}};
}

std::vector<std::vector<std::size_t>> scopes(const FactorGraph& g) {
  std::vector<std::vector<std::size_t>> s;
  for (const auto& f : g.factors()) s.push_back(f.scope);
  return s;
}

// The 2-cover of the triangle whose variable copies form a single 6-cycle:
// swap one incidence, keep every other identity.
CoverSpec triangle_six_cycle(const FactorGraph& g) {
  auto spec = CoverSpec::identity(g, 2);
  spec.perms[1] = kSwap;
  return spec;
}

}  // namespace

TEST(Covers, KOneIsIsomorphic) {
  const auto g = test::triangle_model(2);
  const auto h = build_cover(g, CoverSpec::identity(g, 1));
  EXPECT_EQ(h.graph, g);
  EXPECT_TRUE(validate_cover(h));
}

TEST(Covers, IdentityTwoCoverIsDisjointCopies) {
  const auto g = test::two_variable_model();
  const auto h = build_cover(g, CoverSpec::identity(g, 2));
  EXPECT_EQ(h.graph.num_variables(), 4u);
  EXPECT_EQ(scopes(h.graph), (std::vector<std::vector<std::size_t>>{{0, 1}, {2, 3}}));
  EXPECT_NEAR(std::exp(partition_function(h.graph)), 36.0, 1e-12);
  EXPECT_NEAR(test::brute_z(h.graph), 36.0, 1e-12);
}

TEST(Covers, Figure1Cover) {
  const auto g = figure1_model();
  ASSERT_EQ(g.incidences().size(), 10u);
  const auto h = build_cover(g, figure1_spec());
  EXPECT_EQ(h.graph.num_variables(), 8u);
  EXPECT_EQ(h.graph.num_factors(), 10u);
  EXPECT_TRUE(validate_cover(h));
  // factor c*5 + a, variable c*4 + i
  const std::vector<std::vector<std::size_t>> want{
      {0, 1}, {0, 6}, {2, 7}, {1, 2}, {1, 7},   // copy 0
      {4, 5}, {2, 4}, {3, 6}, {5, 6}, {3, 5}};  // copy 1
  EXPECT_EQ(scopes(h.graph), want);
  for (std::size_t w = 0; w < 8; ++w) EXPECT_EQ(h.variable_map[w], w % 4);
  for (std::size_t b = 0; b < 10; ++b) EXPECT_EQ(h.factor_map[b], b % 5);
}

TEST(Covers, LiftedTablesMatchBase) {
  // copies landing out of order get their axes swapped, so f^H(x) is the
  // base potential of the projected assignment
  const auto g = figure1_model();
  const auto h = build_cover(g, figure1_spec());
  for (std::size_t b = 0; b < h.graph.num_factors(); ++b) {
    const auto& cf = h.graph.factor(b);
    const auto& bf = g.factor(h.factor_map[b]);
    for (std::size_t idx = 0; idx < 4; ++idx) {
      // assignment of cover scope slots -> base scope slots by variable identity
      std::size_t base_idx = 0;
      for (std::size_t j = 0; j < 2; ++j) {
        const std::size_t base_var = h.variable_map[cf.scope[j]];
        const std::size_t pos = base_var == bf.scope[0] ? 0 : 1;
        if ((idx >> j) & 1u) base_idx |= std::size_t{1} << pos;
      }
      EXPECT_EQ(cf.table[idx], bf.table[base_idx]);
    }
  }
}

TEST(Covers, ValidateRejectsRedirectedEdge) {
  const auto g = test::two_variable_model();
  auto h = build_cover(g, CoverSpec::identity(g, 2));
  auto factors = h.graph.factors();
  factors[1].scope = {0, 3};  // copy 1 now shares variable copy 0 with copy 0
  h.graph = FactorGraph(4, h.graph.unary(), factors);
  EXPECT_FALSE(validate_cover(h));
}

TEST(Covers, ValidateRejectsWrongPotential) {
  const auto g = test::two_variable_model();
  auto h = build_cover(g, CoverSpec::identity(g, 2));
  auto factors = h.graph.factors();
  factors[1].table = PotentialTable(2, {1, 1, 1, 1});
  h.graph = FactorGraph(4, h.graph.unary(), factors);
  EXPECT_FALSE(validate_cover(h));
}

TEST(Covers, MalformedSpec) {
  const auto g = test::two_variable_model();
  EXPECT_THROW(build_cover(g, CoverSpec{2, {kId}}), StructureError);
  EXPECT_THROW(build_cover(g, CoverSpec{2, {kId, Perm{0, 0}}}), StructureError);
  EXPECT_THROW(build_cover(g, CoverSpec{2, {kId, Perm{0, 1, 2}}}), StructureError);
  EXPECT_THROW(build_cover(g, CoverSpec{0, {Perm{}, Perm{}}}), StructureError);
}

TEST(Covers, EnumerationCounts) {
  const auto g = test::two_variable_model();
  EXPECT_EQ(enumerate_covers(g, 1).size(), 1u);
  EXPECT_EQ(enumerate_covers(g, 2).size(), 4u);
  EXPECT_EQ(count_covers(g, 3), 36u);
  const auto fig = figure1_model();
  const auto specs = enumerate_covers(fig, 2);
  EXPECT_EQ(specs.size(), 1024u);
  std::set<std::vector<std::vector<std::size_t>>> unique;
  for (const auto& s : specs) unique.insert(s.perms);
  EXPECT_EQ(unique.size(), 1024u);
}

TEST(Covers, EnumerationMatchesIndexing) {
  const auto g = test::triangle_model(1);
  const auto specs = enumerate_covers(g, 2);
  ASSERT_EQ(specs.size(), 64u);
  for (std::size_t j = 0; j < specs.size(); ++j) EXPECT_EQ(specs[j], cover_from_index(g, 2, j));
  const auto three = enumerate_covers(test::two_variable_model(), 3);
  std::set<std::vector<std::vector<std::size_t>>> unique;
  for (const auto& s : three) unique.insert(s.perms);
  EXPECT_EQ(unique.size(), 36u);
}

TEST(Covers, EnumerationCapacity) {
  EXPECT_THROW(enumerate_covers(figure1_model(), 3), CapacityError);  // 6^10
}

TEST(Covers, SampleCover) {
  const auto g = figure1_model();
  EXPECT_EQ(sample_cover(g, 1, 5), CoverSpec::identity(g, 1));
  EXPECT_EQ(sample_cover(g, 3, 42), sample_cover(g, 3, 42));
  EXPECT_NO_THROW(validate_spec(g, sample_cover(g, 4, 7)));
}

TEST(Covers, SampleSwapFrequency) {
  const auto g = test::two_variable_model();
  int swaps = 0;
  for (std::uint64_t s = 0; s < 10000; ++s) swaps += sample_cover(g, 2, s).perms[0] == kSwap;
  EXPECT_NEAR(swaps / 10000.0, 0.5, 0.02);
}

TEST(Covers, SampleUniformOverPermutations) {
  // chi-square over the 6 permutations of {0,1,2}
  const auto g = test::two_variable_model();
  std::map<Perm, int> counts;
  const int draws = 12000;
  for (int s = 0; s < draws; ++s) ++counts[sample_cover(g, 3, s).perms[1]];
  ASSERT_EQ(counts.size(), 6u);
  double chi2 = 0.0;
  for (const auto& [p, c] : counts) chi2 += (c - draws / 6.0) * (c - draws / 6.0) / (draws / 6.0);
  EXPECT_LT(chi2, 20.5);  // 5 dof, p ~ 0.001
}

TEST(Covers, InequalityExamples) {
  const auto g = test::triangle_model(3);
  const double lz = partition_function(g);
  auto r = verify_cover_inequality(g, CoverSpec::identity(g, 2));
  EXPECT_NEAR(r.log_z_cover, 2 * lz, 1e-12);
  EXPECT_TRUE(r.holds);
  r = verify_cover_inequality(g, CoverSpec::identity(g, 1));
  EXPECT_NEAR(r.log_z_cover, lz, 1e-12);

  const auto six = triangle_six_cycle(g);
  const auto h = build_cover(g, six);
  EXPECT_TRUE(validate_cover(h));
  // one 6-cycle: connected, every variable copy of degree 2
  std::vector<std::size_t> root(6);
  std::iota(root.begin(), root.end(), std::size_t{0});
  auto find = [&root](std::size_t v) {
    while (root[v] != v) v = root[v];
    return v;
  };
  std::vector<int> degree(6, 0);
  for (const auto& f : h.graph.factors()) {
    root[find(f.scope[0])] = find(f.scope[1]);
    ++degree[f.scope[0]];
    ++degree[f.scope[1]];
  }
  for (std::size_t v = 0; v < 6; ++v) {
    EXPECT_EQ(find(v), find(0));
    EXPECT_EQ(degree[v], 2);
  }
  r = verify_cover_inequality(g, six);
  EXPECT_TRUE(r.holds);
  EXPECT_LT(r.log_z_cover, r.k_log_z_base);
  EXPECT_NEAR(r.log_z_cover, std::log(test::brute_z(h.graph)), 1e-12);
}

TEST(Covers, InequalityPrecondition) {
  const FactorGraph bad(2, test::ones(2), {{{0, 1}, PotentialTable(2, {1, 2, 2, 1})}});
  try {
    verify_cover_inequality(bad, CoverSpec::identity(bad, 2));
    FAIL() << "expected NotLogSupermodularError";
  } catch (const NotLogSupermodularError& e) {
    EXPECT_FALSE(e.witness().holds);
  }
}

TEST(Covers, EstimateKOne) {
  const auto g = test::triangle_model(5);
  const auto est = estimate_bethe_by_covers(g, 1, 10, 0);
  EXPECT_EQ(est.covers, 1u);
  EXPECT_TRUE(est.exhaustive);
  EXPECT_DOUBLE_EQ(est.log_estimate, partition_function(g));
}

TEST(Covers, EstimateOnTreeIsExact) {
  const auto g = test::path_model(3, 8);
  const double lz = partition_function(g);
  const auto sweep = cover_sweep(g, 2, 1, 0, CoverAverage::exhaustive);
  ASSERT_EQ(sweep.samples.size(), 16u);
  for (const auto& s : sweep.samples) EXPECT_NEAR(s.log_z, 2 * lz, 1e-12);
  EXPECT_NEAR(summarize_sweep(sweep).log_estimate, lz, 1e-12);
}

TEST(Covers, EstimateTriangleSandwich) {
  const auto g = test::triangle_model(6);
  const auto est = estimate_bethe_by_covers(g, 2, 1, 0, CoverAverage::exhaustive);
  EXPECT_EQ(est.covers, 64u);
  EXPECT_EQ(est.stderr_log, 0.0);
  const auto opt = optimize_bethe(g);
  EXPECT_LE(est.log_estimate, partition_function(g) + 1e-9);
  EXPECT_GE(est.log_estimate, opt.log_z_bethe_lower - 1e-9);
}

TEST(Covers, EstimateMatchesDirectAverage) {
  const auto g = test::triangle_model(7);
  const auto sweep = cover_sweep(g, 2, 1, 0, CoverAverage::exhaustive);
  double mean = 0.0;
  for (std::size_t j = 0; j < 64; ++j) {
    mean += test::brute_z(build_cover(g, cover_from_index(g, 2, j)).graph);
  }
  mean /= 64.0;
  EXPECT_NEAR(summarize_sweep(sweep).log_estimate, 0.5 * std::log(mean), 1e-12);
}

TEST(Covers, SampledEstimate) {
  const auto g = test::triangle_model(8);
  const auto a = estimate_bethe_by_covers(g, 3, 200, 11, CoverAverage::sampled);
  const auto b = estimate_bethe_by_covers(g, 3, 200, 11, CoverAverage::sampled);
  EXPECT_FALSE(a.exhaustive);
  EXPECT_EQ(a.covers, 200u);
  EXPECT_EQ(a.log_estimate, b.log_estimate);
  EXPECT_GT(a.stderr_log, 0.0);
  EXPECT_LE(a.log_estimate, partition_function(g) + 1e-9);
  EXPECT_TRUE(std::isnan(estimate_bethe_by_covers(g, 3, 1, 11, CoverAverage::sampled).stderr_log));
}

TEST(Covers, SweepCapacity) {
  EXPECT_THROW(cover_sweep(FactorGraph::uniform(9), 3, 10, 0), CapacityError);
}

// ---- properties ----------------------------------------------------------------

TEST(CoversProperty, RandomSpecsValidate) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 1000; ++t) {
    const auto g = test::random_model(t, 6);
    const std::size_t k = 1 + rng() % 4;
    const auto h = build_cover(g, sample_cover(g, k, rng()));
    ASSERT_TRUE(validate_cover(h));
    ASSERT_EQ(h.graph.num_variables(), k * g.num_variables());
    ASSERT_EQ(h.graph.num_factors(), k * g.num_factors());
  }
}

TEST(CoversProperty, LogSupermodularityInherited) {
  auto rng = make_rng(2);
  for (int t = 0; t < 100; ++t) {
    const auto g = random_attractive_model(rng, 5, 6, 2.0);
    ASSERT_TRUE(is_log_supermodular_factorization(g).holds);
    const auto h = build_cover(g, sample_cover(g, 2 + t % 3, rng()));
    ASSERT_TRUE(is_log_supermodular_factorization(h.graph).holds);
  }
}

TEST(CoversProperty, TheoremSevenSweep) {
  std::mt19937_64 rng(3);
  std::size_t exhaustive_models = 0;
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = 2 + rng() % 3;
    std::vector<Edge> all;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) all.emplace_back(i, j);
    }
    std::shuffle(all.begin(), all.end(), rng);
    all.resize(std::min<std::size_t>(all.size(), 1 + rng() % 4));  // <= 8 incidences
    const auto g = random_attractive_pairwise(n, all, 2.0, rng());
    const double lz = partition_function(g);
    const double bethe = optimize_bethe(g, {.restarts = 5, .seed = 1}).log_z_bethe_lower;
    for (const auto& spec : enumerate_covers(g, 2)) {
      const auto r = verify_cover_inequality(g, spec, lz);
      ASSERT_TRUE(r.holds) << r.log_z_cover << " > " << r.k_log_z_base;
      ASSERT_GE(r.log_z_cover, 2 * bethe - 1e-6);  // Z(H) >= Z_B(G)^k
    }
    ++exhaustive_models;
    for (int s = 0; s < 25; ++s) {
      const auto spec = sample_cover(g, 3, rng());
      const auto r = verify_cover_inequality(g, spec, lz);
      ASSERT_TRUE(r.holds) << r.log_z_cover << " > " << r.k_log_z_base;
      ASSERT_GE(r.log_z_cover, 3 * bethe - 1e-6);
    }
  }
  EXPECT_EQ(exhaustive_models, 40u);  // 40 * 25 = 1000 sampled 3-covers
}
