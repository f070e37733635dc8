#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>

#include "bethe/exact.hpp"
#include "bethe/fuzz.hpp"
#include "bethe/io.hpp"
#include "test_util.hpp"

using namespace bethe;

namespace {

std::string parse_error_message(const std::string& text) {
  try {
    parse_model(text, "in.json");
  } catch (const ParseError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Io, FormatRealRoundTrips) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int t = 0; t < 1000; ++t) {
    const double v = std::exp(u(rng));
    EXPECT_EQ(std::stod(format_real(v)), v);
  }
  EXPECT_EQ(format_real(0.1), "0.10000000000000001");
}

TEST(Io, ModelRoundTrip) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto g = test::random_model(seed, 6);
    EXPECT_EQ(parse_model(model_to_text(g)), g) << model_to_text(g);
  }
}

TEST(Io, LoadsSampleFiles) {
  const auto g = load_model(test::data("two_variable.json"));
  EXPECT_EQ(g.num_variables(), 2u);
  EXPECT_NEAR(partition_function(g), std::log(6.0), 1e-14);
  const auto c4 = load_graph(test::data("c4.json"));
  EXPECT_EQ(c4.n, 4u);
  EXPECT_EQ(c4.edges.size(), 4u);
  const auto edge = load_graph(test::data("edge.json"));
  ASSERT_TRUE(edge.partition.has_value());
  EXPECT_EQ(*edge.partition, std::vector<std::size_t>{0});
}

TEST(Io, MalformedReportsLineAndColumn) {
  try {
    load_model(test::data("malformed.json"));
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("malformed.json:3:50"), std::string::npos) << e.what();
  }
  EXPECT_NE(parse_error_message("{\n\"n\": }").find("in.json:2:6"), std::string::npos);
}

TEST(Io, MissingFieldsAndBadShapes) {
  EXPECT_NE(parse_error_message(R"({"unary": []})").find("\"n\""), std::string::npos);
  EXPECT_NE(parse_error_message(R"({"n": 1})").find("\"unary\""), std::string::npos);
  EXPECT_NE(parse_error_message(R"({"n": 1, "unary": [[1]]})").find("unary[0]"),
            std::string::npos);
  EXPECT_NE(parse_error_message(
                R"({"n": 2, "unary": [[1,1],[1,1]], "factors": [{"scope": [0,1], "table": [1,2]}]})")
                .find("factors[0]"),
            std::string::npos);
  // structural errors surface as parse errors naming the source
  EXPECT_NE(parse_error_message(
                R"({"n": 2, "unary": [[1,1],[1,1]], "factors": [{"scope": [1,0], "table": [1,1,1,1]}]})")
                .find("in.json"),
            std::string::npos);
  EXPECT_THROW(parse_model(R"({"n": 1, "unary": [[-1, 1]]})"), ParseError);
  EXPECT_THROW(load_model("/nonexistent/model.json"), Error);
}

TEST(Io, GraphRoundTrip) {
  SimpleGraph g{5, {{0, 1}, {1, 2}, {3, 4}}, std::vector<std::size_t>{0, 2, 3}};
  const auto h = parse_graph(graph_to_text(g));
  EXPECT_EQ(h.n, g.n);
  EXPECT_EQ(h.edges, g.edges);
  EXPECT_EQ(h.partition, g.partition);
  g.partition.reset();
  EXPECT_FALSE(parse_graph(graph_to_text(g)).partition.has_value());
  EXPECT_THROW(parse_graph(R"({"n": 2, "edges": [[0]]})"), ParseError);
}

TEST(Io, CoverRoundTrip) {
  const auto g = test::triangle_model(3);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto spec = sample_cover(g, 3, s);
    EXPECT_EQ(parse_cover(cover_to_text(spec)), spec);
  }
  EXPECT_THROW(parse_cover(R"({"perms": []})"), ParseError);
}

TEST(Io, TauRoundTripIsExact) {
  Rng rng = make_rng(11);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto g = test::random_model(seed, 6);
    if (partition_function(g) == -INFINITY) continue;
    const auto tau = random_feasible_tau(g, rng);
    EXPECT_EQ(parse_tau(tau_to_text(tau)), tau);
    EXPECT_EQ(tau_from_json(tau_to_json(tau)), tau);
  }
  EXPECT_THROW(parse_tau(R"({"nodes": [[0.5]], "factors": []})"), ParseError);
}
