#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "testinj/citest.hpp"
#include "testinj/experiment.hpp"

using namespace testinj;

namespace {

const BackgroundKnowledge kBk{{"race", "gender", "age"}, {"is_testinj"}};
const std::vector<std::string> kFeatures = {"race", "gender", "age"};

// Reference outputs of xoshiro256** seeded by splitmix64, computed independently.
TEST(Xoshiro, ReferenceOutputs) {
  Xoshiro256 zero(0);
  EXPECT_EQ(zero.next(), 0x99ec5f36cb75f2b4ull);
  EXPECT_EQ(zero.next(), 0xbf6e1f784956452aull);
  EXPECT_EQ(zero.next(), 0x1a5f849d4933e6e0ull);
  Xoshiro256 answer(42);
  EXPECT_EQ(answer.next(), 0x15780b2e0c2ec716ull);
  EXPECT_EQ(answer.next(), 0x6104d9866d113a7eull);
  EXPECT_EQ(answer.next(), 0xae17533239e499a1ull);
}

TEST(Xoshiro, UniformUsesTop53Bits) {
  EXPECT_DOUBLE_EQ(Xoshiro256(0).uniform(), 0.6012629994179048);
  EXPECT_DOUBLE_EQ(Xoshiro256(42).uniform(), 0.08386297105988216);
  Xoshiro256 r(7);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Sample, ConstantNode) {
  SyntheticScm scm;
  scm.add_node("one", {}, {1.0});
  auto d = sample(scm, 500, 1);
  for (auto v : d.column("one")) EXPECT_EQ(v, 1);
}

TEST(Sample, CopyCpt) {
  SyntheticScm scm;
  auto a = scm.add_node("A", {}, {0.5});
  scm.add_node("B", {a}, {0.0, 1.0});
  auto d = sample(scm, 1000, 2);
  EXPECT_EQ(d.column("A"), d.column("B"));
}

TEST(Sample, IndependentCoinsAreUncorrelated) {
  SyntheticScm scm;
  scm.add_node("A", {}, {0.5});
  scm.add_node("B", {}, {0.5});
  auto d = sample(scm, 10000, 3);
  double ma = 0, mb = 0, mab = 0;
  for (std::size_t r = 0; r < d.rows(); ++r) {
    ma += d.at(r, 0);
    mb += d.at(r, 1);
    mab += d.at(r, 0) * d.at(r, 1);
  }
  const double n = static_cast<double>(d.rows());
  ma /= n;
  mb /= n;
  mab /= n;
  const double rho = (mab - ma * mb) / std::sqrt(ma * (1 - ma) * mb * (1 - mb));
  EXPECT_LT(std::abs(rho), 0.05);
}

TEST(Sample, ParentBitOrder) {
  // Row k uses bit i for parents[i]: only (p0=1, p1=0) gives 1.
  SyntheticScm scm;
  auto p0 = scm.add_node("p0", {}, {0.5});
  auto p1 = scm.add_node("p1", {}, {0.5});
  scm.add_node("c", {p0, p1}, {0.0, 1.0, 0.0, 0.0});
  auto d = sample(scm, 400, 4);
  for (std::size_t r = 0; r < d.rows(); ++r) EXPECT_EQ(d.at(r, 2), d.at(r, 0) && !d.at(r, 1));
}

TEST(Sample, FixedSeedReproducible) {
  auto scm = scenario_generator(9);
  EXPECT_EQ(sample(scm, 3000, 9), sample(scm, 3000, 9));
  EXPECT_NE(sample(scm, 3000, 9), sample(scm, 3000, 10));
}

TEST(Sample, PinnedFirstRows) {
  // One uniform draw per cell, nodes in topological order, so a one-node
  // model reproduces the generator's own comparisons.
  SyntheticScm scm;
  scm.add_node("x", {}, {0.5});
  auto d = sample(scm, 64, 0);
  Xoshiro256 rng(0);
  for (std::size_t r = 0; r < 64; ++r) EXPECT_EQ(d.at(r, 0), rng.uniform() < 0.5);
}

TEST(Sample, Errors) {
  SyntheticScm scm;
  auto a = scm.add_node("A", {}, {0.5});
  scm.add_node("B", {a}, {0.5});
  EXPECT_THROW(sample(scm, 10, 1), ValidationError);
  SyntheticScm bad_p;
  bad_p.add_node("A", {}, {1.5});
  EXPECT_THROW(sample(bad_p, 10, 1), ValidationError);
  SyntheticScm cyc;
  cyc.add_node("A", {1}, {0.5, 0.5});
  cyc.add_node("B", {0}, {0.5, 0.5});
  EXPECT_THROW(sample(cyc, 10, 1), ValidationError);
  SyntheticScm ok;
  ok.add_node("A", {}, {0.5});
  EXPECT_THROW(sample(ok, 0, 1), ValidationError);
}

TEST(Scenario, Structure) {
  auto scm = scenario_generator(1);
  scm.validate();
  EXPECT_EQ(scm.names.size(), 8u);
  const Dag d = scm.dag();
  auto edge = [&](const char* a, const char* b) { return d.has_edge(scm.index(a), scm.index(b)); };
  EXPECT_TRUE(edge("race", "evidentials"));
  EXPECT_TRUE(edge("race", "stigmatizing"));
  EXPECT_TRUE(edge("gender", "judgementals"));
  EXPECT_TRUE(edge("age", "judgementals"));
  EXPECT_TRUE(edge("evidentials", "negatives"));
  EXPECT_TRUE(edge("negatives", "stigmatizing"));
  EXPECT_TRUE(edge("judgementals", "is_testinj"));
  EXPECT_TRUE(edge("stigmatizing", "is_testinj"));
  EXPECT_TRUE(edge("evidentials", "is_testinj"));
  std::size_t edges = 0;
  for (std::size_t v = 0; v < 8; ++v) edges += d.parents(v).size();
  EXPECT_EQ(edges, 9u);
}

// Effect of each demographic on its direct child, as a risk difference.
TEST(Scenario, EffectStrengthsOrdered) {
  auto scm = scenario_generator(1);
  const auto& ev = scm.cpt[scm.index("evidentials")];
  const auto& jd = scm.cpt[scm.index("judgementals")];
  const double race = ev[1] - ev[0];
  // judgementals parents are (gender, age): bit 0 gender, bit 1 age.
  const double gender = ((jd[1] - jd[0]) + (jd[3] - jd[2])) / 2;
  const double age = ((jd[2] - jd[0]) + (jd[3] - jd[1])) / 2;
  EXPECT_GT(race, gender);
  EXPECT_GT(gender, age);
  EXPECT_GT(age, 0.0);
}

TEST(Scenario, RaceConnectsAtDefaultAlpha) {
  auto data = sample(scenario_generator(1), 50000, 1);
  DiscoveryConfig cfg;
  auto g = run(data, cfg, kBk).graph;
  EXPECT_TRUE(connected_nonisolated(g, "race"));
}

TEST(Scenario, CoarseningHidesIndividualDemographics) {
  auto data = coarsen(sample(scenario_generator(1), 20000, 1), kFeatures);
  EXPECT_EQ(data.names().front(), "is_marginalized");
  EXPECT_EQ(data.cols(), 6u);
  for (const auto& f : kFeatures) EXPECT_FALSE(data.index_of(f).has_value());
  auto g = run(data, {}, {{"is_marginalized"}, {"is_testinj"}}).graph;
  EXPECT_TRUE(connected_nonisolated(g, "is_marginalized"));
}

TEST(Coarsen, IsOrOfFlags) {
  auto data = sample(scenario_generator(3), 2000, 3);
  auto c = coarsen(data, kFeatures, "m");
  for (std::size_t r = 0; r < data.rows(); ++r)
    EXPECT_EQ(c.column("m")[r], data.column("race")[r] | data.column("gender")[r] | data.column("age")[r]);
  EXPECT_EQ(c.column("negatives"), data.column("negatives"));
}

TEST(DoubleData, Examples) {
  SyntheticScm scm;
  scm.add_node("a", {}, {0.5});
  scm.add_node("b", {}, {0.3});
  auto d = sample(scm, 5, 1);
  auto dd = double_data(d);
  ASSERT_EQ(dd.rows(), 10u);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 2; ++c) {
      EXPECT_EQ(dd.at(r, c), d.at(r, c));
      EXPECT_EQ(dd.at(r + 5, c), d.at(r, c));
    }
}

TEST(DoubleData, StatisticsDoubleAndPValuesShrink) {
  auto d = sample(scenario_generator(4), 3000, 4);
  auto dd = double_data(d);
  const auto& names = d.names();
  for (std::size_t x = 0; x < names.size(); ++x)
    for (std::size_t y = x + 1; y < names.size(); ++y) {
      std::vector<std::string> z;
      for (std::size_t w = 0; w < names.size() && z.size() < 2; ++w)
        if (w != x && w != y) z.push_back(names[w]);
      auto a = ci_test(d, names[x], names[y], z, 0.05);
      auto b = ci_test(dd, names[x], names[y], z, 0.05);
      EXPECT_NEAR(b.statistic, 2 * a.statistic, 1e-9 * (1 + a.statistic));
      EXPECT_LE(b.p_value, a.p_value + 1e-15);
    }
  for (std::size_t c = 0; c < d.cols(); ++c) {
    std::size_t ones = 0, ones2 = 0;
    for (auto v : d.column(c)) ones += v;
    for (auto v : dd.column(c)) ones2 += v;
    EXPECT_EQ(2 * ones, ones2);
  }
}

TEST(Sweep, SingletonGridMatchesDirectRun) {
  auto data = sample(scenario_generator(2), 5000, 2);
  DiscoveryConfig cfg;
  cfg.alpha = 0.5;
  auto s = alpha_sweep(data, {0.05}, cfg, kBk, {kFeatures});
  cfg.alpha = 0.05;
  ASSERT_EQ(s.points.size(), 1u);
  EXPECT_EQ(s.points[0].graph, run(data, cfg, kBk).graph);
}

TEST(Sweep, StronglyDependentPairConnects) {
  SyntheticScm scm;
  auto a = scm.add_node("f", {}, {0.5});
  scm.add_node("is_testinj", {a}, {0.1, 0.9});
  auto data = sample(scm, 2000, 1);
  auto s = alpha_sweep(data, {0.05}, {}, {{"f"}, {"is_testinj"}}, {{"f"}});
  EXPECT_EQ(s.points[0].connected, std::vector<std::string>{"f"});
  EXPECT_EQ(s.points[0].reaches_outcome, std::vector<std::string>{"f"});
  EXPECT_EQ(s.minimal_or_inf("f"), 0.05);
}

TEST(Sweep, IndependentCoinsRarelyConnect) {
  int quiet = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SyntheticScm scm;
    for (const char* n : {"race", "gender", "age", "evidentials", "is_testinj"}) scm.add_node(n, {}, {0.5});
    auto s = alpha_sweep(sample(scm, 2000, seed), {0.01, 0.05, 0.2}, {}, kBk, {kFeatures});
    bool any = false;
    for (const auto& p : s.points)
      if (p.alpha <= 0.01) any |= !p.connected.empty();
    quiet += !any;
  }
  EXPECT_GE(quiet, 7);
}

TEST(Sweep, MinimalAlphaIsFirstConnectedPoint) {
  auto data = sample(scenario_generator(3), 8000, 3);
  auto s = alpha_sweep(data, default_alpha_grid(), {}, kBk, {kFeatures, "is_testinj", 4});
  ASSERT_EQ(s.points.size(), default_alpha_grid().size());
  for (const auto& f : kFeatures) {
    std::optional<double> first;
    for (const auto& p : s.points)
      if (!first && std::find(p.connected.begin(), p.connected.end(), f) != p.connected.end()) first = p.alpha;
    EXPECT_EQ(s.minimal_alpha.at(f), first);
  }
}

TEST(Sweep, ParallelMatchesSerial) {
  auto data = sample(scenario_generator(4), 4000, 4);
  const std::vector<double> grid = {0.01, 0.05, 0.2, 0.5};
  auto serial = alpha_sweep(data, grid, {}, kBk, {kFeatures, "is_testinj", 1});
  auto parallel = alpha_sweep(data, grid, {}, kBk, {kFeatures, "is_testinj", 4});
  EXPECT_EQ(sweep_json(serial).dump(), sweep_json(parallel).dump());
}

TEST(Sweep, Errors) {
  auto data = sample(scenario_generator(1), 200, 1);
  EXPECT_THROW(alpha_sweep(data, {}, {}, kBk, {kFeatures}), ValidationError);
  EXPECT_THROW(alpha_sweep(data, {0.1, 0.05}, {}, kBk, {kFeatures}), ValidationError);
  EXPECT_THROW(alpha_sweep(data, {0.1, 1.0}, {}, kBk, {kFeatures}), ValidationError);
  EXPECT_THROW(alpha_sweep(data, {0.1}, {}, kBk, {{"nope"}}), ValidationError);
  EXPECT_THROW(alpha_sweep(data, {0.1}, {}, kBk, {}), ValidationError);
}

TEST(Sweep, TableAndJson) {
  auto data = sample(scenario_generator(5), 3000, 5);
  auto s = alpha_sweep(data, {0.01, 0.3}, {}, kBk, {kFeatures});
  std::ostringstream out;
  print_sweep_table(out, s);
  EXPECT_EQ(out.str().rfind("alpha", 0), 0u);
  EXPECT_NE(out.str().find("minimal alpha:"), std::string::npos);
  auto j = sweep_json(s);
  EXPECT_EQ(j["grid"].size(), 2u);
  EXPECT_EQ(j["points"].size(), 2u);
  EXPECT_TRUE(j["points"][0]["graph"].contains("edges"));
}

TEST(DefaultGrid, AscendingAndContainsNamedValues) {
  const auto& g = default_alpha_grid();
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_LT(g[i - 1], g[i]);
  for (double a : {0.001, 0.01, 0.05, 0.12, 0.23, 0.57})
    EXPECT_NE(std::find(g.begin(), g.end(), a), g.end()) << a;
}

}  // namespace
