#include <gtest/gtest.h>

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "testinj/labeling.hpp"

using namespace testinj;

namespace {

Lexicon tiny_lexicon() {
  std::istringstream in("evidential\treports\njudgemental\tclaims\nnegative\tdefensive\nstigmatizing\tnon-compliant\n");
  return load_base_lexicon(in);
}

Patient patient(std::vector<std::string> notes, Gender g = Gender::Male, Race r = Race::White,
                AgeGroup a = AgeGroup::Adult) {
  Patient p{PatientKey{"p", g, r, "dx"}, a, std::move(notes), 0};
  p.record_count = p.notes.size();
  return p;
}

PatientRates rates(double ev, double jd = 0, double ng = 0, double st = 0) {
  PatientRates r{PatientKey{"p", Gender::Male, Race::White, "dx"}, {}};
  r.rate[TermCategory::Evidential] = ev;
  r.rate[TermCategory::Judgemental] = jd;
  r.rate[TermCategory::Negative] = ng;
  r.rate[TermCategory::Stigmatizing] = st;
  return r;
}

std::vector<int> column_ints(const BinaryDataset& d, const std::string& name) {
  const auto& c = d.column(name);
  return {c.begin(), c.end()};
}

TEST(ComputeRates, Examples) {
  auto lex = tiny_lexicon();
  auto r = compute_rates(patient({"reports reports reports", "reports"}), lex);
  EXPECT_DOUBLE_EQ(r.rate[TermCategory::Evidential], 2.0);

  r = compute_rates(patient({"", ""}), lex);
  for (auto c : kAllCategories) EXPECT_EQ(r.rate[c], 0.0);

  r = compute_rates(patient({"reports reports claims non-compliant non-compliant non-compliant non-compliant"}), lex);
  EXPECT_EQ(r.rate[TermCategory::Evidential], 2.0);
  EXPECT_EQ(r.rate[TermCategory::Judgemental], 1.0);
  EXPECT_EQ(r.rate[TermCategory::Negative], 0.0);
  EXPECT_EQ(r.rate[TermCategory::Stigmatizing], 4.0);
}

TEST(ComputeRates, ZeroRecordsIsError) {
  Patient p{PatientKey{"p", Gender::Male, Race::White, "dx"}, AgeGroup::Adult, {}, 0};
  EXPECT_THROW(compute_rates(p, tiny_lexicon()), ValidationError);
}

TEST(Threshold, Examples) {
  std::vector<double> v = {0, 0, 1, 2, 3, 4, 5, 6, 7, 9};
  EXPECT_NEAR(category_threshold(v, {ThresholdMode::Percentile90, 0.10}), 0.7, 1e-12);
  std::vector<double> zeros(7, 0.0);
  EXPECT_EQ(category_threshold(zeros, {}), 0.0);
  std::vector<double> one = {10};
  EXPECT_NEAR(category_threshold(one, {ThresholdMode::Maximum, 0.10}), 1.0, 1e-12);
}

TEST(Threshold, NearestRank) {
  EXPECT_EQ(percentile90_rank(1), 1u);
  EXPECT_EQ(percentile90_rank(9), 9u);
  EXPECT_EQ(percentile90_rank(10), 9u);
  EXPECT_EQ(percentile90_rank(11), 10u);
  EXPECT_EQ(percentile90_rank(20), 18u);
  EXPECT_EQ(percentile90_rank(21), 19u);
}

TEST(Threshold, Errors) {
  std::vector<double> none;
  EXPECT_THROW(category_threshold(none, {}), ValidationError);
  std::vector<double> v = {1};
  EXPECT_THROW(category_threshold(v, {ThresholdMode::Maximum, 0.0}), ValidationError);
  EXPECT_THROW(category_threshold(v, {ThresholdMode::Maximum, 1.5}), ValidationError);
}

TEST(Demographics, Examples) {
  auto f = binarize_demographics(patient({"x"}, Gender::Female, Race::Black, AgeGroup::Senior));
  EXPECT_EQ(f, (DemographicFlags{1, 1, 1}));
  f = binarize_demographics(patient({"x"}, Gender::Male, Race::White, AgeGroup::Adult));
  EXPECT_EQ(f, (DemographicFlags{0, 0, 0}));
  f = binarize_demographics(patient({"x"}, Gender::Male, Race::Asian, AgeGroup::Child));
  EXPECT_EQ(f, (DemographicFlags{0, 0, 1}));
  f = binarize_demographics(patient({"x"}, Gender::Male, Race::Latino, AgeGroup::Adult));
  EXPECT_EQ(f, (DemographicFlags{0, 1, 0}));
}

TEST(Demographics, CoarseIsOr) {
  EXPECT_EQ(coarse_marginalization({0, 0, 0}), 0);
  EXPECT_EQ(coarse_marginalization({0, 1, 0}), 1);
  EXPECT_EQ(coarse_marginalization({1, 1, 1}), 1);
  for (int m = 0; m < 8; ++m) {
    DemographicFlags f{static_cast<std::uint8_t>(m & 1), static_cast<std::uint8_t>(m >> 1 & 1),
                       static_cast<std::uint8_t>(m >> 2 & 1)};
    EXPECT_EQ(coarse_marginalization(f), m != 0);
  }
}

TEST(BuildDataset, Examples) {
  auto lex = tiny_lexicon();
  auto all_zero = build_dataset({patient({"hello"}), patient({"nothing"})}, lex, {});
  EXPECT_EQ(column_ints(all_zero.dataset, kOutcomeColumn), (std::vector<int>{0, 0}));

  std::vector<DemographicFlags> flags(3);
  auto three = build_dataset_from_rates(flags, {rates(0), rates(5), rates(10)}, {});
  EXPECT_NEAR(three.thresholds[TermCategory::Evidential], 1.0, 1e-12);
  EXPECT_EQ(column_ints(three.dataset, "evidentials"), (std::vector<int>{0, 1, 1}));

  auto stig = build_dataset_from_rates(std::vector<DemographicFlags>(2), {rates(0, 0, 0, 3), rates(0)}, {});
  EXPECT_EQ(column_ints(stig.dataset, "stigmatizing"), (std::vector<int>{1, 0}));
  EXPECT_EQ(column_ints(stig.dataset, kOutcomeColumn), (std::vector<int>{1, 0}));
}

TEST(BuildDataset, ColumnOrder) {
  std::vector<DemographicFlags> flags(1);
  auto fine = build_dataset_from_rates(flags, {rates(1)}, {});
  EXPECT_EQ(fine.dataset.names(),
            (std::vector<std::string>{kGenderColumn, kRaceColumn, kAgeColumn, "evidentials", "judgementals",
                                      "negatives", "stigmatizing", kOutcomeColumn}));
  auto coarse = build_dataset_from_rates(flags, {rates(1)}, {{}, Granularity::Coarse});
  EXPECT_EQ(coarse.dataset.names(), (std::vector<std::string>{kCoarseColumn, "evidentials", "judgementals",
                                                              "negatives", "stigmatizing", kOutcomeColumn}));
}

TEST(BuildDataset, EmptyPopulationIsError) {
  EXPECT_THROW(build_dataset({}, tiny_lexicon(), {}), ValidationError);
}

struct Population {
  std::vector<DemographicFlags> flags;
  std::vector<PatientRates> rates;
  std::vector<oracle::LabelRow> rows;
};

Population random_population(std::mt19937& rng, std::size_t n) {
  Population p;
  std::uniform_int_distribution<int> count(0, 12), bit(0, 1), recs(1, 4);
  for (std::size_t i = 0; i < n; ++i) {
    DemographicFlags f{static_cast<std::uint8_t>(bit(rng)), static_cast<std::uint8_t>(bit(rng)),
                       static_cast<std::uint8_t>(bit(rng))};
    // Rates are term totals over record counts, so ties and zeros are common.
    const double rc = recs(rng);
    auto r = rates(count(rng) / rc, count(rng) / rc, (bit(rng) ? count(rng) : 0) / rc, count(rng) / rc);
    oracle::LabelRow row{f.gender, f.race, f.age, {}};
    for (auto c : kAllCategories) row.rate[index_of(c)] = r.rate[c];
    p.flags.push_back(f);
    p.rates.push_back(r);
    p.rows.push_back(row);
  }
  return p;
}

std::vector<std::vector<int>> rows_of(const BinaryDataset& d) {
  std::vector<std::vector<int>> out(d.rows());
  for (std::size_t r = 0; r < d.rows(); ++r)
    for (std::size_t c = 0; c < d.cols(); ++c) out[r].push_back(d.at(r, c));
  return out;
}

TEST(BuildDataset, MatchesBruteForceOracle) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t n = 1 + rng() % 20;
    auto pop = random_population(rng, n);
    const bool percentile = trial % 2 == 0;
    const bool coarse = trial % 3 == 0;
    const bool any = trial % 5 != 0;
    const double fraction = (trial % 7 == 0) ? 1.0 : 0.1 + 0.1 * (trial % 4);
    LabelingOptions opt{{percentile ? ThresholdMode::Percentile90 : ThresholdMode::Maximum, fraction},
                        coarse ? Granularity::Coarse : Granularity::Fine,
                        any ? OutcomeRule::Any : OutcomeRule::All};
    auto got = build_dataset_from_rates(pop.flags, pop.rates, opt);
    ASSERT_EQ(rows_of(got.dataset), oracle::label(pop.rows, percentile, fraction, coarse, any)) << "trial " << trial;
  }
}

TEST(BuildDataset, DisjunctionAndCoarseLaws) {
  std::mt19937 rng(8);
  auto pop = random_population(rng, 200);
  auto fine = build_dataset_from_rates(pop.flags, pop.rates, {}).dataset;
  auto coarse = build_dataset_from_rates(pop.flags, pop.rates, {{}, Granularity::Coarse}).dataset;
  for (std::size_t r = 0; r < fine.rows(); ++r) {
    const int any = fine.at(r, 3) | fine.at(r, 4) | fine.at(r, 5) | fine.at(r, 6);
    EXPECT_EQ(fine.at(r, 7), any);
    EXPECT_EQ(coarse.at(r, 0), fine.at(r, 0) | fine.at(r, 1) | fine.at(r, 2));
  }
}

TEST(BuildDataset, ScalingRatesLeavesIndicatorsUnchanged) {
  std::mt19937 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    auto pop = random_population(rng, 1 + rng() % 30);
    const double k = 0.25 + (rng() % 100) / 10.0;
    auto scaled = pop.rates;
    for (auto& r : scaled)
      for (auto c : kAllCategories) r.rate[c] *= k;
    for (auto mode : {ThresholdMode::Percentile90, ThresholdMode::Maximum}) {
      LabelingOptions opt{{mode, 0.5}};
      EXPECT_EQ(build_dataset_from_rates(pop.flags, pop.rates, opt).dataset,
                build_dataset_from_rates(pop.flags, scaled, opt).dataset);
    }
  }
}

// Raising one patient's rate can lift the threshold, but never above that
// patient's new rate while fraction < 1, so its own indicator stays on.
TEST(BuildDataset, RaisingARateKeepsThatIndicatorOn) {
  std::mt19937 rng(10);
  for (int trial = 0; trial < 300; ++trial) {
    auto pop = random_population(rng, 1 + rng() % 20);
    LabelingOptions opt{{trial % 2 ? ThresholdMode::Maximum : ThresholdMode::Percentile90, 0.1 + 0.1 * (trial % 9)}};
    const auto before = build_dataset_from_rates(pop.flags, pop.rates, opt).dataset;
    const std::size_t i = rng() % pop.rates.size();
    const auto cat = kAllCategories[rng() % 4];
    auto raised = pop.rates;
    raised[i].rate[cat] += 1 + rng() % 10;
    const auto after = build_dataset_from_rates(pop.flags, raised, opt).dataset;
    const std::string col(category_column(cat));
    EXPECT_LE(before.column(col)[i], after.column(col)[i]);
    EXPECT_LE(before.column(kOutcomeColumn)[i], after.column(kOutcomeColumn)[i]);
  }
}

}  // namespace
