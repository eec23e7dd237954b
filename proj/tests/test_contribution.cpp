// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "favoa/favoa.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace favoa;

namespace {

std::vector<ContributionRecord> records_of(const std::vector<double>& degrees) {
  std::vector<ContributionRecord> out;
  for (std::size_t i = 0; i < degrees.size(); ++i) out.push_back({"r" + std::to_string(i), degrees[i]});
  return out;
}

}  // namespace

TEST(Degree, CountsStrictlyAboveHalf) {
  EXPECT_EQ(degree_of_contribution(std::vector<double>{0.6, 0.4, 0.7, 0.2}), 0.5);
  EXPECT_EQ(degree_of_contribution(std::vector<double>{0.5, 0.5}), 0.0);
  EXPECT_EQ(degree_of_contribution(std::vector<double>(7, 0.9)), 1.0);
  EXPECT_THROW(degree_of_contribution(std::vector<double>{}), ContractError);
}

TEST(Degree, MatchesDirectCountingAndIgnoresOrder) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> p(1 + rng() % 64);
    for (double& x : p) x = (rng() % 5 == 0) ? 0.5 : u(rng);
    const double d = degree_of_contribution(p);
    EXPECT_EQ(d, oracle::degree(p));
    std::shuffle(p.begin(), p.end(), rng);
    EXPECT_EQ(degree_of_contribution(p), d);
  }
}

TEST(Histogram, SmallCases) {
  const auto one = build_histogram(records_of({0.0}));
  EXPECT_EQ(one.counts.size(), 40u);
  EXPECT_EQ(one.counts[0], 1u);
  EXPECT_EQ(build_histogram(records_of({0.1, 0.1, 0.9}), 0.5).counts, (std::vector<std::size_t>{2, 1}));
  EXPECT_EQ(build_histogram(records_of({0.5, 1.0, 0.25}), 0.5).counts, (std::vector<std::size_t>{1, 2}));
  EXPECT_THROW(build_histogram(records_of({0.1}), 0.3), ContractError);
  EXPECT_THROW(build_histogram(records_of({0.1}), 0.0), ContractError);
  EXPECT_THROW(build_histogram(records_of({}), 0.5), ContractError);
  EXPECT_THROW(build_histogram(records_of({1.5}), 0.5), ContractError);
}

TEST(Histogram, GridDegreesMatchDirectTally) {
  std::vector<double> grid;
  for (int i = 0; i <= 100; ++i) grid.push_back(i / 100.0);
  const auto h = build_histogram(records_of(grid), 0.025);
  EXPECT_EQ(h.counts, oracle::tally(grid, 40));
  EXPECT_EQ(h.total(), grid.size());
  for (std::size_t i = 0; i < h.lower_edges.size(); ++i) EXPECT_NEAR(h.lower_edges[i], 0.025 * double(i), 1e-15);
}

TEST(Histogram, CountsAlwaysSumToRecords) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> d(1 + rng() % 300);
    const std::size_t denom = 1 + rng() % 48;
    for (double& x : d) x = double(rng() % (denom + 1)) / double(denom);
    for (double width : {1.0, 0.5, 0.25, 0.1, 0.05, 0.025, 0.02}) {
      const auto h = build_histogram(records_of(d), width);
      EXPECT_EQ(h.total(), d.size());
      EXPECT_EQ(h.counts, oracle::tally(d, h.counts.size())) << "width " << width;
    }
  }
}

TEST(Summary, StatisticsOfKnownDegrees) {
  const auto s = summarize(records_of({0.1, 0.2, 0.4, 0.0}));
  EXPECT_EQ(s.count, 4u);
  EXPECT_NEAR(s.mean, 0.175, 1e-15);
  EXPECT_NEAR(s.median, 0.15, 1e-15);
  EXPECT_EQ(s.frac_gt_015, 0.5);
  EXPECT_EQ(s.frac_gt_030, 0.25);
  const auto j = to_json(s);
  for (const char* key : {"mean", "median", "frac_gt_0.15", "frac_gt_0.30"}) EXPECT_TRUE(j.contains(key)) << key;
}

TEST(Analyze, SaturatedAndNeutralGates) {
  const Dataset data = fixture::small_dataset();
  const ModelConfig c = fixture::desk_config();
  const FeatureProvider provider(data, c.ste_dim, c.voice_dim);
  const auto entries = data.entries();

  auto params = FavoaParams::init(c, 3);
  params.gbu.gate_bias = Tensor::filled({c.fused_dim()}, 50.0, true);
  for (const auto& r : analyze(FavoaModel(params.clone(), c, provider), data, entries).records)
    EXPECT_EQ(r.degree, 1.0) << r.entry_id;

  params.gbu.gate_weight = Tensor::zeros({c.fused_dim(), 2 * c.fused_dim()}, true);
  params.gbu.gate_bias = Tensor::zeros({c.fused_dim()}, true);
  const auto neutral = analyze(FavoaModel(params.clone(), c, provider), data, entries);
  for (const auto& r : neutral.records) EXPECT_EQ(r.degree, 0.0) << r.entry_id;
  EXPECT_EQ(neutral.histogram.counts[0], entries.size());
}

TEST(Analyze, RecordsFollowTracesAndRaisingGateBiasNeverLowersDegree) {
  const Dataset data = fixture::small_dataset(4);
  const ModelConfig c = fixture::desk_config();
  const FeatureProvider provider(data, c.ste_dim, c.voice_dim);
  const auto entries = data.entries();
  auto params = FavoaParams::init(c, 8);
  const FavoaModel base(params.clone(), c, provider);
  const auto a = analyze(base, data, entries, 0.05);
  ASSERT_EQ(a.records.size(), entries.size());
  EXPECT_EQ(a.histogram.total(), entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    EXPECT_EQ(a.records[i].entry_id, data.entry_id(entries[i]));
    EXPECT_EQ(a.records[i].degree, degree_of_contribution(base.forward(data.context(entries[i])).p.data()));
  }
  for (double shift : {0.01, 0.1, 0.5, 2.0}) {
    auto raised = params.clone();
    auto bias = raised.gbu.gate_bias.to_vector();
    for (double& b : bias) b += shift;
    raised.gbu.gate_bias = Tensor::vector(bias, true);
    const auto b = analyze(FavoaModel(std::move(raised), c, provider), data, entries);
    for (std::size_t i = 0; i < entries.size(); ++i) EXPECT_GE(b.records[i].degree, a.records[i].degree);
  }
}

TEST(Analyze, CsvLayout) {
  const auto recs = std::vector<ContributionRecord>{{"s00001_t00001_f000003", 0.25, RawLabel::speaking_audible, 0.75}};
  std::ostringstream out;
  write_contributions_csv(out, recs);
  EXPECT_EQ(out.str(), "entry_id,degree,label,score\ns00001_t00001_f000003,0.25,speaking_audible,0.75\n");
  std::ostringstream hist;
  write_histogram_csv(hist, build_histogram(recs, 0.5));
  EXPECT_EQ(hist.str(), "bin_lower,count\n0,1\n0.5,0\n");
}
