#include "bwest/metrics_stats.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "bwest/error.hpp"
#include "test_support.hpp"

namespace bwest {
namespace {

using testing::sample;

using testing::brute_bounds;

TEST(Summarize, ZeroTo99Milliseconds) {
  std::vector<ProbeSample> samples;
  for (int i = 0; i < 100; ++i) samples.push_back(sample(i, 800, i * 1e-3));
  const auto s = summarize(samples);
  ASSERT_TRUE(s.delays);
  EXPECT_DOUBLE_EQ(s.delays->lower_2_5_s, 2e-3);
  EXPECT_DOUBLE_EQ(s.delays->upper_97_5_s, 97e-3);
  EXPECT_NEAR(s.delays->mean_s, 49.5e-3, 1e-15);
  EXPECT_NEAR(s.delays->jitter_s, 1e-3, 1e-15);
  EXPECT_EQ(s.loss_rate, 0.0);
}

TEST(Summarize, ConstantSeries) {
  std::vector<ProbeSample> samples;
  for (int i = 0; i < 50; ++i) samples.push_back(sample(i, 800, 0.010));
  const auto s = summarize(samples);
  EXPECT_EQ(s.delays->jitter_s, 0.0);
  EXPECT_EQ(s.delays->lower_2_5_s, 0.010);
  EXPECT_EQ(s.delays->upper_97_5_s, 0.010);
  EXPECT_NEAR(s.delays->mean_s, 0.010, 1e-15);
}

TEST(Summarize, LossRate) {
  std::vector<ProbeSample> samples;
  for (int i = 0; i < 100; ++i) {
    samples.push_back(sample(i, 800, i % 10 == 3 ? std::nullopt : std::optional(0.02)));
  }
  const auto s = summarize(samples);
  EXPECT_EQ(s.n_total, 100u);
  EXPECT_EQ(s.n_lost, 10u);
  EXPECT_EQ(s.loss_rate, 0.10);
}

TEST(Summarize, AllLostAndEmpty) {
  std::vector<ProbeSample> samples{sample(0, 800, std::nullopt), sample(1, 800, std::nullopt)};
  const auto s = summarize(samples);
  EXPECT_FALSE(s.delays);
  EXPECT_EQ(s.loss_rate, 1.0);
  EXPECT_THROW(summarize({}), Error);
  try {
    summarize({});
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoSamples);
  }
}

TEST(Summarize, JitterSkipsLostSamples) {
  const std::vector<ProbeSample> samples{sample(0, 800, 0.010), sample(1, 800, std::nullopt),
                                         sample(2, 800, 0.016), sample(3, 800, 0.012)};
  EXPECT_NEAR(summarize(samples).delays->jitter_s, (0.006 + 0.004) / 2, 1e-15);
}

class StatsProperties : public ::testing::Test {
 protected:
  std::mt19937_64 rng{0x57a75};

  std::vector<ProbeSample> random_samples() {
    std::uniform_int_distribution<int> len(1, 400);
    std::exponential_distribution<double> delay(100.0);
    std::bernoulli_distribution lost(0.05);
    std::vector<ProbeSample> out;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) {
      out.push_back(sample(i, 800, lost(rng) ? std::nullopt : std::optional(delay(rng))));
    }
    return out;
  }
};

TEST_F(StatsProperties, BoundsMatchBruteForceOracle) {
  for (int trial = 0; trial < 1000; ++trial) {
    const auto samples = random_samples();
    const auto s = summarize(samples);
    std::vector<double> delays;
    std::size_t lost = 0;
    for (const auto& x : samples) {
      if (x.lost()) ++lost;
      else delays.push_back(*x.rtt_s);
    }
    ASSERT_EQ(s.n_lost, lost);
    ASSERT_EQ(s.loss_rate, static_cast<double>(lost) / static_cast<double>(samples.size()));
    if (delays.empty()) {
      ASSERT_FALSE(s.delays);
      continue;
    }
    const auto [lo, hi] = brute_bounds(delays);
    ASSERT_EQ(s.delays->lower_2_5_s, lo);
    ASSERT_EQ(s.delays->upper_97_5_s, hi);
  }
}

TEST_F(StatsProperties, JitterTranslationInvariant) {
  for (int trial = 0; trial < 200; ++trial) {
    auto samples = random_samples();
    const auto a = summarize(samples);
    for (auto& s : samples) {
      if (s.rtt_s) *s.rtt_s += 0.125;
    }
    const auto b = summarize(samples);
    if (!a.delays) continue;
    ASSERT_NEAR(a.delays->jitter_s, b.delays->jitter_s, 1e-12);
  }
}

TEST_F(StatsProperties, PermutationInvariantExceptJitter) {
  for (int trial = 0; trial < 200; ++trial) {
    auto samples = random_samples();
    const auto a = summarize(samples);
    std::vector<std::optional<double>> delays;
    for (const auto& s : samples) delays.push_back(s.rtt_s);
    std::shuffle(delays.begin(), delays.end(), rng);
    for (std::size_t i = 0; i < samples.size(); ++i) samples[i].rtt_s = delays[i];
    const auto b = summarize(samples);
    ASSERT_EQ(a.loss_rate, b.loss_rate);
    if (!a.delays) continue;
    ASSERT_EQ(a.delays->lower_2_5_s, b.delays->lower_2_5_s);
    ASSERT_EQ(a.delays->upper_97_5_s, b.delays->upper_97_5_s);
    ASSERT_NEAR(a.delays->mean_s, b.delays->mean_s, 1e-12);
  }
}

TEST(JitterSeries, ConstantIsZero) {
  std::vector<ProbeSample> samples;
  for (int i = 0; i < 30; ++i) samples.push_back(sample(i, 800, 0.02));
  const auto series = jitter_series(samples, 10);
  ASSERT_EQ(series.size(), 21u);
  for (const auto& p : series) EXPECT_EQ(p.jitter_s, 0.0);
}

TEST(JitterSeries, AlternatingDelays) {
  std::vector<ProbeSample> samples;
  for (int i = 0; i < 40; ++i) samples.push_back(sample(i, 800, i % 2 ? 0.020 : 0.010));
  const auto series = jitter_series(samples, 10);
  ASSERT_FALSE(series.empty());
  for (const auto& p : series) EXPECT_NEAR(p.jitter_s, 0.010, 1e-15);
  EXPECT_EQ(series.front().timestamp_us, samples[9].sent_at_us);
  EXPECT_EQ(series.back().timestamp_us, samples.back().sent_at_us);
}

TEST(JitterSeries, Errors) {
  const std::vector<ProbeSample> one{sample(0, 800, 0.01)};
  try {
    jitter_series(one, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientSamples);
  }
  EXPECT_THROW(jitter_series(one, 1), Error);
}

}  // namespace
}  // namespace bwest
