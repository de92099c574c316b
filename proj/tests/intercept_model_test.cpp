#include "bwest/intercept_model.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <random>

#include "bwest/error.hpp"
#include "test_support.hpp"

namespace bwest {
namespace {

using testing::rel_near;

using testing::kAlpha;
using testing::kBeta;
using testing::normal_equations;
using testing::synthetic;

ErrorCode error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected bwest::Error";
  return ErrorCode::InvalidArgument;
}

TEST(FitInterceptModel, ExactRecovery) {
  std::mt19937_64 rng(11);
  const auto obs = synthetic(rng, 10);
  const auto model = fit_intercept_model(obs);
  EXPECT_TRUE(rel_near(model.alpha_s_per_hop, kAlpha, 1e-9));
  EXPECT_TRUE(rel_near(model.beta_s_per_km, kBeta, 1e-9));
  EXPECT_LT(model.residual_rms_s, 1e-15);
  EXPECT_EQ(model.n_observations, 10u);
  EXPECT_FALSE(model.has_constant);
}

TEST(FitInterceptModel, ExactRecoveryRandomCoefficients) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> coef(1e-6, 1e-2);
  for (int trial = 0; trial < 200; ++trial) {
    const double alpha = coef(rng);
    const double beta = coef(rng) * 1e-2;
    auto obs = synthetic(rng, 2 + trial % 20);
    for (auto& o : obs) {
      o.intercept_s = alpha * o.features.hop_count + beta * o.features.route_length_km;
    }
    try {
      const auto model = fit_intercept_model(obs);
      ASSERT_TRUE(rel_near(model.alpha_s_per_hop, alpha, 1e-9)) << trial;
      ASSERT_TRUE(rel_near(model.beta_s_per_km, beta, 1e-9)) << trial;
    } catch (const Error& e) {
      // Two random rows can be nearly proportional; only that may fail.
      ASSERT_EQ(e.code(), ErrorCode::RankDeficient);
    }
  }
}

TEST(FitInterceptModel, RankDeficientDesign) {
  std::vector<InterceptObservation> same(3, {{"p", 5, 1000.0}, 0.01});
  EXPECT_EQ(error_of([&] { fit_intercept_model(same); }), ErrorCode::RankDeficient);
  std::vector<InterceptObservation> proportional{
      {{"a", 1, 100.0}, 0.001}, {{"b", 2, 200.0}, 0.002}, {{"c", 4, 400.0}, 0.004}};
  EXPECT_EQ(error_of([&] { fit_intercept_model(proportional); }), ErrorCode::RankDeficient);
  std::vector<InterceptObservation> zero_length{{{"a", 1, 0.0}, 0.001}, {{"b", 3, 0.0}, 0.003}};
  EXPECT_EQ(error_of([&] { fit_intercept_model(zero_length); }), ErrorCode::RankDeficient);
}

TEST(FitInterceptModel, InsufficientObservations) {
  std::vector<InterceptObservation> one{{{"a", 1, 10.0}, 0.001}};
  EXPECT_EQ(error_of([&] { fit_intercept_model(one); }), ErrorCode::InsufficientObservations);
  EXPECT_EQ(error_of([] { fit_intercept_model({}); }), ErrorCode::InsufficientObservations);
}

TEST(FitInterceptModel, NoisyFitMatchesNormalEquationsAndTruth) {
  std::mt19937_64 rng(13);
  const double sigma = 0.05e-3;
  const auto obs = synthetic(rng, 200, sigma);
  const auto model = fit_intercept_model(obs);
  const auto oracle = normal_equations(obs);
  EXPECT_TRUE(rel_near(model.alpha_s_per_hop, oracle.alpha, 1e-9));
  EXPECT_TRUE(rel_near(model.beta_s_per_km, oracle.beta, 1e-9));
  EXPECT_LE(std::abs(model.alpha_s_per_hop - kAlpha), 3.0 * sigma * std::sqrt(oracle.inv00));
  EXPECT_LE(std::abs(model.beta_s_per_km - kBeta), 3.0 * sigma * std::sqrt(oracle.inv11));
  EXPECT_GT(model.residual_rms_s, 0.5 * sigma);
  EXPECT_LT(model.residual_rms_s, 1.5 * sigma);
}

TEST(FitInterceptModel, ResidualInvariantUnderReordering) {
  std::mt19937_64 rng(14);
  auto obs = synthetic(rng, 50, 0.05e-3);
  const auto a = fit_intercept_model(obs);
  std::shuffle(obs.begin(), obs.end(), rng);
  const auto b = fit_intercept_model(obs);
  EXPECT_TRUE(rel_near(b.residual_rms_s, a.residual_rms_s, 1e-9));
  EXPECT_TRUE(rel_near(b.alpha_s_per_hop, a.alpha_s_per_hop, 1e-9));
}

TEST(FitInterceptModel, AffineOptionFitsConstant) {
  std::mt19937_64 rng(15);
  auto obs = synthetic(rng, 20);
  for (auto& o : obs) o.intercept_s += 0.002;
  const auto model = fit_intercept_model(obs, {.affine = true});
  EXPECT_TRUE(model.has_constant);
  EXPECT_TRUE(rel_near(model.constant_s, 0.002, 1e-9));
  EXPECT_TRUE(rel_near(model.alpha_s_per_hop, kAlpha, 1e-9));
  EXPECT_TRUE(rel_near(model.beta_s_per_km, kBeta, 1e-9));
}

TEST(PredictIntercept, Examples) {
  EXPECT_EQ(predict_intercept(InterceptModel{}, {"x", 7, 1234.0}), 0.0);
  InterceptModel m;
  m.alpha_s_per_hop = kAlpha;
  m.beta_s_per_km = kBeta;
  EXPECT_NEAR(predict_intercept(m, {"x", 5, 1000.0}), 5.5e-3, 1e-15);
}

TEST(PredictIntercept, ReproducesTrainingDataOfExactFit) {
  std::mt19937_64 rng(16);
  const auto obs = synthetic(rng, 12);
  const auto model = fit_intercept_model(obs);
  for (const auto& o : obs) {
    EXPECT_TRUE(rel_near(predict_intercept(model, o.features), o.intercept_s, 1e-9));
  }
}

TEST(PredictIntercept, Linearity) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<std::uint32_t> hops(1, 30);
  std::uniform_real_distribution<double> km(0.0, 5000.0);
  InterceptModel m;
  m.alpha_s_per_hop = 2.5e-4;
  m.beta_s_per_km = 7e-6;
  for (int i = 0; i < 200; ++i) {
    const PathFeatures f1{"a", hops(rng), km(rng)};
    const PathFeatures f2{"b", hops(rng), km(rng)};
    const PathFeatures sum{"c", f1.hop_count + f2.hop_count,
                           f1.route_length_km + f2.route_length_km};
    const double lhs = predict_intercept(m, sum);
    const double rhs = predict_intercept(m, f1) + predict_intercept(m, f2);
    ASSERT_NEAR(lhs, rhs, 1e-15);
  }
}

TEST(EstimateWithModel, Examples) {
  EXPECT_EQ(estimate_with_model({8192, 1.0}, InterceptModel{}, {"x", 3, 10.0}).b_av_bps, 8192.0);

  InterceptModel adsl;
  adsl.alpha_s_per_hop = 15.65625e-3;
  const auto est = estimate_with_model({800, 0.018}, adsl, {"adsl", 1, 0.0});
  EXPECT_TRUE(rel_near(est.b_av_bps, 8192.0 / 0.024, 1e-9));
  EXPECT_EQ(est.method, EstimateMethod::InterceptCorrected);

  EXPECT_EQ(error_of([&] { estimate_with_model({800, 0.010}, adsl, {"adsl", 1, 0.0}); }),
            ErrorCode::DelayNotAboveIntercept);
}

}  // namespace
}  // namespace bwest
