#include "bwest/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "bwest/error.hpp"

namespace bwest {

namespace {

std::pair<SizeDelayPoint, SizeDelayPoint> ordered_pair(const SizeDelayPoint& p1,
                                                       const SizeDelayPoint& p2) {
  p1.validate();
  p2.validate();
  if (p1.size_bits == p2.size_bits) {
    throw Error(ErrorCode::EqualSizes,
                "both points have size " + std::to_string(p1.size_bits) + " bits");
  }
  return p1.size_bits < p2.size_bits ? std::pair{p1, p2} : std::pair{p2, p1};
}

}  // namespace

void SizeDelayPoint::validate() const {
  if (size_bits == 0) throw Error(ErrorCode::InvalidArgument, "size_bits must be positive");
  if (!(delay_s > 0.0) || !std::isfinite(delay_s)) {
    throw Error(ErrorCode::InvalidArgument, "delay_s must be positive and finite");
  }
}

std::string_view to_string(EstimateMethod method) noexcept {
  switch (method) {
    case EstimateMethod::Direct: return "direct";
    case EstimateMethod::Pairwise: return "pairwise";
    case EstimateMethod::Regression: return "regression";
    case EstimateMethod::InterceptCorrected: return "intercept_corrected";
  }
  return "unknown";
}

DelayProfile min_delay_profile(std::span<const ProbeSample> samples,
                               std::size_t min_samples_per_size) {
  if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "no samples");
  if (min_samples_per_size == 0) {
    throw Error(ErrorCode::InvalidArgument, "min_samples_per_size must be >= 1");
  }

  struct Group {
    double min_delay = std::numeric_limits<double>::infinity();
    std::size_t count = 0;
  };
  std::map<std::uint64_t, Group> groups;
  for (const auto& s : samples) {
    if (s.lost()) continue;
    auto& g = groups[s.wire_bits];
    g.min_delay = std::min(g.min_delay, *s.rtt_s);
    ++g.count;
  }

  DelayProfile profile;
  if (!samples.empty()) profile.path_id = samples.front().path_id;
  for (const auto& [size, g] : groups) {
    if (g.count < min_samples_per_size) {
      profile.dropped.push_back("size " + std::to_string(size) + " bits: " +
                                std::to_string(g.count) + " samples < " +
                                std::to_string(min_samples_per_size));
      continue;
    }
    profile.points.push_back({size, g.min_delay});
    profile.samples_per_size[size] = g.count;
  }
  if (profile.points.empty()) {
    std::string detail = "no size has " + std::to_string(min_samples_per_size) +
                         " non-lost samples";
    for (const auto& d : profile.dropped) detail += "; " + d;
    throw Error(ErrorCode::NoUsableSizes, detail);
  }
  return profile;
}

BandwidthEstimate estimate_direct(const SizeDelayPoint& point) {
  point.validate();
  BandwidthEstimate est;
  est.b_av_bps = static_cast<double>(point.size_bits) / point.delay_s;
  est.intercept_s = 0.0;
  est.method = EstimateMethod::Direct;
  return est;
}

double estimate_intercept(const SizeDelayPoint& p1, const SizeDelayPoint& p2) {
  const auto [small, large] = ordered_pair(p1, p2);
  const double w1 = static_cast<double>(small.size_bits);
  const double w2 = static_cast<double>(large.size_bits);
  return (w2 * small.delay_s - w1 * large.delay_s) / (w2 - w1);
}

BandwidthEstimate estimate_pairwise(const SizeDelayPoint& p1, const SizeDelayPoint& p2) {
  const auto [small, large] = ordered_pair(p1, p2);
  const double delay_diff = large.delay_s - small.delay_s;
  if (!(delay_diff > 0.0)) {
    throw Error(ErrorCode::NonPositiveDelayDifference,
                "larger packet is not slower than the smaller one");
  }
  BandwidthEstimate est;
  est.b_av_bps = static_cast<double>(large.size_bits - small.size_bits) / delay_diff;
  est.intercept_s = estimate_intercept(small, large);
  est.method = EstimateMethod::Pairwise;
  if (est.intercept_s < 0.0) est.warnings.emplace_back(kNegativeInterceptWarning);
  return est;
}

BandwidthEstimate estimate_from_intercept(const SizeDelayPoint& point, double intercept_s) {
  point.validate();
  if (!(point.delay_s > intercept_s)) {
    throw Error(ErrorCode::DelayNotAboveIntercept,
                "delay " + std::to_string(point.delay_s) + " s <= intercept " +
                    std::to_string(intercept_s) + " s");
  }
  BandwidthEstimate est;
  est.b_av_bps = static_cast<double>(point.size_bits) / (point.delay_s - intercept_s);
  est.intercept_s = intercept_s;
  est.method = EstimateMethod::InterceptCorrected;
  if (intercept_s < 0.0) est.warnings.emplace_back(kNegativeInterceptWarning);
  return est;
}

LinearFit fit_linear(std::span<const SizeDelayPoint> points) {
  const std::size_t n = points.size();
  if (n < 2) {
    throw Error(ErrorCode::InsufficientPoints,
                "need at least 2 points, got " + std::to_string(n));
  }
  // Centered sums keep the fit well conditioned when the intercept dwarfs W/B.
  double mean_w = 0.0;
  double mean_d = 0.0;
  for (const auto& p : points) {
    p.validate();
    mean_w += static_cast<double>(p.size_bits);
    mean_d += p.delay_s;
  }
  mean_w /= static_cast<double>(n);
  mean_d /= static_cast<double>(n);

  double sww = 0.0;
  double swd = 0.0;
  for (const auto& p : points) {
    const double dw = static_cast<double>(p.size_bits) - mean_w;
    sww += dw * dw;
    swd += dw * (p.delay_s - mean_d);
  }
  if (sww == 0.0) throw Error(ErrorCode::EqualSizes, "all points have the same size");

  LinearFit fit;
  fit.n_points = n;
  fit.slope_s_per_bit = swd / sww;
  if (!(fit.slope_s_per_bit > 0.0)) {
    throw Error(ErrorCode::NonPositiveSlope, "fitted slope " +
                                                 std::to_string(fit.slope_s_per_bit) +
                                                 " s/bit is not positive");
  }
  fit.intercept_s = mean_d - fit.slope_s_per_bit * mean_w;

  double sum_sq = 0.0;
  for (const auto& p : points) {
    const double r =
        p.delay_s - (fit.intercept_s + fit.slope_s_per_bit * static_cast<double>(p.size_bits));
    sum_sq += r * r;
  }
  fit.residual_rms_s = n == 2 ? 0.0 : std::sqrt(sum_sq / static_cast<double>(n));
  return fit;
}

LinearFit fit_linear(const DelayProfile& profile) { return fit_linear(profile.points); }

double invert_slope(double slope_s_per_bit) {
  if (!(slope_s_per_bit > 0.0)) {
    throw Error(ErrorCode::NonPositiveSlope, "slope must be positive");
  }
  return 1.0 / slope_s_per_bit;
}

BandwidthEstimate estimate_regression(const DelayProfile& profile) {
  const LinearFit fit = fit_linear(profile);
  BandwidthEstimate est;
  est.b_av_bps = invert_slope(fit.slope_s_per_bit);
  est.intercept_s = fit.intercept_s;
  est.residual_rms_s = fit.residual_rms_s;
  est.method = EstimateMethod::Regression;
  if (est.intercept_s < 0.0) est.warnings.emplace_back(kNegativeInterceptWarning);
  return est;
}

BandwidthEstimate estimate_auto(const DelayProfile& profile) {
  if (profile.points.size() == 2) {
    return estimate_pairwise(profile.points[0], profile.points[1]);
  }
  return estimate_regression(profile);
}

}  // namespace bwest
