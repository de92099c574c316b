#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bwest/probe_sample.hpp"

namespace bwest {

/// A probe wire size paired with its (filtered) delay.
struct SizeDelayPoint {
  std::uint64_t size_bits = 0;
  double delay_s = 0.0;

  /// Throws InvalidArgument unless size_bits > 0 and delay_s > 0.
  void validate() const;

  friend bool operator==(const SizeDelayPoint&, const SizeDelayPoint&) = default;
};

/// Per-size minimum delays for one path, sorted ascending by size.
struct DelayProfile {
  std::string path_id;
  std::vector<SizeDelayPoint> points;
  std::map<std::uint64_t, std::size_t> samples_per_size;
  /// Human-readable notes about sizes that were dropped by the sample threshold.
  std::vector<std::string> dropped;
};

enum class EstimateMethod { Direct, Pairwise, Regression, InterceptCorrected };

std::string_view to_string(EstimateMethod method) noexcept;

struct BandwidthEstimate {
  double b_av_bps = 0.0;
  double intercept_s = 0.0;
  EstimateMethod method = EstimateMethod::Direct;
  double residual_rms_s = 0.0;
  std::vector<std::string> warnings;
};

struct LinearFit {
  double slope_s_per_bit = 0.0;
  double intercept_s = 0.0;
  double residual_rms_s = 0.0;
  std::size_t n_points = 0;
};

inline constexpr std::size_t kDefaultMinSamplesPerSize = 30;
inline constexpr std::string_view kNegativeInterceptWarning = "negative intercept";

/// Groups non-lost samples by wire size and keeps the minimum delay of every
/// size that has at least `min_samples_per_size` observations.
DelayProfile min_delay_profile(std::span<const ProbeSample> samples,
                               std::size_t min_samples_per_size = kDefaultMinSamplesPerSize);

/// B = W / D for a single-hop path.
BandwidthEstimate estimate_direct(const SizeDelayPoint& point);

/// B = (W2 - W1) / (D2 - D1) with the pair ordered so W2 > W1; the intercept
/// comes from estimate_intercept. Symmetric in its arguments.
BandwidthEstimate estimate_pairwise(const SizeDelayPoint& p1, const SizeDelayPoint& p2);

/// a = (W2*D1 - W1*D2) / (W2 - W1). Symmetric in its arguments.
double estimate_intercept(const SizeDelayPoint& p1, const SizeDelayPoint& p2);

/// B = W / (D - a).
BandwidthEstimate estimate_from_intercept(const SizeDelayPoint& point, double intercept_s);

/// Ordinary least squares of delay against size.
LinearFit fit_linear(const DelayProfile& profile);
LinearFit fit_linear(std::span<const SizeDelayPoint> points);

double invert_slope(double slope_s_per_bit);

BandwidthEstimate estimate_regression(const DelayProfile& profile);

/// Pairwise for exactly two points, regression otherwise.
BandwidthEstimate estimate_auto(const DelayProfile& profile);

}  // namespace bwest
