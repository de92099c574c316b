#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bwest/probe_sample.hpp"

namespace bwest {

struct DelayStats {
  double mean_s = 0.0;
  double lower_2_5_s = 0.0;   // nearest-rank, floor(0.025 m) from the bottom
  double upper_97_5_s = 0.0;  // same rank from the top
  double jitter_s = 0.0;      // mean |d[i+1] - d[i]| over consecutive non-lost delays
};

struct DelaySummary {
  std::size_t n_total = 0;
  std::size_t n_lost = 0;
  double loss_rate = 0.0;
  /// Absent when every sample was lost.
  std::optional<DelayStats> delays;
};

/// Throws NoSamples on empty input. When every sample is lost the summary is
/// returned with `delays` unset and loss_rate = 1.
DelaySummary summarize(std::span<const ProbeSample> samples);

struct JitterPoint {
  std::int64_t timestamp_us = 0;  // send time of the last sample in the window
  double jitter_s = 0.0;
};

/// Jitter over each run of `window` consecutive non-lost samples, in send order.
std::vector<JitterPoint> jitter_series(std::span<const ProbeSample> samples, std::size_t window);

}  // namespace bwest
