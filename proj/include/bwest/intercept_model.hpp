#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bwest/estimator.hpp"

namespace bwest {

struct PathFeatures {
  std::string path_id;
  std::uint32_t hop_count = 1;    // routers on the path, from TTL probing
  double route_length_km = 0.0;   // summed segment lengths

  void validate() const;

  friend bool operator==(const PathFeatures&, const PathFeatures&) = default;
};

struct InterceptObservation {
  PathFeatures features;
  double intercept_s = 0.0;
};

/// a ~= alpha * n + beta * l (+ constant_s when fitted with an affine term).
struct InterceptModel {
  double alpha_s_per_hop = 0.0;
  double beta_s_per_km = 0.0;
  double constant_s = 0.0;
  bool has_constant = false;
  double residual_rms_s = 0.0;
  std::size_t n_observations = 0;
};

struct InterceptFitOptions {
  /// Adds a free constant term. The model is fitted through the origin otherwise.
  bool affine = false;
};

InterceptModel fit_intercept_model(std::span<const InterceptObservation> observations,
                                   InterceptFitOptions options = {});

double predict_intercept(const InterceptModel& model, const PathFeatures& features);

BandwidthEstimate estimate_with_model(const SizeDelayPoint& point, const InterceptModel& model,
                                      const PathFeatures& features);

}  // namespace bwest
