#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bwest/probe_sample.hpp"

namespace bwest {

struct Hop {
  double capacity_bps = 1e6;
  double propagation_s = 0.0;
  double processing_s = 0.0;
  /// Mean of the one-sided exponential queueing delay added at this hop; 0 disables it.
  double queue_noise_mean_s = 0.0;
  double loss_prob = 0.0;

  void validate() const;

  friend bool operator==(const Hop&, const Hop&) = default;
};

struct SimPath {
  std::vector<Hop> hops;
  std::uint64_t seed = 0;

  void validate() const;

  friend bool operator==(const SimPath&, const SimPath&) = default;
};

/// Seeded random stream used by the simulator. The engine is mt19937_64 and
/// variates are derived from its raw output with fixed formulas, so a seed
/// maps to the same sequence on every standard library.
class SimRng {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64";

  explicit SimRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Exponential with the given mean, by inversion.
  double exponential(double mean);

 private:
  std::mt19937_64 engine_;
};

double fixed_delay(const SimPath& path, std::uint64_t wire_bits);

/// 1 / sum(1 / C_i): the inverse slope of fixed_delay in wire_bits.
double ground_truth_rate(const SimPath& path);

/// Sum of the size-independent per-hop terms, i.e. the fixed-delay intercept.
double ground_truth_intercept(const SimPath& path);

/// One probe traversal. Returns nullopt when a hop drops the packet.
std::optional<double> simulate_probe(const SimPath& path, std::uint64_t wire_bits, SimRng& rng);

inline constexpr double kDefaultSimGapS = 0.05;

/// Round-robin over `sizes_bits`, `count_per_size` rounds, one RNG stream
/// seeded from path.seed. sent_at_us advances by `gap_s` per probe from 0.
std::vector<ProbeSample> run_experiment(const SimPath& path,
                                        std::span<const std::uint64_t> sizes_bits,
                                        std::size_t count_per_size,
                                        double gap_s = kDefaultSimGapS,
                                        const std::string& path_id = "sim");

}  // namespace bwest
