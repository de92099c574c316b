#include "bwest/path_simulator.hpp"

#include <cmath>
#include <set>

#include "bwest/error.hpp"

namespace bwest {

void Hop::validate() const {
  if (!(capacity_bps > 0.0) || !std::isfinite(capacity_bps)) {
    throw Error(ErrorCode::InvalidArgument, "hop capacity_bps must be positive");
  }
  if (!(propagation_s >= 0.0) || !(processing_s >= 0.0) || !(queue_noise_mean_s >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "hop delays must be non-negative");
  }
  if (!(loss_prob >= 0.0 && loss_prob < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "hop loss_prob must be in [0, 1)");
  }
}

void SimPath::validate() const {
  if (hops.empty()) throw Error(ErrorCode::InvalidArgument, "path has no hops");
  for (const auto& hop : hops) hop.validate();
}

double SimRng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double SimRng::exponential(double mean) {
  return -mean * std::log1p(-uniform());
}

double fixed_delay(const SimPath& path, std::uint64_t wire_bits) {
  const double w = static_cast<double>(wire_bits);
  double total = 0.0;
  for (const auto& hop : path.hops) {
    total += w / hop.capacity_bps + hop.propagation_s + hop.processing_s;
  }
  return total;
}

double ground_truth_rate(const SimPath& path) {
  path.validate();
  double inverse = 0.0;
  for (const auto& hop : path.hops) inverse += 1.0 / hop.capacity_bps;
  return 1.0 / inverse;
}

double ground_truth_intercept(const SimPath& path) {
  double total = 0.0;
  for (const auto& hop : path.hops) total += hop.propagation_s + hop.processing_s;
  return total;
}

std::optional<double> simulate_probe(const SimPath& path, std::uint64_t wire_bits, SimRng& rng) {
  if (wire_bits == 0) throw Error(ErrorCode::InvalidArgument, "wire_bits must be positive");
  const double w = static_cast<double>(wire_bits);
  double delay = 0.0;
  for (const auto& hop : path.hops) {
    if (hop.loss_prob > 0.0 && rng.uniform() < hop.loss_prob) return std::nullopt;
    delay += w / hop.capacity_bps + hop.propagation_s + hop.processing_s;
    if (hop.queue_noise_mean_s > 0.0) delay += rng.exponential(hop.queue_noise_mean_s);
  }
  return delay;
}

std::vector<ProbeSample> run_experiment(const SimPath& path,
                                        std::span<const std::uint64_t> sizes_bits,
                                        std::size_t count_per_size, double gap_s,
                                        const std::string& path_id) {
  path.validate();
  if (sizes_bits.empty()) throw Error(ErrorCode::InvalidArgument, "no probe sizes");
  if (std::set<std::uint64_t>(sizes_bits.begin(), sizes_bits.end()).size() != sizes_bits.size()) {
    throw Error(ErrorCode::InvalidArgument, "probe sizes must be distinct");
  }
  if (count_per_size == 0) throw Error(ErrorCode::InvalidArgument, "count_per_size must be >= 1");
  if (!(gap_s > 0.0)) throw Error(ErrorCode::InvalidArgument, "gap must be positive");

  SimRng rng(path.seed);
  std::vector<ProbeSample> samples;
  samples.reserve(sizes_bits.size() * count_per_size);
  std::uint64_t seq = 0;
  for (std::size_t round = 0; round < count_per_size; ++round) {
    for (const auto size : sizes_bits) {
      ProbeSample s;
      s.path_id = path_id;
      s.seq = seq;
      s.wire_bits = size;
      s.payload_bytes = static_cast<std::uint32_t>(size / 8);
      s.sent_at_us = std::llround(static_cast<double>(seq) * gap_s * 1e6);
      s.rtt_s = simulate_probe(path, size, rng);
      s.method = ProbeMethod::Simulated;
      samples.push_back(std::move(s));
      ++seq;
    }
  }
  return samples;
}

}  // namespace bwest
