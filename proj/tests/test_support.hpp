#pragma once

#include <cmath>
#include <cstdint>
#include <algorithm>
#include <filesystem>
#include <optional>
#include <utility>
#include <random>
#include <string>
#include <vector>

#include "bwest/intercept_model.hpp"
#include "bwest/path_simulator.hpp"
#include "bwest/probe_sample.hpp"
#include "bwest/session_store.hpp"

namespace bwest::testing {

inline bool rel_near(double actual, double expected, double rel) {
  return std::abs(actual - expected) <= rel * std::abs(expected);
}

inline double rel_err(double actual, double expected) {
  return std::abs(actual - expected) / std::abs(expected);
}

inline double log_uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
  return std::exp(u(rng));
}

/// Noise-free path: 1-10 hops, capacities 64 kbps - 10 Gbps, positive fixed delays.
inline SimPath random_clean_path(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> hops(1, 10);
  std::uniform_real_distribution<double> prop(1e-5, 0.05);
  std::uniform_real_distribution<double> proc(0.0, 1e-3);
  SimPath path;
  path.seed = rng();
  const int n = hops(rng);
  for (int i = 0; i < n; ++i) {
    Hop h;
    h.capacity_bps = log_uniform(rng, 64e3, 10e9);
    h.propagation_s = prop(rng);
    h.processing_s = proc(rng);
    path.hops.push_back(h);
  }
  return path;
}

inline ProbeSample sample(std::uint64_t seq, std::uint64_t wire_bits, std::optional<double> rtt,
                          std::int64_t sent_at_us = -1) {
  ProbeSample s;
  s.path_id = "t";
  s.seq = seq;
  s.wire_bits = wire_bits;
  s.payload_bytes = static_cast<std::uint32_t>(wire_bits / 8);
  s.sent_at_us = sent_at_us < 0 ? static_cast<std::int64_t>(seq) * 1000 : sent_at_us;
  s.rtt_s = rtt;
  s.method = ProbeMethod::Simulated;
  return s;
}

constexpr double kAlpha = 0.1e-3;   // s per hop
constexpr double kBeta = 0.005e-3;  // s per km

inline std::vector<InterceptObservation> synthetic(std::mt19937_64& rng, std::size_t count,
                                            double noise_sigma = 0.0) {
  std::uniform_int_distribution<std::uint32_t> hops(1, 30);
  std::uniform_real_distribution<double> km(0.0, 15000.0);
  std::normal_distribution<double> noise(0.0, noise_sigma > 0 ? noise_sigma : 1.0);
  std::vector<InterceptObservation> out;
  for (std::size_t i = 0; i < count; ++i) {
    InterceptObservation obs;
    obs.features = {"p" + std::to_string(i), hops(rng), km(rng)};
    obs.intercept_s = kAlpha * obs.features.hop_count + kBeta * obs.features.route_length_km;
    if (noise_sigma > 0) obs.intercept_s += noise(rng);
    out.push_back(obs);
  }
  return out;
}

// Independent route: 2x2 normal equations solved by Cramer's rule.
struct NormalEquations {
  double alpha, beta;
  double inv00, inv11;  // diagonal of (X^T X)^-1
};

inline NormalEquations normal_equations(const std::vector<InterceptObservation>& obs) {
  long double snn = 0, snl = 0, sll = 0, sna = 0, sla = 0;
  for (const auto& o : obs) {
    const long double n = o.features.hop_count;
    const long double l = o.features.route_length_km;
    snn += n * n;
    snl += n * l;
    sll += l * l;
    sna += n * o.intercept_s;
    sla += l * o.intercept_s;
  }
  const long double det = snn * sll - snl * snl;
  return {static_cast<double>((sna * sll - sla * snl) / det),
          static_cast<double>((snn * sla - snl * sna) / det), static_cast<double>(sll / det),
          static_cast<double>(snn / det)};
}

// Independent nearest-rank bounds: full sort, count the trimmed tail by
// stepping through ranks rather than using the floor formula.
inline std::pair<double, double> brute_bounds(std::vector<double> delays) {
  std::sort(delays.begin(), delays.end());
  const std::size_t m = delays.size();
  std::size_t trim = 0;
  while (static_cast<double>(trim + 1) <= 0.025 * static_cast<double>(m)) ++trim;
  return {delays[trim], delays[m - 1 - trim]};
}

/// Session with a random plan, optional features and up to 300 samples, ~10% lost.
inline SessionRecord random_record(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len(0, 300);
  std::uniform_real_distribution<double> delay(1e-6, 3.0);
  std::bernoulli_distribution lost(0.1);
  std::bernoulli_distribution coin(0.5);
  std::uniform_int_distribution<std::uint32_t> payload(12, 1400);

  SessionRecord r;
  r.session_id = "s-" + std::to_string(rng());
  r.created_at = "2026-10-19T12:34:56Z";
  if (coin(rng)) {
    ProbePlan plan;
    plan.target = "198.51.100.7";
    plan.sizes_payload_bytes = {payload(rng), 1500};
    plan.count_per_size = 17;
    plan.inter_probe_gap_s = 0.013;
    plan.timeout_s = 1.5;
    plan.method = coin(rng) ? ProbeMethod::IcmpEcho : ProbeMethod::UdpEcho;
    plan.udp_port = 7007;
    r.plan = plan;
  } else {
    SimPlan plan;
    plan.path = random_clean_path(rng);
    plan.path.hops[0].queue_noise_mean_s = delay(rng) * 1e-3;
    plan.path.hops[0].loss_prob = 0.01;
    plan.sizes_bits = {800, 8992};
    plan.count_per_size = 5;
    plan.gap_s = 0.02;
    r.plan = plan;
  }
  if (coin(rng)) r.features = PathFeatures{"path", 9, 1234.5};
  const int n = len(rng);
  std::int64_t t = 1'000'000'000;
  for (int i = 0; i < n; ++i) {
    ProbeSample s;
    s.path_id = "path";
    s.seq = static_cast<std::uint64_t>(i);
    s.payload_bytes = payload(rng);
    s.wire_bits = wire_size(s.payload_bytes, ProbeMethod::IcmpEcho);
    t += 50'000 + static_cast<std::int64_t>(rng() % 1000);
    s.sent_at_us = t;
    if (!lost(rng)) s.rtt_s = delay(rng);
    s.method = ProbeMethod::IcmpEcho;
    r.samples.push_back(std::move(s));
  }
  return r;
}

/// Per-test scratch directory, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("bwest-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace bwest::testing
