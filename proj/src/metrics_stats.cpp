#include "bwest/metrics_stats.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bwest/error.hpp"

namespace bwest {

namespace {

std::vector<const ProbeSample*> received_in_send_order(std::span<const ProbeSample> samples) {
  std::vector<const ProbeSample*> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (!s.lost()) out.push_back(&s);
  }
  std::stable_sort(out.begin(), out.end(), [](const ProbeSample* a, const ProbeSample* b) {
    return a->sent_at_us < b->sent_at_us;
  });
  return out;
}

double mean_abs_step(std::span<const ProbeSample* const> run) {
  if (run.size() < 2) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 1; i < run.size(); ++i) sum += std::abs(*run[i]->rtt_s - *run[i - 1]->rtt_s);
  return sum / static_cast<double>(run.size() - 1);
}

}  // namespace

DelaySummary summarize(std::span<const ProbeSample> samples) {
  if (samples.empty()) throw Error(ErrorCode::NoSamples, "no samples to summarize");

  DelaySummary summary;
  summary.n_total = samples.size();
  const auto received = received_in_send_order(samples);
  summary.n_lost = summary.n_total - received.size();
  summary.loss_rate =
      static_cast<double>(summary.n_lost) / static_cast<double>(summary.n_total);
  if (received.empty()) return summary;

  std::vector<double> sorted;
  sorted.reserve(received.size());
  double sum = 0.0;
  for (const auto* s : received) {
    sorted.push_back(*s->rtt_s);
    sum += *s->rtt_s;
  }
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  const auto trim = static_cast<std::size_t>(std::floor(0.025 * static_cast<double>(m)));

  DelayStats stats;
  stats.mean_s = sum / static_cast<double>(m);
  stats.lower_2_5_s = sorted[trim];
  stats.upper_97_5_s = sorted[m - 1 - trim];
  stats.jitter_s = mean_abs_step(received);
  summary.delays = stats;
  return summary;
}

std::vector<JitterPoint> jitter_series(std::span<const ProbeSample> samples, std::size_t window) {
  if (window < 2) throw Error(ErrorCode::InvalidArgument, "jitter window must be >= 2");
  const auto received = received_in_send_order(samples);
  if (received.size() < window) {
    throw Error(ErrorCode::InsufficientSamples,
                std::to_string(received.size()) + " non-lost samples, window needs " +
                    std::to_string(window));
  }
  std::vector<JitterPoint> series;
  series.reserve(received.size() - window + 1);
  const std::span<const ProbeSample* const> all(received);
  for (std::size_t start = 0; start + window <= received.size(); ++start) {
    const auto run = all.subspan(start, window);
    series.push_back({run.back()->sent_at_us, mean_abs_step(run)});
  }
  return series;
}

}  // namespace bwest
