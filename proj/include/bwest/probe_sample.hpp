#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace bwest {

enum class ProbeMethod { IcmpEcho, UdpEcho, Simulated };

std::string_view to_string(ProbeMethod method) noexcept;
/// Accepts "icmp_echo"/"icmp", "udp_echo"/"udp" and "simulated". Throws InvalidArgument.
ProbeMethod parse_probe_method(std::string_view text);

/// One probe observation. A lost probe carries no delay.
struct ProbeSample {
  std::string path_id;
  std::uint64_t seq = 0;
  std::uint32_t payload_bytes = 0;
  std::uint64_t wire_bits = 0;
  std::int64_t sent_at_us = 0;  // monotonic clock, microseconds
  std::optional<double> rtt_s;
  ProbeMethod method = ProbeMethod::Simulated;

  bool lost() const noexcept { return !rtt_s.has_value(); }

  friend bool operator==(const ProbeSample&, const ProbeSample&) = default;
};

}  // namespace bwest
