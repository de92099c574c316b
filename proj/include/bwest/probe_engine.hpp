#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bwest/probe_sample.hpp"

namespace bwest {

inline constexpr std::uint32_t kIpv4HeaderBytes = 20;
inline constexpr std::uint32_t kIcmpHeaderBytes = 8;
inline constexpr std::uint32_t kUdpHeaderBytes = 8;
inline constexpr std::uint16_t kDefaultEchoPort = 7;

/// Echo payload layout: 8-byte big-endian microsecond send timestamp, 4-byte
/// session nonce, then zero padding. UDP probes also carry a 2-byte identifier
/// and 2-byte sequence number after the nonce since UDP has no header field for them.
inline constexpr std::uint32_t kIcmpMinPayload = 12;
inline constexpr std::uint32_t kUdpMinPayload = 16;

/// IP-layer size of a probe carrying `payload_bytes`, in bits.
std::uint64_t wire_size(std::uint32_t payload_bytes, ProbeMethod method);

struct ProbePlan {
  std::string target;
  std::vector<std::uint32_t> sizes_payload_bytes{100, 1124};
  std::uint32_t count_per_size = 30;
  double inter_probe_gap_s = 0.05;
  double timeout_s = 2.0;
  ProbeMethod method = ProbeMethod::IcmpEcho;
  std::uint16_t udp_port = kDefaultEchoPort;

  /// Throws InvalidArgument when sizes repeat, count is zero, gap <= 0 or
  /// timeout <= gap, or a size is below the method's minimum payload.
  void validate() const;

  friend bool operator==(const ProbePlan&, const ProbePlan&) = default;
};

/// Sends count_per_size probes for every size, round-robin across sizes, and
/// returns the samples in send order. Unanswered probes are marked lost.
/// Throws ResolveFailure, PermissionDenied or AllProbesLost.
std::vector<ProbeSample> run_session(const ProbePlan& plan);

/// Resolves an IPv4 host name or dotted quad. Throws ResolveFailure.
std::array<std::uint8_t, 4> resolve_ipv4(const std::string& host);

enum class HopReplyKind { None, TimeExceeded, TargetReply };

/// One TTL-limited probe toward a fixed target.
class HopProber {
 public:
  virtual ~HopProber() = default;
  virtual HopReplyKind probe(int ttl) = 0;
};

/// Smallest TTL in [1, max_ttl] at which the target itself answers.
/// Throws NoReply when it never does.
int discover_hops(HopProber& prober, int max_ttl);

/// ICMP echo with IP_TTL set per probe. Needs a raw socket.
int discover_hops(const std::string& target, int max_ttl, double timeout_s = 1.0);

}  // namespace bwest
