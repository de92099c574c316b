#include "bwest/probe_sample.hpp"

#include <string>

#include "bwest/error.hpp"

namespace bwest {

std::string_view to_string(ProbeMethod method) noexcept {
  switch (method) {
    case ProbeMethod::IcmpEcho: return "icmp_echo";
    case ProbeMethod::UdpEcho: return "udp_echo";
    case ProbeMethod::Simulated: return "simulated";
  }
  return "unknown";
}

ProbeMethod parse_probe_method(std::string_view text) {
  if (text == "icmp_echo" || text == "icmp") return ProbeMethod::IcmpEcho;
  if (text == "udp_echo" || text == "udp") return ProbeMethod::UdpEcho;
  if (text == "simulated") return ProbeMethod::Simulated;
  throw Error(ErrorCode::InvalidArgument, "unknown probe method '" + std::string(text) + "'");
}

}  // namespace bwest
