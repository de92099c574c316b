#include "bwest/probe_engine.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/ip.h>
#include <netinet/ip_icmp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <utility>

#include "bwest/error.hpp"

namespace bwest {

namespace {

constexpr std::uint8_t kEchoReply = 0;
constexpr std::uint8_t kEchoRequest = 8;
constexpr std::uint8_t kTimeExceeded = 11;

std::int64_t monotonic_us() {
  using namespace std::chrono;
  return duration_cast<microseconds>(steady_clock::now().time_since_epoch()).count();
}

class Socket {
 public:
  explicit Socket(int fd) : fd_(fd) {}
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  Socket(Socket&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  ~Socket() {
    if (fd_ >= 0) ::close(fd_);
  }
  int fd() const noexcept { return fd_; }

 private:
  int fd_;
};

std::string errno_text(int err) { return std::strerror(err); }

void put_be(std::span<std::uint8_t> out, std::uint64_t value, std::size_t width) {
  for (std::size_t i = 0; i < width; ++i) {
    out[i] = static_cast<std::uint8_t>(value >> (8 * (width - 1 - i)));
  }
}

std::uint64_t get_be(std::span<const std::uint8_t> in, std::size_t width) {
  std::uint64_t value = 0;
  for (std::size_t i = 0; i < width; ++i) value = (value << 8) | in[i];
  return value;
}

// RFC 1071 internet checksum.
std::uint16_t internet_checksum(std::span<const std::uint8_t> data) {
  std::uint32_t sum = 0;
  std::size_t i = 0;
  for (; i + 1 < data.size(); i += 2) sum += (std::uint32_t{data[i]} << 8) | data[i + 1];
  if (i < data.size()) sum += std::uint32_t{data[i]} << 8;
  while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
  return static_cast<std::uint16_t>(~sum & 0xffff);
}

std::uint32_t make_nonce() {
  static std::atomic<std::uint32_t> counter{0};
  std::random_device rd;
  return rd() ^ (counter.fetch_add(1) * 0x9e3779b9U);
}

std::uint16_t make_identifier() {
  static std::atomic<std::uint16_t> counter{0};
  return static_cast<std::uint16_t>((::getpid() & 0xffff) ^ (counter.fetch_add(1) << 11));
}

sockaddr_in to_sockaddr(const std::array<std::uint8_t, 4>& addr, std::uint16_t port) {
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(port);
  std::memcpy(&sa.sin_addr, addr.data(), 4);
  return sa;
}

struct IcmpSocket {
  Socket sock;
  bool raw;  // raw sockets deliver the IP header and keep our identifier
};

IcmpSocket open_icmp_socket(bool require_raw) {
  int fd = ::socket(AF_INET, SOCK_RAW, IPPROTO_ICMP);
  if (fd >= 0) return {Socket(fd), true};
  const int raw_err = errno;
  if (raw_err != EPERM && raw_err != EACCES) {
    throw Error(ErrorCode::SocketFailure, "raw ICMP socket: " + errno_text(raw_err));
  }
  if (!require_raw) {
    fd = ::socket(AF_INET, SOCK_DGRAM, IPPROTO_ICMP);
    if (fd >= 0) return {Socket(fd), false};
  }
  throw Error(ErrorCode::PermissionDenied,
              "ICMP sockets unavailable (" + errno_text(raw_err) +
                  "); run with CAP_NET_RAW or use the UDP echo method");
}

std::vector<std::uint8_t> build_echo_request(std::uint16_t id, std::uint16_t seq,
                                             std::span<const std::uint8_t> payload) {
  std::vector<std::uint8_t> pkt(kIcmpHeaderBytes + payload.size(), 0);
  pkt[0] = kEchoRequest;
  pkt[1] = 0;
  put_be(std::span(pkt).subspan(4, 2), id, 2);
  put_be(std::span(pkt).subspan(6, 2), seq, 2);
  std::copy(payload.begin(), payload.end(), pkt.begin() + kIcmpHeaderBytes);
  put_be(std::span(pkt).subspan(2, 2), internet_checksum(pkt), 2);
  return pkt;
}

// Strips the IPv4 header from raw-socket reads.
std::span<const std::uint8_t> icmp_part(std::span<const std::uint8_t> packet, bool raw) {
  if (!raw) return packet;
  if (packet.size() < kIpv4HeaderBytes) return {};
  const std::size_t ihl = (packet[0] & 0x0f) * 4u;
  if (ihl < kIpv4HeaderBytes || packet.size() < ihl) return {};
  return packet.subspan(ihl);
}

struct Pending {
  std::size_t index;
  std::int64_t deadline_us;
};

class EchoSession {
 public:
  EchoSession(const ProbePlan& plan, std::array<std::uint8_t, 4> addr)
      : plan_(plan), addr_(addr), nonce_(make_nonce()), id_(make_identifier()) {
    if (plan.method == ProbeMethod::IcmpEcho) {
      auto icmp = open_icmp_socket(false);
      raw_ = icmp.raw;
      sock_.emplace(std::move(icmp.sock));
    } else if (plan.method == ProbeMethod::UdpEcho) {
      int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
      if (fd < 0) throw Error(ErrorCode::SocketFailure, "UDP socket: " + errno_text(errno));
      sock_.emplace(fd);
      const auto sa = to_sockaddr(addr_, plan.udp_port);
      if (::connect(fd, reinterpret_cast<const sockaddr*>(&sa), sizeof sa) != 0) {
        connect_errno_ = errno;
      }
    } else {
      throw Error(ErrorCode::InvalidArgument, "live probing needs icmp_echo or udp_echo");
    }
  }

  std::vector<ProbeSample> run() {
    const std::size_t n_sizes = plan_.sizes_payload_bytes.size();
    const std::size_t total = n_sizes * plan_.count_per_size;
    const auto gap_us = static_cast<std::int64_t>(std::llround(plan_.inter_probe_gap_s * 1e6));
    const auto timeout_us = static_cast<std::int64_t>(std::llround(plan_.timeout_s * 1e6));

    samples_.resize(total);
    const std::int64_t start = monotonic_us();
    std::size_t next = 0;
    while (next < total || !pending_.empty()) {
      std::int64_t now = monotonic_us();
      if (next < total && now >= start + static_cast<std::int64_t>(next) * gap_us) {
        send_probe(next, n_sizes, timeout_us);
        ++next;
        continue;
      }
      expire(now);
      if (next >= total && pending_.empty()) break;

      std::int64_t wake = std::numeric_limits<std::int64_t>::max();
      if (next < total) wake = start + static_cast<std::int64_t>(next) * gap_us;
      for (const auto& [seq, p] : pending_) wake = std::min(wake, p.deadline_us);
      const std::int64_t wait_us = std::max<std::int64_t>(0, wake - now);

      pollfd pfd{sock_->fd(), POLLIN, 0};
      const timespec ts{static_cast<time_t>(wait_us / 1000000),
                        static_cast<long>((wait_us % 1000000) * 1000)};
      const int ready = ::ppoll(&pfd, 1, &ts, nullptr);
      if (ready > 0 && (pfd.revents & POLLIN)) drain();
    }
    return std::move(samples_);
  }

 private:
  std::vector<std::uint8_t> make_payload(std::uint32_t bytes, std::uint16_t seq,
                                         std::int64_t sent_us) const {
    std::vector<std::uint8_t> payload(bytes, 0);
    std::span<std::uint8_t> p(payload);
    put_be(p.subspan(0, 8), static_cast<std::uint64_t>(sent_us), 8);
    put_be(p.subspan(8, 4), nonce_, 4);
    if (plan_.method == ProbeMethod::UdpEcho) {
      put_be(p.subspan(12, 2), id_, 2);
      put_be(p.subspan(14, 2), seq, 2);
    }
    return payload;
  }

  void send_probe(std::size_t index, std::size_t n_sizes, std::int64_t timeout_us) {
    const std::uint32_t payload_bytes = plan_.sizes_payload_bytes[index % n_sizes];
    const auto seq16 = static_cast<std::uint16_t>(index & 0xffff);

    ProbeSample& s = samples_[index];
    s.path_id = plan_.target;
    s.seq = index;
    s.payload_bytes = payload_bytes;
    s.wire_bits = wire_size(payload_bytes, plan_.method);
    s.method = plan_.method;

    const std::int64_t sent_us = monotonic_us();
    s.sent_at_us = sent_us;
    const auto payload = make_payload(payload_bytes, seq16, sent_us);

    ssize_t rc = -1;
    if (plan_.method == ProbeMethod::IcmpEcho) {
      const auto pkt = build_echo_request(id_, seq16, payload);
      const auto sa = to_sockaddr(addr_, 0);
      rc = ::sendto(sock_->fd(), pkt.data(), pkt.size(), 0,
                    reinterpret_cast<const sockaddr*>(&sa), sizeof sa);
    } else if (connect_errno_ == 0) {
      rc = ::send(sock_->fd(), payload.data(), payload.size(), 0);
    }
    // A failed send (unreachable network and the like) is a lost probe.
    if (rc < 0) return;
    pending_[seq16] = {index, sent_us + timeout_us};
  }

  void expire(std::int64_t now) {
    for (auto it = pending_.begin(); it != pending_.end();) {
      it = it->second.deadline_us <= now ? pending_.erase(it) : std::next(it);
    }
  }

  void drain() {
    std::array<std::uint8_t, 65536> buf{};
    for (;;) {
      const ssize_t n = ::recv(sock_->fd(), buf.data(), buf.size(), MSG_DONTWAIT);
      if (n < 0) return;  // EAGAIN, or ECONNREFUSED from a closed UDP port
      const std::int64_t recv_us = monotonic_us();
      match(std::span<const std::uint8_t>(buf.data(), static_cast<std::size_t>(n)), recv_us);
    }
  }

  void match(std::span<const std::uint8_t> packet, std::int64_t recv_us) {
    std::uint16_t seq = 0;
    std::span<const std::uint8_t> payload;
    if (plan_.method == ProbeMethod::IcmpEcho) {
      const auto icmp = icmp_part(packet, raw_);
      if (icmp.size() < kIcmpHeaderBytes + kIcmpMinPayload || icmp[0] != kEchoReply) return;
      // Datagram ICMP sockets rewrite the identifier; the nonce still pins the session.
      if (raw_ && get_be(icmp.subspan(4, 2), 2) != id_) return;
      seq = static_cast<std::uint16_t>(get_be(icmp.subspan(6, 2), 2));
      payload = icmp.subspan(kIcmpHeaderBytes);
    } else {
      if (packet.size() < kUdpMinPayload) return;
      if (get_be(packet.subspan(12, 2), 2) != id_) return;
      seq = static_cast<std::uint16_t>(get_be(packet.subspan(14, 2), 2));
      payload = packet;
    }
    if (get_be(payload.subspan(8, 4), 4) != nonce_) return;

    const auto it = pending_.find(seq);
    if (it == pending_.end()) return;  // duplicate or late reply
    ProbeSample& s = samples_[it->second.index];
    if (static_cast<std::int64_t>(get_be(payload.subspan(0, 8), 8)) != s.sent_at_us) return;
    s.rtt_s = static_cast<double>(recv_us - s.sent_at_us) * 1e-6;
    pending_.erase(it);
  }

  const ProbePlan& plan_;
  std::array<std::uint8_t, 4> addr_;
  std::uint32_t nonce_;
  std::uint16_t id_;
  bool raw_ = false;
  int connect_errno_ = 0;
  std::optional<Socket> sock_;
  std::vector<ProbeSample> samples_;
  std::map<std::uint16_t, Pending> pending_;
};

class IcmpHopProber : public HopProber {
 public:
  IcmpHopProber(std::array<std::uint8_t, 4> addr, double timeout_s)
      : addr_(addr),
        timeout_us_(static_cast<std::int64_t>(std::llround(timeout_s * 1e6))),
        sock_(open_icmp_socket(true).sock),
        id_(make_identifier()),
        nonce_(make_nonce()) {}

  HopReplyKind probe(int ttl) override {
    if (::setsockopt(sock_.fd(), IPPROTO_IP, IP_TTL, &ttl, sizeof ttl) != 0) {
      throw Error(ErrorCode::SocketFailure, "IP_TTL: " + errno_text(errno));
    }
    const auto seq = static_cast<std::uint16_t>(++seq_);
    std::vector<std::uint8_t> payload(kIcmpMinPayload, 0);
    put_be(std::span(payload).subspan(0, 8), static_cast<std::uint64_t>(monotonic_us()), 8);
    put_be(std::span(payload).subspan(8, 4), nonce_, 4);
    const auto pkt = build_echo_request(id_, seq, payload);
    const auto sa = to_sockaddr(addr_, 0);
    if (::sendto(sock_.fd(), pkt.data(), pkt.size(), 0, reinterpret_cast<const sockaddr*>(&sa),
                 sizeof sa) < 0) {
      return HopReplyKind::None;
    }

    const std::int64_t deadline = monotonic_us() + timeout_us_;
    std::array<std::uint8_t, 65536> buf{};
    for (;;) {
      const std::int64_t wait_us = deadline - monotonic_us();
      if (wait_us <= 0) return HopReplyKind::None;
      pollfd pfd{sock_.fd(), POLLIN, 0};
      const timespec ts{static_cast<time_t>(wait_us / 1000000),
                        static_cast<long>((wait_us % 1000000) * 1000)};
      if (::ppoll(&pfd, 1, &ts, nullptr) <= 0) continue;
      const ssize_t n = ::recv(sock_.fd(), buf.data(), buf.size(), MSG_DONTWAIT);
      if (n <= 0) continue;
      const auto icmp = icmp_part(std::span<const std::uint8_t>(buf.data(), n), true);
      if (icmp.size() < kIcmpHeaderBytes) continue;

      if (icmp[0] == kEchoReply && get_be(icmp.subspan(4, 2), 2) == id_ &&
          get_be(icmp.subspan(6, 2), 2) == seq) {
        return HopReplyKind::TargetReply;
      }
      if (icmp[0] == kTimeExceeded) {
        // Quoted original datagram: IP header then the first 8 bytes of our ICMP header.
        const auto quoted = icmp_part(icmp.subspan(kIcmpHeaderBytes), true);
        if (quoted.size() >= kIcmpHeaderBytes && quoted[0] == kEchoRequest &&
            get_be(quoted.subspan(4, 2), 2) == id_ && get_be(quoted.subspan(6, 2), 2) == seq) {
          return HopReplyKind::TimeExceeded;
        }
      }
    }
  }

 private:
  std::array<std::uint8_t, 4> addr_;
  std::int64_t timeout_us_;
  Socket sock_;
  std::uint16_t id_;
  std::uint32_t nonce_;
  std::uint32_t seq_ = 0;
};

}  // namespace

std::uint64_t wire_size(std::uint32_t payload_bytes, ProbeMethod method) {
  const std::uint64_t header =
      kIpv4HeaderBytes + (method == ProbeMethod::UdpEcho ? kUdpHeaderBytes : kIcmpHeaderBytes);
  return 8 * (std::uint64_t{payload_bytes} + header);
}

void ProbePlan::validate() const {
  if (sizes_payload_bytes.empty()) throw Error(ErrorCode::InvalidArgument, "no probe sizes");
  if (std::set<std::uint32_t>(sizes_payload_bytes.begin(), sizes_payload_bytes.end()).size() !=
      sizes_payload_bytes.size()) {
    throw Error(ErrorCode::InvalidArgument, "probe sizes must be distinct");
  }
  if (count_per_size < 1) throw Error(ErrorCode::InvalidArgument, "count must be >= 1");
  if (!(inter_probe_gap_s > 0.0)) throw Error(ErrorCode::InvalidArgument, "gap must be > 0");
  if (!(timeout_s > inter_probe_gap_s)) {
    throw Error(ErrorCode::InvalidArgument, "timeout must exceed the inter-probe gap");
  }
  const std::uint32_t min_payload =
      method == ProbeMethod::UdpEcho ? kUdpMinPayload : kIcmpMinPayload;
  for (const auto size : sizes_payload_bytes) {
    if (size < min_payload) {
      throw Error(ErrorCode::InvalidArgument, "payload of " + std::to_string(size) +
                                                  " bytes is below the minimum of " +
                                                  std::to_string(min_payload));
    }
    if (size > 65000) throw Error(ErrorCode::InvalidArgument, "payload too large");
  }
}

std::array<std::uint8_t, 4> resolve_ipv4(const std::string& host) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_DGRAM;
  addrinfo* res = nullptr;
  const int rc = ::getaddrinfo(host.c_str(), nullptr, &hints, &res);
  if (rc != 0 || res == nullptr) {
    throw Error(ErrorCode::ResolveFailure, "cannot resolve '" + host + "': " + gai_strerror(rc));
  }
  std::array<std::uint8_t, 4> addr{};
  std::memcpy(addr.data(), &reinterpret_cast<const sockaddr_in*>(res->ai_addr)->sin_addr, 4);
  ::freeaddrinfo(res);
  return addr;
}

std::vector<ProbeSample> run_session(const ProbePlan& plan) {
  plan.validate();
  const auto addr = resolve_ipv4(plan.target);
  EchoSession session(plan, addr);
  auto samples = session.run();
  if (std::all_of(samples.begin(), samples.end(), [](const auto& s) { return s.lost(); })) {
    throw Error(ErrorCode::AllProbesLost,
                "no replies from " + plan.target + " within " + std::to_string(plan.timeout_s) +
                    " s");
  }
  return samples;
}

int discover_hops(HopProber& prober, int max_ttl) {
  if (max_ttl < 1) throw Error(ErrorCode::InvalidArgument, "max_ttl must be >= 1");
  for (int ttl = 1; ttl <= max_ttl; ++ttl) {
    if (prober.probe(ttl) == HopReplyKind::TargetReply) return ttl;
  }
  throw Error(ErrorCode::NoReply, "target did not answer within " + std::to_string(max_ttl) +
                                      " hops");
}

int discover_hops(const std::string& target, int max_ttl, double timeout_s) {
  IcmpHopProber prober(resolve_ipv4(target), timeout_s);
  return discover_hops(prober, max_ttl);
}

}  // namespace bwest
