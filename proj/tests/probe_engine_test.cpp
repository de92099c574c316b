#include "bwest/probe_engine.hpp"

#include <gtest/gtest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <thread>

#include "bwest/error.hpp"
#include "bwest/estimator.hpp"

namespace bwest {
namespace {

TEST(WireSize, HeaderAccounting) {
  EXPECT_EQ(wire_size(100, ProbeMethod::IcmpEcho), 1024u);
  EXPECT_EQ(wire_size(1124, ProbeMethod::IcmpEcho), 9216u);
  EXPECT_EQ(wire_size(0, ProbeMethod::UdpEcho), 224u);
  for (std::uint32_t p = 0; p < 70000; p += 37) {
    EXPECT_EQ(wire_size(p + 1, ProbeMethod::IcmpEcho) - wire_size(p, ProbeMethod::IcmpEcho), 8u);
  }
}

ProbePlan loopback_plan() {
  ProbePlan plan;
  plan.target = "127.0.0.1";
  plan.count_per_size = 5;
  plan.inter_probe_gap_s = 0.01;
  plan.timeout_s = 1.0;
  return plan;
}

TEST(ProbePlan, Validation) {
  auto plan = loopback_plan();
  EXPECT_NO_THROW(plan.validate());
  auto dup = plan;
  dup.sizes_payload_bytes = {100, 100};
  EXPECT_THROW(dup.validate(), Error);
  auto zero = plan;
  zero.count_per_size = 0;
  EXPECT_THROW(zero.validate(), Error);
  auto gap = plan;
  gap.inter_probe_gap_s = 0;
  EXPECT_THROW(gap.validate(), Error);
  auto slow = plan;
  slow.timeout_s = slow.inter_probe_gap_s;
  EXPECT_THROW(slow.validate(), Error);
  auto tiny = plan;
  tiny.sizes_payload_bytes = {kIcmpMinPayload - 1, 100};
  EXPECT_THROW(tiny.validate(), Error);
  auto huge = plan;
  huge.sizes_payload_bytes = {100, 70000};
  EXPECT_THROW(huge.validate(), Error);
  auto empty = plan;
  empty.sizes_payload_bytes.clear();
  EXPECT_THROW(empty.validate(), Error);
  auto udp = plan;
  udp.method = ProbeMethod::UdpEcho;
  udp.sizes_payload_bytes = {kUdpMinPayload - 1, 100};
  EXPECT_THROW(udp.validate(), Error);
}

TEST(Resolve, NumericAndBogus) {
  const auto a = resolve_ipv4("127.0.0.1");
  EXPECT_EQ(a[0], 127);
  EXPECT_EQ(a[3], 1);
  try {
    resolve_ipv4("no-such-host.invalid");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ResolveFailure);
  }
}

void check_invariants(const ProbePlan& plan, const std::vector<ProbeSample>& samples) {
  ASSERT_EQ(samples.size(), plan.sizes_payload_bytes.size() * plan.count_per_size);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    EXPECT_EQ(s.seq, i);
    EXPECT_EQ(s.method, plan.method);
    EXPECT_EQ(s.payload_bytes, plan.sizes_payload_bytes[i % plan.sizes_payload_bytes.size()]);
    EXPECT_EQ(s.wire_bits, wire_size(s.payload_bytes, plan.method));
    if (i > 0) EXPECT_GE(s.sent_at_us, samples[i - 1].sent_at_us);
    if (s.rtt_s) {
      EXPECT_GT(*s.rtt_s, 0.0);
      EXPECT_LE(*s.rtt_s, plan.timeout_s);
    }
  }
}

TEST(RunSession, LoopbackIcmp) {
  const auto plan = loopback_plan();
  std::vector<ProbeSample> samples;
  try {
    samples = run_session(plan);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::PermissionDenied) GTEST_SKIP() << e.what();
    throw;
  }
  check_invariants(plan, samples);
  for (const auto& s : samples) {
    ASSERT_FALSE(s.lost());
    EXPECT_LT(*s.rtt_s, 0.005);
  }
}

TEST(RunSession, BlackholeIsAllLost) {
  auto plan = loopback_plan();
  plan.target = "198.51.100.1";
  plan.count_per_size = 2;
  plan.timeout_s = 0.2;
  try {
    run_session(plan);
    FAIL();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::PermissionDenied) GTEST_SKIP() << e.what();
    EXPECT_EQ(e.code(), ErrorCode::AllProbesLost);
  }
}

/// Minimal UDP reflector on an ephemeral loopback port.
class Reflector {
 public:
  explicit Reflector(bool drop_odd = false) : drop_odd_(drop_odd) {
    fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    ::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    thread_ = std::thread([this] { loop(); });
  }
  ~Reflector() {
    stop_ = true;
    thread_.join();
    ::close(fd_);
  }
  std::uint16_t port() const { return port_; }

 private:
  void loop() {
    std::vector<char> buf(70000);
    int n_seen = 0;
    while (!stop_) {
      pollfd p{fd_, POLLIN, 0};
      if (::poll(&p, 1, 20) <= 0) continue;
      sockaddr_in from{};
      socklen_t len = sizeof from;
      const auto n = ::recvfrom(fd_, buf.data(), buf.size(), 0,
                                reinterpret_cast<sockaddr*>(&from), &len);
      if (n < 0) continue;
      if (drop_odd_ && (n_seen++ % 2 == 1)) continue;
      ::sendto(fd_, buf.data(), static_cast<std::size_t>(n), 0,
               reinterpret_cast<sockaddr*>(&from), len);
    }
  }

  int fd_ = -1;
  std::uint16_t port_ = 0;
  bool drop_odd_;
  std::atomic<bool> stop_{false};
  std::thread thread_;
};

TEST(RunSession, UdpEcho) {
  Reflector reflector;
  auto plan = loopback_plan();
  plan.method = ProbeMethod::UdpEcho;
  plan.udp_port = reflector.port();
  const auto samples = run_session(plan);
  check_invariants(plan, samples);
  for (const auto& s : samples) EXPECT_FALSE(s.lost());
  const auto profile = min_delay_profile(samples, 5);
  EXPECT_EQ(profile.points.size(), 2u);
}

TEST(RunSession, UdpPartialLossKeepsOrder) {
  Reflector reflector(true);
  auto plan = loopback_plan();
  plan.method = ProbeMethod::UdpEcho;
  plan.udp_port = reflector.port();
  plan.timeout_s = 0.2;
  const auto samples = run_session(plan);
  check_invariants(plan, samples);
  std::size_t lost = 0;
  for (const auto& s : samples) lost += s.lost();
  EXPECT_EQ(lost, samples.size() / 2);
}

TEST(RunSession, UdpNobodyListening) {
  std::uint16_t port;
  {
    Reflector r;
    port = r.port();
  }
  auto plan = loopback_plan();
  plan.method = ProbeMethod::UdpEcho;
  plan.udp_port = port;
  plan.count_per_size = 2;
  plan.timeout_s = 0.2;
  try {
    run_session(plan);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AllProbesLost);
  }
}

class StubProber : public HopProber {
 public:
  explicit StubProber(int target_ttl, int silent_ttl = 0)
      : target_ttl_(target_ttl), silent_ttl_(silent_ttl) {}
  HopReplyKind probe(int ttl) override {
    probed.push_back(ttl);
    if (ttl == silent_ttl_) return HopReplyKind::None;
    return ttl >= target_ttl_ ? HopReplyKind::TargetReply : HopReplyKind::TimeExceeded;
  }
  std::vector<int> probed;

 private:
  int target_ttl_;
  int silent_ttl_;
};

TEST(DiscoverHops, StubPaths) {
  StubProber seven(7);
  EXPECT_EQ(discover_hops(seven, 30), 7);
  EXPECT_EQ(seven.probed.back(), 7);

  StubProber silent_router(4, 2);
  EXPECT_EQ(discover_hops(silent_router, 30), 4);

  StubProber far(7);
  try {
    discover_hops(far, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoReply);
  }
  EXPECT_THROW(discover_hops(far, 0), Error);
}

TEST(DiscoverHops, Loopback) {
  try {
    EXPECT_EQ(discover_hops("127.0.0.1", 5, 0.5), 1);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::PermissionDenied) GTEST_SKIP() << e.what();
    throw;
  }
}

}  // namespace
}  // namespace bwest
