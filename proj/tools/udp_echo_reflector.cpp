// Minimal UDP echo reflector: returns every datagram verbatim to its sender.
// Pairs with `bwest probe --method udp` on hosts without raw-socket privilege.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <iostream>
#include <string>

#include "CLI11.hpp"

namespace {

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UDP echo reflector", "bwest-reflector"};
  std::uint16_t port = 7;
  std::string bind_addr = "0.0.0.0";
  bool verbose = false;
  app.add_option("-p,--port", port, "Port to listen on");
  app.add_option("-b,--bind", bind_addr, "IPv4 address to bind");
  app.add_flag("-v,--verbose", verbose, "Log each datagram");
  CLI11_PARSE(app, argc, argv);

  const int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
  if (fd < 0) {
    std::cerr << "socket: " << std::strerror(errno) << '\n';
    return 1;
  }
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(port);
  if (::inet_pton(AF_INET, bind_addr.c_str(), &sa.sin_addr) != 1) {
    std::cerr << "bad bind address '" << bind_addr << "'\n";
    return 64;
  }
  if (::bind(fd, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0) {
    std::cerr << "bind: " << std::strerror(errno) << '\n';
    ::close(fd);
    return 1;
  }

  struct sigaction act {};
  act.sa_handler = on_signal;
  ::sigaction(SIGINT, &act, nullptr);
  ::sigaction(SIGTERM, &act, nullptr);

  std::cerr << "reflecting on " << bind_addr << ':' << port << '\n';
  std::array<char, 65536> buf{};
  while (!g_stop) {
    sockaddr_in peer{};
    socklen_t len = sizeof peer;
    const ssize_t n = ::recvfrom(fd, buf.data(), buf.size(), 0, reinterpret_cast<sockaddr*>(&peer), &len);
    if (n < 0) {
      if (errno == EINTR) continue;
      std::cerr << "recvfrom: " << std::strerror(errno) << '\n';
      break;
    }
    ::sendto(fd, buf.data(), static_cast<std::size_t>(n), 0, reinterpret_cast<sockaddr*>(&peer), len);
    if (verbose) std::cerr << n << " bytes from " << ::inet_ntoa(peer.sin_addr) << '\n';
  }
  ::close(fd);
  return 0;
}
