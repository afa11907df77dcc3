#include "jcall/net/udp.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>

#include "jcall/util/log.hpp"

namespace jcall {

namespace {
bool resolve(const NetAddr& addr, sockaddr_in& out) {
  std::memset(&out, 0, sizeof(out));
  out.sin_family = AF_INET;
  out.sin_port = htons(addr.port);
  std::string host = addr.host;
  if (host == "localhost" || host.empty()) host = "127.0.0.1";
  return inet_pton(AF_INET, host.c_str(), &out.sin_addr) == 1;
}
}  // namespace

UdpTransport::UdpTransport(Engine& engine) : engine_(engine) {
  if (pipe(wake_pipe_) != 0) healthy_ = false;
  send_fd_ = socket(AF_INET, SOCK_DGRAM, 0);
  if (send_fd_ < 0) healthy_ = false;
}

UdpTransport::~UdpTransport() {
  {
    std::lock_guard<std::mutex> lock(mu_);
    stop_ = true;
  }
  wake();
  if (rx_.joinable()) rx_.join();
  for (auto& s : socks_)
    if (s.fd >= 0) close(s.fd);
  if (send_fd_ >= 0) close(send_fd_);
  if (wake_pipe_[0] >= 0) close(wake_pipe_[0]);
  if (wake_pipe_[1] >= 0) close(wake_pipe_[1]);
}

void UdpTransport::wake() {
  if (wake_pipe_[1] >= 0) {
    char b = 'w';
    ssize_t n = write(wake_pipe_[1], &b, 1);
    (void)n;
  }
}

void UdpTransport::bind(const NetAddr& addr, PacketSink* sink) {
  int fd = socket(AF_INET, SOCK_DGRAM, 0);
  if (fd < 0) {
    healthy_ = false;
    return;
  }
  int one = 1;
  setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in sa;
  if (!resolve(addr, sa) || ::bind(fd, reinterpret_cast<sockaddr*>(&sa),
                                   sizeof(sa)) != 0) {
    logf(LogLevel::Error, "udp: cannot bind %s", addr.to_string().c_str());
    close(fd);
    healthy_ = false;
    return;
  }
  fcntl(fd, F_SETFL, O_NONBLOCK);
  {
    std::lock_guard<std::mutex> lock(mu_);
    socks_.push_back(Socket{fd, addr, sink});
    if (!rx_.joinable()) rx_ = std::thread([this] { rx_loop(); });
  }
  wake();
}

void UdpTransport::unbind(const NetAddr& addr) {
  std::lock_guard<std::mutex> lock(mu_);
  for (auto& s : socks_) {
    if (s.addr == addr) s.sink = nullptr;
  }
}

int UdpTransport::find_fd(const NetAddr& from) {
  std::lock_guard<std::mutex> lock(mu_);
  for (auto& s : socks_)
    if (s.addr == from) return s.fd;
  return send_fd_;
}

void UdpTransport::send(const Datagram& d) {
  std::optional<std::string> drop_note;
  if (drop_) drop_note = drop_(d);
  WireDisposition disp =
      drop_note ? WireDisposition::Dropped : WireDisposition::Delivered;
  if (tap_) tap_->on_wire(engine_.now(), d, disp, drop_note.value_or(""));
  if (disp == WireDisposition::Dropped) return;

  sockaddr_in sa;
  if (!resolve(d.to, sa)) {
    logf(LogLevel::Warn, "udp: unresolvable destination %s",
         d.to.to_string().c_str());
    return;
  }
  int fd = find_fd(d.from);
  if (fd < 0) return;
  sendto(fd, d.payload.data(), d.payload.size(), 0,
         reinterpret_cast<sockaddr*>(&sa), sizeof(sa));
}

void UdpTransport::rx_loop() {
  std::vector<char> buf(65536);
  for (;;) {
    std::vector<pollfd> fds;
    std::vector<Socket> snapshot;
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (stop_) return;
      snapshot = socks_;
    }
    fds.push_back(pollfd{wake_pipe_[0], POLLIN, 0});
    for (auto& s : snapshot) fds.push_back(pollfd{s.fd, POLLIN, 0});
    int rc = poll(fds.data(), fds.size(), 500);
    if (rc < 0) continue;
    if (fds[0].revents & POLLIN) {
      char sink_buf[64];
      ssize_t n = read(wake_pipe_[0], sink_buf, sizeof(sink_buf));
      (void)n;
    }
    for (std::size_t i = 1; i < fds.size(); ++i) {
      if (!(fds[i].revents & POLLIN)) continue;
      const Socket& s = snapshot[i - 1];
      for (;;) {
        sockaddr_in peer;
        socklen_t peer_len = sizeof(peer);
        ssize_t n = recvfrom(s.fd, buf.data(), buf.size(), 0,
                             reinterpret_cast<sockaddr*>(&peer), &peer_len);
        if (n <= 0) break;
        if (!s.sink) continue;
        char ip[INET_ADDRSTRLEN] = {0};
        inet_ntop(AF_INET, &peer.sin_addr, ip, sizeof(ip));
        Datagram d;
        d.from = NetAddr{ip, ntohs(peer.sin_port)};
        d.to = s.addr;
        d.payload.assign(buf.data(), static_cast<std::size_t>(n));
        PacketSink* sink = s.sink;
        engine_.post_external([sink, d] { sink->on_datagram(d); });
      }
    }
  }
}

}  // namespace jcall
