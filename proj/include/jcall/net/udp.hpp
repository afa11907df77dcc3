#pragma once

#include <mutex>
#include <thread>
#include <vector>

#include "jcall/net/transport.hpp"

namespace jcall {

/// Real loopback/LAN datagram transport. A single receiver thread polls all
/// bound sockets and hands packets to the engine, so node code never sees a
/// second thread. No ordering or loss guarantees beyond what UDP gives.
class UdpTransport : public Transport {
public:
  explicit UdpTransport(Engine& engine);
  ~UdpTransport() override;

  void bind(const NetAddr& addr, PacketSink* sink) override;
  void unbind(const NetAddr& addr) override;
  void send(const Datagram& d) override;

  void set_tap(WireTap* tap) { tap_ = tap; }
  void set_drop_filter(DropFilter filter) { drop_ = std::move(filter); }

  // True if every bind so far succeeded; sandboxed environments without
  // loopback sockets make this false and callers should fall back.
  bool healthy() const { return healthy_; }

private:
  struct Socket {
    int fd = -1;
    NetAddr addr;
    PacketSink* sink = nullptr;
  };

  void rx_loop();
  void wake();
  int find_fd(const NetAddr& from);

  Engine& engine_;
  mutable std::mutex mu_;
  std::vector<Socket> socks_;
  int wake_pipe_[2] = {-1, -1};
  std::thread rx_;
  bool stop_ = false;
  bool healthy_ = true;
  int send_fd_ = -1;
  WireTap* tap_ = nullptr;
  DropFilter drop_;
};

}  // namespace jcall
