#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>

#include "jcall/net/engine.hpp"

namespace jcall {

struct NetAddr {
  std::string host;
  std::uint16_t port = 0;

  bool operator==(const NetAddr&) const = default;
  std::string to_string() const;
  static std::optional<NetAddr> parse(std::string_view text);  // "host:port"
};

struct NetAddrHash {
  std::size_t operator()(const NetAddr& a) const {
    return std::hash<std::string>()(a.host) * 31 + a.port;
  }
};

struct Datagram {
  NetAddr from;
  NetAddr to;
  std::string payload;
};

class PacketSink {
public:
  virtual ~PacketSink() = default;
  virtual void on_datagram(const Datagram& d) = 0;
};

enum class WireDisposition { Delivered, Dropped, NoRoute };

/// Observes every send attempt, including ones a fault rule swallows.
class WireTap {
public:
  virtual ~WireTap() = default;
  virtual void on_wire(Micros at, const Datagram& d, WireDisposition disp,
                       const std::string& note) = 0;
};

// Returns a non-empty note when the datagram must be dropped.
using DropFilter = std::function<std::optional<std::string>(const Datagram&)>;

class Transport {
public:
  virtual ~Transport() = default;
  virtual void bind(const NetAddr& addr, PacketSink* sink) = 0;
  virtual void unbind(const NetAddr& addr) = 0;
  virtual void send(const Datagram& d) = 0;
};

/// Ordered in-memory delivery through the engine queue. Authoritative for all
/// correctness and golden-trace runs.
class InprocTransport : public Transport {
public:
  explicit InprocTransport(Engine& engine) : engine_(engine) {}

  void bind(const NetAddr& addr, PacketSink* sink) override;
  void unbind(const NetAddr& addr) override;
  void send(const Datagram& d) override;

  void set_tap(WireTap* tap) { tap_ = tap; }
  void set_drop_filter(DropFilter filter) { drop_ = std::move(filter); }
  void set_latency(Micros latency) { latency_ = latency; }

private:
  Engine& engine_;
  std::unordered_map<NetAddr, PacketSink*, NetAddrHash> sinks_;
  WireTap* tap_ = nullptr;
  DropFilter drop_;
  Micros latency_ = 0;
};

}  // namespace jcall
