#include "jcall/net/transport.hpp"

#include <charconv>

#include "jcall/util/log.hpp"

namespace jcall {

std::string NetAddr::to_string() const {
  return host + ":" + std::to_string(port);
}

std::optional<NetAddr> NetAddr::parse(std::string_view text) {
  auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0 ||
      colon + 1 >= text.size())
    return std::nullopt;
  std::string_view port_part = text.substr(colon + 1);
  unsigned port = 0;
  auto [ptr, ec] =
      std::from_chars(port_part.data(), port_part.data() + port_part.size(), port);
  if (ec != std::errc() || ptr != port_part.data() + port_part.size() ||
      port == 0 || port > 65535)
    return std::nullopt;
  return NetAddr{std::string(text.substr(0, colon)),
                 static_cast<std::uint16_t>(port)};
}

void InprocTransport::bind(const NetAddr& addr, PacketSink* sink) {
  sinks_[addr] = sink;
}

void InprocTransport::unbind(const NetAddr& addr) { sinks_.erase(addr); }

void InprocTransport::send(const Datagram& d) {
  std::optional<std::string> drop_note;
  if (drop_) drop_note = drop_(d);

  WireDisposition disp = WireDisposition::Delivered;
  std::string note;
  if (drop_note) {
    disp = WireDisposition::Dropped;
    note = *drop_note;
  } else if (!sinks_.count(d.to)) {
    disp = WireDisposition::NoRoute;
  }
  if (tap_) tap_->on_wire(engine_.now(), d, disp, note);
  if (disp != WireDisposition::Delivered) {
    if (disp == WireDisposition::NoRoute)
      logf(LogLevel::Warn, "inproc: no sink bound at %s",
           d.to.to_string().c_str());
    return;
  }
  Datagram copy = d;
  engine_.schedule_after(latency_, [this, copy] {
    auto it = sinks_.find(copy.to);
    if (it == sinks_.end()) return;
    it->second->on_datagram(copy);
  });
}

}  // namespace jcall
