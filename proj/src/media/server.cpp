#include "jcall/media/server.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>

#include "jcall/util/log.hpp"

namespace jcall {

namespace {

constexpr std::size_t kAnsweredCacheMax = 1024;

MgcpResponse make_refusal(int code, std::string comment) {
  MgcpResponse rsp;
  rsp.code = code;
  rsp.comment = std::move(comment);
  return rsp;
}

std::string endpoint_id_for(const std::string& prefix, int index, const std::string& host) {
  return prefix + "/" + std::to_string(index) + "@" + host;
}

}  // namespace

const char* to_string(MsEndpointType type) {
  switch (type) {
    case MsEndpointType::Announcement: return "ann";
    case MsEndpointType::Ivr: return "ivr";
    case MsEndpointType::PacketRelayAnnouncement: return "pra";
    case MsEndpointType::PacketRelayIvr: return "pri";
  }
  return "?";
}

std::optional<MsEndpointType> ms_endpoint_type_from_prefix(std::string_view prefix) {
  if (prefix == "ann") return MsEndpointType::Announcement;
  if (prefix == "ivr") return MsEndpointType::Ivr;
  if (prefix == "pra") return MsEndpointType::PacketRelayAnnouncement;
  if (prefix == "pri") return MsEndpointType::PacketRelayIvr;
  return std::nullopt;
}

bool ms_endpoint_collects_digits(MsEndpointType type) {
  return type == MsEndpointType::Ivr || type == MsEndpointType::PacketRelayIvr;
}

std::optional<std::string> ms_parse_announcement_signal(std::string_view signal,
                                                        Micros* length,
                                                        Micros fallback,
                                                        const std::map<std::string, Micros>& catalog) {
  if (signal.size() < 6 || signal.substr(0, 4) != "ann(" || signal.back() != ')') {
    return std::nullopt;
  }
  std::string_view inner = signal.substr(4, signal.size() - 5);
  std::string name;
  std::string_view duration;
  if (auto comma = inner.find(','); comma != std::string_view::npos) {
    name = std::string(inner.substr(0, comma));
    duration = inner.substr(comma + 1);
  } else {
    name = std::string(inner);
  }
  if (name.empty() || name.find_first_of("(),") != std::string::npos) return std::nullopt;
  if (!duration.empty()) {
    if (duration.back() == 's') duration.remove_suffix(1);
    double secs = 0.0;
    auto [ptr, ec] = std::from_chars(duration.data(), duration.data() + duration.size(), secs);
    if (ec != std::errc() || ptr != duration.data() + duration.size() || secs < 0) {
      return std::nullopt;
    }
    *length = static_cast<Micros>(std::llround(secs * 1e6));
  } else if (auto it = catalog.find(name); it != catalog.end()) {
    *length = it->second;
  } else {
    *length = fallback;
  }
  return name;
}

MediaServer::MediaServer(Engine& engine, Transport& transport, MediaServerConfig config)
    : engine_(engine), config_(std::move(config)), agent_(engine, transport, config_.addr) {
  agent_.set_command_handler(
      [this](const MgcpCommand& cmd, const NetAddr& from) { on_command(cmd, from); });
}

void MediaServer::arm_fault(MgcpVerb verb, int code, int count) {
  faults_[verb] = {code, count};
}

const MediaServer::Endpoint* MediaServer::endpoint(const std::string& id) const {
  auto it = endpoints_.find(id);
  return it == endpoints_.end() ? nullptr : &it->second;
}

int MediaServer::connection_count() const {
  int n = 0;
  for (const auto& [id, ep] : endpoints_) n += static_cast<int>(ep.connections.size());
  return n;
}

int MediaServer::busy_endpoint_count() const {
  int n = 0;
  for (const auto& [id, ep] : endpoints_) {
    if (!ep.connections.empty()) ++n;
  }
  return n;
}

void MediaServer::on_command(const MgcpCommand& cmd, const NetAddr& from) {
  std::string key = from.to_string() + "/" + std::to_string(cmd.transaction_id);
  if (auto it = answered_.find(key); it != answered_.end()) {
    agent_.respond(it->second, from);
    return;
  }
  if (in_flight_.count(key)) return;
  if (config_.service_delay > 0) {
    in_flight_.insert(key);
    engine_.schedule_after(config_.service_delay, [this, cmd, from, key] {
      in_flight_.erase(key);
      process(cmd, from, key);
    });
    return;
  }
  process(cmd, from, key);
}

void MediaServer::process(const MgcpCommand& cmd, const NetAddr& from, const std::string& key) {
  MgcpResponse rsp = dispatch(cmd, from);
  rsp.transaction_id = cmd.transaction_id;
  answered_.emplace(key, rsp);
  answered_order_.push_back(key);
  while (answered_order_.size() > kAnsweredCacheMax) {
    answered_.erase(answered_order_.front());
    answered_order_.pop_front();
  }
  agent_.respond(rsp, from);
}

MgcpResponse MediaServer::dispatch(const MgcpCommand& cmd, const NetAddr& from) {
  if (auto it = faults_.find(cmd.verb); it != faults_.end() && it->second.second > 0) {
    --it->second.second;
    return make_refusal(it->second.first, "injected fault");
  }
  if (cmd.verb == MgcpVerb::Ntfy) return make_refusal(510, "unexpected command");
  auto name = parse_endpoint_name(cmd.endpoint_id);
  if (!name) return make_refusal(510, "malformed endpoint");
  if (!ms_endpoint_type_from_prefix(name->prefix)) {
    return make_refusal(500, "unknown endpoint");
  }
  if (cmd.verb == MgcpVerb::Crcx) return handle_crcx(cmd, *name);
  if (name->wildcard) return make_refusal(510, "wildcard endpoint");
  auto it = endpoints_.find(endpoint_id_for(name->prefix, name->index, name->host));
  if (it == endpoints_.end()) return make_refusal(500, "unknown endpoint");
  switch (cmd.verb) {
    case MgcpVerb::Mdcx: return handle_mdcx(cmd, it->second);
    case MgcpVerb::Dlcx: return handle_dlcx(cmd, it->second);
    case MgcpVerb::Rqnt: return handle_rqnt(cmd, it->second, from);
    default: return make_refusal(510, "unexpected command");
  }
}

std::optional<MediaServer::EndpointName> MediaServer::parse_endpoint_name(std::string_view id) {
  auto slash = id.find('/');
  auto at = id.find('@');
  if (slash == std::string_view::npos || at == std::string_view::npos || at < slash) {
    return std::nullopt;
  }
  EndpointName name;
  name.prefix = std::string(id.substr(0, slash));
  name.host = std::string(id.substr(at + 1));
  std::string_view index = id.substr(slash + 1, at - slash - 1);
  if (name.prefix.empty() || name.host.empty() || index.empty()) return std::nullopt;
  if (index == "$") {
    name.wildcard = true;
    return name;
  }
  int value = 0;
  auto [ptr, ec] = std::from_chars(index.data(), index.data() + index.size(), value);
  if (ec != std::errc() || ptr != index.data() + index.size() || value < 1) {
    return std::nullopt;
  }
  name.index = value;
  return name;
}

MediaServer::Endpoint* MediaServer::allocate_endpoint(const EndpointName& name) {
  for (int index = 1;; ++index) {
    if (config_.endpoints_per_type > 0 && index > config_.endpoints_per_type) return nullptr;
    std::string id = endpoint_id_for(name.prefix, index, name.host);
    auto it = endpoints_.find(id);
    if (it == endpoints_.end()) {
      Endpoint ep;
      ep.id = id;
      ep.type = *ms_endpoint_type_from_prefix(name.prefix);
      ep.index = index;
      return &endpoints_.emplace(id, std::move(ep)).first->second;
    }
    if (it->second.connections.empty()) {
      clear_request(it->second);
      return &it->second;
    }
  }
}

MgcpResponse MediaServer::handle_crcx(const MgcpCommand& cmd, const EndpointName& name) {
  if (!cmd.param("C") || !cmd.param("M")) {
    return make_refusal(510, "C and M are mandatory");
  }
  Endpoint* ep = nullptr;
  if (name.wildcard) {
    ep = allocate_endpoint(name);
    if (!ep) return make_refusal(500, "no endpoint available");
  } else {
    if (config_.endpoints_per_type > 0 && name.index > config_.endpoints_per_type) {
      return make_refusal(500, "unknown endpoint");
    }
    std::string id = endpoint_id_for(name.prefix, name.index, name.host);
    auto it = endpoints_.find(id);
    if (it == endpoints_.end()) {
      Endpoint fresh;
      fresh.id = id;
      fresh.type = *ms_endpoint_type_from_prefix(name.prefix);
      fresh.index = name.index;
      it = endpoints_.emplace(id, std::move(fresh)).first;
    }
    ep = &it->second;
  }

  Connection conn;
  conn.id = "conn" + std::to_string(next_conn_++);
  conn.call_token = *cmd.param("C");
  conn.mode = *cmd.param("M");
  conn.sdp_port = next_port_;
  next_port_ += 2;
  conn.remote_sdp = cmd.sdp;
  ports_[conn.sdp_port] = {ep->id, conn.id};

  SdpSession local;
  local.origin = "ms 1 1 IN IP4 " + ep->id.substr(ep->id.find('@') + 1);
  local.connection_address = ep->id.substr(ep->id.find('@') + 1);
  local.media.push_back({"audio", conn.sdp_port, {"0"}});

  std::string conn_id = conn.id;
  ep->connections.emplace(conn_id, std::move(conn));
  peak_connections_ = std::max(peak_connections_, connection_count());

  MgcpResponse rsp;
  rsp.code = 200;
  rsp.comment = "OK";
  rsp.set_param("I", conn_id);
  rsp.set_param("Z", ep->id);
  rsp.sdp = local;
  return rsp;
}

MgcpResponse MediaServer::handle_mdcx(const MgcpCommand& cmd, Endpoint& ep) {
  const std::string* conn_id = cmd.param("I");
  if (!conn_id) return make_refusal(510, "I is mandatory");
  auto it = ep.connections.find(*conn_id);
  if (it == ep.connections.end()) return make_refusal(510, "unknown connection");
  if (const std::string* mode = cmd.param("M")) it->second.mode = *mode;
  if (cmd.sdp) it->second.remote_sdp = cmd.sdp;
  MgcpResponse rsp;
  rsp.code = 200;
  rsp.comment = "OK";
  return rsp;
}

MgcpResponse MediaServer::handle_dlcx(const MgcpCommand& cmd, Endpoint& ep) {
  if (const std::string* conn_id = cmd.param("I")) {
    if (!ep.connections.count(*conn_id)) return make_refusal(510, "unknown connection");
    release_connection(ep, *conn_id);
  } else {
    std::vector<std::string> ids;
    for (const auto& [id, conn] : ep.connections) ids.push_back(id);
    for (const auto& id : ids) release_connection(ep, id);
  }
  MgcpResponse rsp;
  rsp.code = 200;
  rsp.comment = "OK";
  return rsp;
}

MgcpResponse MediaServer::handle_rqnt(const MgcpCommand& cmd, Endpoint& ep, const NetAddr& from) {
  const std::string* x = cmd.param("X");
  if (!x) return make_refusal(510, "X is mandatory");

  bool collecting = cmd.param("R") != nullptr;
  if (collecting && !ms_endpoint_collects_digits(ep.type)) {
    return make_refusal(510, "endpoint cannot collect digits");
  }

  DigitMap map;
  if (collecting) {
    const std::string* d = cmd.param("D");
    if (!d) return make_refusal(510, "digit map required");
    auto parsed = parse_digitmap(*d);
    if (!parsed.ok()) return make_refusal(510, "malformed digit map");
    map = parsed.take();
  }

  bool announcement = false;
  Micros ann_length = 0;
  if (const std::string* s = cmd.param("S")) {
    std::string_view signal = *s;
    if (signal.substr(0, 2) == "A/") signal.remove_prefix(2);
    if (!signal.empty()) {
      if (!ms_parse_announcement_signal(signal, &ann_length, config_.default_announcement_length,
                                        config_.announcements)) {
        return make_refusal(510, "unrecognized signal");
      }
      announcement = true;
    }
  }

  clear_request(ep);
  if (!collecting && !announcement) {
    // A request with nothing to watch or play cancels whatever was pending.
    MgcpResponse rsp;
    rsp.code = 200;
    rsp.comment = "OK";
    return rsp;
  }

  ActiveRequest req;
  req.x = *x;
  req.notify_dest = from;
  if (!ep.connections.empty()) req.call_token = ep.connections.begin()->second.call_token;
  req.collecting = collecting;
  req.map = std::move(map);
  req.announcement = announcement;
  ep.request = std::move(req);

  std::string endpoint_id = ep.id;
  std::string x_id = *x;
  if (announcement) {
    ep.request->announcement_timer = engine_.schedule_after(
        ann_length, [this, endpoint_id, x_id] { on_announcement_done(endpoint_id, x_id); });
  }
  if (collecting) {
    ep.request->digit_timer = engine_.schedule_after(
        config_.inter_digit_timeout, [this, endpoint_id, x_id] { on_digit_timer(endpoint_id, x_id); });
  }

  MgcpResponse rsp;
  rsp.code = 200;
  rsp.comment = "OK";
  return rsp;
}

void MediaServer::inject_dtmf(int sdp_port, char digit) {
  auto port_it = ports_.find(sdp_port);
  if (port_it == ports_.end()) {
    ++dropped_digits_;
    logf(LogLevel::Warn, "ms: digit %c for unknown port %d dropped", digit, sdp_port);
    return;
  }
  auto ep_it = endpoints_.find(port_it->second.endpoint_id);
  if (ep_it == endpoints_.end()) {
    ++dropped_digits_;
    return;
  }
  Endpoint& ep = ep_it->second;
  if (!ep.request || !ep.request->collecting) {
    ++dropped_digits_;
    logf(LogLevel::Warn, "ms %s: digit %c with no collection underway", ep.id.c_str(), digit);
    return;
  }
  ActiveRequest& req = *ep.request;
  req.collected.push_back(digit);
  MatchResult m = digitmap_match(req.map, req.collected);
  switch (m.kind) {
    case MatchKind::Full:
      finish_request(ep, "D/" + m.matched);
      break;
    case MatchKind::Partial: {
      if (req.digit_timer) engine_.cancel(*req.digit_timer);
      std::string endpoint_id = ep.id;
      std::string x_id = req.x;
      req.digit_timer = engine_.schedule_after(config_.inter_digit_timeout, [this, endpoint_id, x_id] {
        on_digit_timer(endpoint_id, x_id);
      });
      break;
    }
    case MatchKind::None:
      finish_request(ep, "D/fail(nomatch)");
      break;
  }
}

void MediaServer::on_digit_timer(const std::string& endpoint_id, const std::string& x) {
  auto it = endpoints_.find(endpoint_id);
  if (it == endpoints_.end()) return;
  Endpoint& ep = it->second;
  if (!ep.request || ep.request->x != x) return;
  ep.request->digit_timer.reset();
  if (digitmap_timer_accepts(ep.request->map, ep.request->collected)) {
    finish_request(ep, "D/" + ep.request->collected);
  } else {
    finish_request(ep, "D/fail(timeout)");
  }
}

void MediaServer::on_announcement_done(const std::string& endpoint_id, const std::string& x) {
  auto it = endpoints_.find(endpoint_id);
  if (it == endpoints_.end()) return;
  Endpoint& ep = it->second;
  if (!ep.request || ep.request->x != x) return;
  ep.request->announcement_timer.reset();
  // With collection underway the announcement just stops playing; the notify
  // is owed to the digits or their timer.
  if (ep.request->collecting) return;
  finish_request(ep, "A/oc");
}

void MediaServer::finish_request(Endpoint& ep, const std::string& observed) {
  ActiveRequest req = std::move(*ep.request);
  ep.request.reset();
  if (req.digit_timer) engine_.cancel(*req.digit_timer);
  if (req.announcement_timer) engine_.cancel(*req.announcement_timer);

  MgcpCommand ntfy;
  ntfy.verb = MgcpVerb::Ntfy;
  ntfy.endpoint_id = ep.id;
  ntfy.set_param("X", req.x);
  ntfy.set_param("O", observed);
  if (!req.call_token.empty()) ntfy.set_param("C", req.call_token);
  agent_.send(ntfy, req.notify_dest, [](MgcpTxOutcome, const MgcpResponse*) {});
}

void MediaServer::release_connection(Endpoint& ep, const std::string& conn_id) {
  auto it = ep.connections.find(conn_id);
  if (it == ep.connections.end()) return;
  ports_.erase(it->second.sdp_port);
  ep.connections.erase(it);
  if (ep.connections.empty()) clear_request(ep);
}

void MediaServer::clear_request(Endpoint& ep) {
  if (!ep.request) return;
  if (ep.request->digit_timer) engine_.cancel(*ep.request->digit_timer);
  if (ep.request->announcement_timer) engine_.cancel(*ep.request->announcement_timer);
  ep.request.reset();
}

}  // namespace jcall
