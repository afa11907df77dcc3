#include "jcall/load/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <memory>
#include <set>

#include "jcall/jcc/monitor.hpp"
#include "jcall/jcc/provider.hpp"
#include "jcall/media/server.hpp"
#include "jcall/mgcp/message.hpp"
#include "jcall/net/engine.hpp"
#include "jcall/net/transport.hpp"
#include "jcall/net/udp.hpp"
#include "jcall/sip/transaction.hpp"
#include "jcall/util/log.hpp"

namespace jcall {

const char* to_string(BenchError e) {
  switch (e) {
    case BenchError::ConfigInvalid: return "ConfigInvalid";
    case BenchError::TopologyUnreachable: return "TopologyUnreachable";
  }
  return "?";
}

Result<FaultPlan, BenchError> parse_fault_spec(const std::string& spec) {
  FaultPlan plan;
  std::size_t pos = 0;
  while (pos < spec.size()) {
    auto comma = spec.find(',', pos);
    if (comma == std::string::npos) comma = spec.size();
    std::string item = spec.substr(pos, comma - pos);
    pos = comma + 1;
    if (item.empty()) continue;
    if (item == "drop-first:crcx-ok") {
      plan.drop_first_crcx_ok = true;
    } else if (item == "drop-first:ntfy-ack") {
      plan.drop_first_ntfy_ack = true;
    } else if (item.rfind("ms-delay:", 0) == 0) {
      std::string v = item.substr(9);
      if (v.size() > 2 && v.compare(v.size() - 2, 2, "ms") == 0)
        v.resize(v.size() - 2);
      char* end = nullptr;
      long ms = std::strtol(v.c_str(), &end, 10);
      if (v.empty() || *end != '\0' || ms < 0)
        return make_err(BenchError::ConfigInvalid, "bad delay: " + item);
      plan.ms_delay = millis(ms);
    } else if (item.rfind("crcx-fail:", 0) == 0 ||
               item.rfind("mdcx-fail:", 0) == 0) {
      std::string v = item.substr(10);
      char* end = nullptr;
      long n = std::strtol(v.c_str(), &end, 10);
      if (v.empty() || *end != '\0' || n < 0)
        return make_err(BenchError::ConfigInvalid, "bad count: " + item);
      (item[0] == 'c' ? plan.crcx_fail : plan.mdcx_fail) = static_cast<int>(n);
    } else {
      return make_err(BenchError::ConfigInvalid, "unknown fault: " + item);
    }
  }
  return plan;
}

namespace {

struct AddressPlan {
  NetAddr uac;
  NetAddr as_sip;
  NetAddr as_mgcp;
  NetAddr uas;
  std::vector<NetAddr> ms;
  std::string callee_domain;
};

AddressPlan make_plan(TransportKind kind, int ms_count) {
  AddressPlan plan;
  if (kind == TransportKind::Inproc) {
    plan.uac = {"uac", 5060};
    plan.as_sip = {"as", 5060};
    plan.as_mgcp = {"as", 2727};
    plan.uas = {"uas", 5060};
    for (int i = 0; i < ms_count; ++i)
      plan.ms.push_back({"ms" + std::to_string(i + 1), 2427});
    plan.callee_domain = "uas";
  } else {
    plan.uac = {"127.0.0.1", 35062};
    plan.as_sip = {"127.0.0.1", 35060};
    plan.as_mgcp = {"127.0.0.1", 32727};
    plan.uas = {"127.0.0.1", 35061};
    for (int i = 0; i < ms_count; ++i)
      plan.ms.push_back({"127.0.0.1", static_cast<std::uint16_t>(32427 + i)});
    plan.callee_domain = plan.uas.to_string();
  }
  return plan;
}

std::string base_call_id(std::string id) {
  if (id.size() > 2 && id.compare(id.size() - 2, 2, "-b") == 0)
    id.resize(id.size() - 2);
  return id;
}

/// Sees every wire attempt, keeps the canonical trace text, and charges each
/// message to a call so per-call wire counts can be reported.
class Tracer : public WireTap {
public:
  explicit Tracer(bool keep_lines) : keep_lines_(keep_lines) {}

  void on_wire(Micros at, const Datagram& d, WireDisposition disp,
               const std::string& note) override {
    std::string proto;
    std::string summary;
    std::string call;
    classify(d, proto, summary, call);
    if (!call.empty()) ++wire_by_call_[call];
    if (!keep_lines_) return;
    char head[96];
    std::snprintf(head, sizeof(head), "%9lld ", static_cast<long long>(at));
    std::string line = head + d.from.to_string() + "->" + d.to.to_string() +
                       " " + proto + " ";
    if (disp == WireDisposition::Dropped) line += "DROP ";
    if (disp == WireDisposition::NoRoute) line += "NOROUTE ";
    line += summary;
    if (!note.empty()) line += " [" + note + "]";
    lines_.push_back(std::move(line));
  }

  int wire_count(const std::string& call) const {
    auto it = wire_by_call_.find(call);
    return it == wire_by_call_.end() ? 0 : it->second;
  }

  std::string text() const {
    std::string out;
    for (const auto& line : lines_) {
      out += line;
      out += "\n";
    }
    return out;
  }

private:
  struct TxInfo {
    std::string call;
    bool crcx = false;
  };

  void classify(const Datagram& d, std::string& proto, std::string& summary,
                std::string& call) {
    auto eol = d.payload.find("\r\n");
    std::string_view first(d.payload.data(),
                           eol == std::string::npos ? d.payload.size() : eol);
    if (first.find("SIP/2.0") != std::string_view::npos) {
      proto = "SIP";
      classify_sip(d.payload, summary, call);
    } else {
      proto = "MGCP";
      classify_mgcp(d, summary, call);
    }
  }

  void classify_sip(const std::string& payload, std::string& summary,
                    std::string& call) {
    auto parsed = parse_sip(payload);
    if (!parsed.ok()) {
      summary = "unparsed";
      return;
    }
    SipMessage msg = parsed.take();
    call = base_call_id(msg.call_id());
    if (msg.is_request()) {
      summary = msg.method_text + " " + msg.request_uri;
    } else {
      auto cseq = msg.cseq();
      summary = std::to_string(msg.status) + " " +
                (cseq ? cseq->method : std::string("?"));
    }
    summary += " call=" + call;
  }

  void classify_mgcp(const Datagram& d, std::string& summary,
                     std::string& call) {
    auto parsed = parse_mgcp(d.payload);
    if (!parsed.ok()) {
      summary = "unparsed";
      return;
    }
    MgcpMessage msg = parsed.take();
    if (auto* cmd = std::get_if<MgcpCommand>(&msg)) {
      summary = std::string(to_string(cmd->verb)) +
                " tx=" + std::to_string(cmd->transaction_id) + " " +
                cmd->endpoint_id;
      for (const char* code : {"C", "I", "X", "S", "R", "D", "O"}) {
        if (const std::string* v = cmd->param(code))
          summary += std::string(" ") + code + "=" + *v;
      }
      if (const std::string* c = cmd->param("C")) {
        call = *c;
      } else {
        auto it = ep_call_.find(d.to.to_string() + "|" + cmd->endpoint_id);
        if (it != ep_call_.end()) call = it->second;
      }
      std::string key =
          d.to.to_string() + "#" + std::to_string(cmd->transaction_id);
      tx_call_[key] = {call, cmd->verb == MgcpVerb::Crcx};
    } else {
      auto& rsp = std::get<MgcpResponse>(msg);
      summary = std::to_string(rsp.code) +
                " tx=" + std::to_string(rsp.transaction_id);
      for (const char* code : {"I", "Z"}) {
        if (const std::string* v = rsp.param(code))
          summary += std::string(" ") + code + "=" + *v;
      }
      std::string key =
          d.from.to_string() + "#" + std::to_string(rsp.transaction_id);
      auto it = tx_call_.find(key);
      if (it != tx_call_.end()) {
        call = it->second.call;
        if (it->second.crcx && rsp.ok()) {
          if (const std::string* z = rsp.param("Z"))
            ep_call_[d.from.to_string() + "|" + *z] = call;
        }
      }
    }
  }

  bool keep_lines_;
  std::vector<std::string> lines_;
  std::map<std::string, int> wire_by_call_;
  std::map<std::string, TxInfo> tx_call_;
  std::map<std::string, std::string> ep_call_;
};

/// Drop filter for the first-answer faults. It watches commands go past so it
/// can recognize which 2xx answers belong to a create or a notify.
class FaultInjector {
public:
  explicit FaultInjector(const FaultPlan& plan) : plan_(plan) {}

  std::optional<std::string> operator()(const Datagram& d) {
    if (!plan_.drop_first_crcx_ok && !plan_.drop_first_ntfy_ack)
      return std::nullopt;
    auto eol = d.payload.find("\r\n");
    std::string_view first(d.payload.data(),
                           eol == std::string::npos ? d.payload.size() : eol);
    if (first.find("SIP/2.0") != std::string_view::npos) return std::nullopt;
    auto parsed = parse_mgcp(d.payload);
    if (!parsed.ok()) return std::nullopt;
    MgcpMessage msg = parsed.take();
    if (auto* cmd = std::get_if<MgcpCommand>(&msg)) {
      std::string key =
          d.to.to_string() + "#" + std::to_string(cmd->transaction_id);
      if (cmd->verb == MgcpVerb::Crcx) crcx_tx_.insert(key);
      if (cmd->verb == MgcpVerb::Ntfy) ntfy_tx_.insert(key);
      return std::nullopt;
    }
    auto& rsp = std::get<MgcpResponse>(msg);
    if (!rsp.ok()) return std::nullopt;
    std::string key =
        d.from.to_string() + "#" + std::to_string(rsp.transaction_id);
    if (plan_.drop_first_crcx_ok && crcx_tx_.count(key)) {
      plan_.drop_first_crcx_ok = false;
      return "drop-first:crcx-ok";
    }
    if (plan_.drop_first_ntfy_ack && ntfy_tx_.count(key)) {
      plan_.drop_first_ntfy_ack = false;
      return "drop-first:ntfy-ack";
    }
    return std::nullopt;
  }

private:
  FaultPlan plan_;
  std::set<std::string> crcx_tx_;
  std::set<std::string> ntfy_tx_;
};

SdpSession caller_sdp(const std::string& host) {
  SdpSession s;
  s.origin = "uac 1 1 IN IP4 " + host;
  s.connection_address = host;
  s.media.push_back({"audio", 7000, {"0"}});
  return s;
}

SdpSession callee_sdp(const std::string& host) {
  SdpSession s;
  s.origin = "uas 1 1 IN IP4 " + host;
  s.connection_address = host;
  s.media.push_back({"audio", 6000, {"0"}});
  return s;
}

/// Responder: rings and answers every call, acknowledges hangups.
class ScriptedUas : public PacketSink {
public:
  ScriptedUas(Transport& net, NetAddr addr) : net_(net), addr_(addr) {
    net_.bind(addr_, this);
  }
  ~ScriptedUas() override { net_.unbind(addr_); }

  void on_datagram(const Datagram& d) override {
    auto parsed = parse_sip(d.payload);
    if (!parsed.ok()) return;
    SipMessage msg = parsed.take();
    if (!msg.is_request()) return;
    if (msg.method == SipMethod::Invite) {
      respond(msg, d.from, 180, false);
      respond(msg, d.from, 200, true);
    } else if (msg.method == SipMethod::Bye) {
      send(SipMessage::response_to(msg, 200), d.from);
    }
  }

private:
  void respond(const SipMessage& invite, const NetAddr& peer, int status,
               bool with_sdp) {
    SipMessage rsp = SipMessage::response_to(invite, status);
    const std::string* to = rsp.header("To");
    if (to && to->find(";tag=") == std::string::npos)
      rsp.set_header("To", *to + ";tag=uas-tag");
    if (with_sdp) set_sip_body_sdp(rsp, callee_sdp(addr_.host));
    send(rsp, peer);
  }

  void send(const SipMessage& msg, const NetAddr& peer) {
    auto text = serialize_sip(msg);
    if (text.ok()) net_.send({addr_, peer, text.take()});
  }

  Transport& net_;
  NetAddr addr_;
};

struct UacOptions {
  bool dial_rounds = false;  // inject card, PIN, callee digits
  bool hang_up = false;      // send BYE call_length after answer
  Micros call_length = seconds(180);
  Micros dial_delay = millis(2200);
  Micros inter_digit = millis(120);
  Micros inter_round = millis(2200);
  Micros setup_guard = seconds(32);
  std::string card = "1234567890#";
  std::string pin = "4321#";
  std::string callee = "777#";
};

/// Caller pool: launches scripted calls toward the service and keeps one
/// CallRecord per call.
class ScriptedUac : public PacketSink {
public:
  ScriptedUac(Engine& engine, Transport& net, const AddressPlan& plan,
              UacOptions opts)
      : engine_(engine), net_(net), addr_(plan.uac), peer_(plan.as_sip),
        opts_(opts) {
    net_.bind(addr_, this);
  }
  ~ScriptedUac() override { net_.unbind(addr_); }

  std::function<void(int port, char digit)> inject;
  std::function<void()> on_call_done;

  void launch(const std::string& from_user, const std::string& to_user) {
    std::string id = "c" + std::to_string(next_call_++);
    order_.push_back(id);
    Script& s = scripts_[id];
    s.rec.call_id = id;
    s.rec.t_invite = engine_.now();

    SipMessage invite =
        SipMessage::request(SipMethod::Invite, "sip:" + to_user + "@" + peer_.host);
    invite.set_header("Via",
                      "SIP/2.0/UDP " + addr_.to_string() + ";branch=z9hG4bK-" + id);
    invite.set_header("From", "<sip:" + from_user + "@" + addr_.host + ">;tag=f-" + id);
    invite.set_header("To", "<sip:" + to_user + "@" + peer_.host + ">");
    invite.set_header("Call-ID", id);
    invite.set_header("CSeq", "1 INVITE");
    set_sip_body_sdp(invite, caller_sdp(addr_.host));
    s.invite = invite;
    s.guard = engine_.schedule_after(opts_.setup_guard, [this, id] {
      auto it = scripts_.find(id);
      if (it == scripts_.end() || it->second.done || it->second.answered) return;
      it->second.guard_tripped = true;
      it->second.rec.outcome = CallOutcome::Lost;
      it->second.rec.t_released = engine_.now();
      finish(it->second);
    });
    send(invite);
  }

  void on_datagram(const Datagram& d) override {
    auto parsed = parse_sip(d.payload);
    if (!parsed.ok()) return;
    SipMessage msg = parsed.take();
    auto it = scripts_.find(base_call_id(msg.call_id()));
    if (it == scripts_.end()) return;
    Script& s = it->second;

    if (msg.is_response()) {
      auto cseq = msg.cseq();
      if (!cseq) return;
      if (cseq->method == "INVITE") on_invite_response(s, msg);
      if (cseq->method == "BYE" && msg.status >= 200 && !s.done) {
        s.rec.t_released = engine_.now();
        finish(s);
      }
      return;
    }
    if (msg.method == SipMethod::Bye) {
      send(SipMessage::response_to(msg, 200));
      if (!s.done) {
        s.rec.t_released = engine_.now();
        finish(s);
      }
    }
  }

  std::vector<CallRecord> records() const {
    std::vector<CallRecord> out;
    for (const auto& id : order_) out.push_back(scripts_.at(id).rec);
    return out;
  }

  int launched() const { return next_call_ - 1; }
  int finished() const { return finished_; }

private:
  struct Script {
    CallRecord rec;
    SipMessage invite;
    bool answered = false;
    bool done = false;
    bool guard_tripped = false;
    bool rounds_scheduled = false;
    Engine::TimerId guard = 0;
    std::vector<Engine::TimerId> pending;
  };

  void on_invite_response(Script& s, const SipMessage& msg) {
    if (msg.status > 100 && msg.status < 200) {
      if (!s.rec.t_first_non100_provisional)
        s.rec.t_first_non100_provisional = engine_.now();
      if (msg.status == 183 && opts_.dial_rounds && !s.rounds_scheduled) {
        if (auto sdp = sip_body_sdp(msg); sdp && !sdp->media.empty())
          schedule_rounds(s, sdp->media[0].port);
      }
      return;
    }
    if (msg.status < 200) return;
    send(build_ack(s.invite, msg));
    if (msg.status < 300) {
      if (s.answered) return;
      s.answered = true;
      s.rec.t_answered = engine_.now();
      if (!s.guard_tripped) s.rec.outcome = CallOutcome::Completed;
      if (opts_.hang_up) {
        std::string id = s.rec.call_id;
        s.pending.push_back(engine_.schedule_after(opts_.call_length, [this, id] {
          auto it = scripts_.find(id);
          if (it == scripts_.end() || it->second.done) return;
          send_bye(it->second);
        }));
      }
    } else if (!s.done) {
      s.rec.t_released = engine_.now();
      finish(s);
    }
  }

  void schedule_rounds(Script& s, int port) {
    s.rounds_scheduled = true;
    Micros at = engine_.now() + opts_.dial_delay;
    for (const std::string* digits : {&opts_.card, &opts_.pin, &opts_.callee}) {
      for (std::size_t i = 0; i < digits->size(); ++i) {
        char digit = (*digits)[i];
        Micros due = at + static_cast<Micros>(i) * opts_.inter_digit;
        s.pending.push_back(engine_.schedule_at(due, [this, port, digit] {
          if (inject) inject(port, digit);
        }));
      }
      at += static_cast<Micros>(digits->size() - 1) * opts_.inter_digit +
            opts_.inter_round;
    }
  }

  void send_bye(Script& s) {
    SipMessage bye = SipMessage::request(SipMethod::Bye, s.invite.request_uri);
    bye.set_header("Via", "SIP/2.0/UDP " + addr_.to_string() +
                              ";branch=z9hG4bK-bye-" + s.rec.call_id);
    bye.set_header("From", *s.invite.header("From"));
    bye.set_header("To", *s.invite.header("To"));
    bye.set_header("Call-ID", s.rec.call_id);
    bye.set_header("CSeq", "2 BYE");
    send(bye);
  }

  void finish(Script& s) {
    if (s.done) return;
    s.done = true;
    engine_.cancel(s.guard);
    for (auto id : s.pending) engine_.cancel(id);
    s.pending.clear();
    ++finished_;
    if (on_call_done) on_call_done();
  }

  void send(const SipMessage& msg) {
    auto text = serialize_sip(msg);
    if (text.ok()) net_.send({addr_, peer_, text.take()});
  }

  Engine& engine_;
  Transport& net_;
  NetAddr addr_;
  NetAddr peer_;
  UacOptions opts_;
  std::map<std::string, Script> scripts_;
  std::vector<std::string> order_;
  int next_call_ = 1;
  int finished_ = 0;
};

}  // namespace

Result<BenchResult, BenchError> run_bench(const BenchConfig& cfg) {
  auto faults = parse_fault_spec(cfg.faults);
  if (!faults.ok())
    return make_err(BenchError::ConfigInvalid, faults.error_detail());
  FaultPlan plan = faults.take();

  if (!cfg.single_call && cfg.rate <= 0)
    return make_err(BenchError::ConfigInvalid, "load runs need a positive rate");
  if (!cfg.single_call && cfg.duration <= 0)
    return make_err(BenchError::ConfigInvalid, "duration must be positive");
  if (cfg.call_length <= 0)
    return make_err(BenchError::ConfigInvalid, "call length must be positive");
  if (cfg.media_servers < 1)
    return make_err(BenchError::ConfigInvalid, "need at least one media server");
  if (cfg.transport == TransportKind::Udp && cfg.clock == ClockMode::Virtual)
    return make_err(BenchError::ConfigInvalid,
                    "datagram sockets need the real clock");

  int total = 1;
  if (!cfg.single_call) {
    total = static_cast<int>(std::llround(cfg.rate * to_seconds(cfg.duration)));
    if (total < 1)
      return make_err(BenchError::ConfigInvalid,
                      "window shorter than one arrival");
  }

  Engine engine(cfg.clock);
  AddressPlan addrs = make_plan(cfg.transport, cfg.media_servers);

  std::unique_ptr<InprocTransport> inproc;
  std::unique_ptr<UdpTransport> udp;
  Transport* net = nullptr;
  Tracer tracer(cfg.capture_trace);
  FaultInjector injector(plan);
  auto drop = [&injector](const Datagram& d) { return injector(d); };
  if (cfg.transport == TransportKind::Inproc) {
    inproc = std::make_unique<InprocTransport>(engine);
    inproc->set_tap(&tracer);
    inproc->set_drop_filter(drop);
    net = inproc.get();
  } else {
    udp = std::make_unique<UdpTransport>(engine);
    udp->set_tap(&tracer);
    udp->set_drop_filter(drop);
    net = udp.get();
  }

  SubscriberStore store;
  if (!cfg.subscribers.empty()) {
    for (const auto& sub : cfg.subscribers) store.add(sub);
  } else if (!cfg.subscribers_path.empty()) {
    auto loaded = SubscriberStore::load(cfg.subscribers_path);
    if (!loaded.ok())
      return make_err(BenchError::ConfigInvalid,
                      "subscribers: " + loaded.error_detail());
    store = loaded.take();
  } else if (cfg.single_call) {
    store.add({"1234567890", "4321", 30, 1});
  } else {
    store.add({"9999999999", "0000", 2'000'000'000, 1});
  }

  std::vector<std::unique_ptr<MediaServer>> servers;
  for (const auto& addr : addrs.ms) {
    MediaServerConfig mc;
    mc.addr = addr;
    mc.service_delay = plan.ms_delay;
    servers.push_back(std::make_unique<MediaServer>(engine, *net, mc));
    if (plan.crcx_fail > 0)
      servers.back()->arm_fault(MgcpVerb::Crcx, 400, plan.crcx_fail);
    if (plan.mdcx_fail > 0)
      servers.back()->arm_fault(MgcpVerb::Mdcx, 400, plan.mdcx_fail);
  }

  JccProvider provider(engine, *net, {addrs.as_sip, addrs.as_mgcp, {}});
  JccFsmMonitor monitor;
  monitor.attach(provider);

  PcsConfig pcfg;
  pcfg.media_servers = addrs.ms;
  pcfg.collection = cfg.collection.value_or(cfg.single_call ? CollectionMode::Full
                                                            : CollectionMode::None);
  pcfg.callee_domain = addrs.callee_domain;
  PcsService pcs(provider, store, pcfg);

  ScriptedUas uas(*net, addrs.uas);

  UacOptions opts;
  opts.dial_rounds = pcfg.collection == CollectionMode::Full;
  opts.hang_up = !cfg.single_call;
  opts.call_length = cfg.call_length;
  ScriptedUac uac(engine, *net, addrs, opts);
  uac.inject = [&servers](int port, char digit) {
    servers.front()->inject_dtmf(port, digit);
  };

  if (cfg.transport == TransportKind::Udp && !udp->healthy())
    return make_err(BenchError::TopologyUnreachable, "socket bind failed");

  std::string from_user = cfg.single_call ? "1234567890" : "9999999999";
  std::string to_user = cfg.single_call ? "100" : "7001";
  for (int i = 0; i < total; ++i) {
    Micros at = cfg.single_call
                    ? 0
                    : static_cast<Micros>(std::llround(
                          static_cast<double>(i) * 1e6 / cfg.rate));
    engine.schedule_at(at, [&uac, from_user, to_user] {
      uac.launch(from_user, to_user);
    });
  }

  if (cfg.clock == ClockMode::Real) {
    // Real time has no natural drain point: close the run once every call has
    // finished, with a short grace for trailing acknowledgements.
    uac.on_call_done = [&engine, &uac, total] {
      if (uac.finished() == total)
        engine.schedule_after(millis(300), [&engine] { engine.stop(); });
    };
    Micros hard_stop = (total > 0 ? static_cast<Micros>(std::llround(
                                        static_cast<double>(total - 1) * 1e6 /
                                        std::max(cfg.rate, 1e-9)))
                                  : 0) +
                       cfg.call_length + seconds(70);
    if (cfg.single_call) hard_stop = cfg.call_length + seconds(70);
    engine.schedule_at(hard_stop, [&engine] { engine.stop(); });
  }

  engine.run();

  BenchResult out;
  out.records = uac.records();
  out.end_time = engine.now();
  out.fsm_violations = static_cast<int>(monitor.violations().size());
  for (const auto& v : monitor.violations())
    logf(LogLevel::Warn, "bench: fsm violation: %s", v.c_str());

  std::map<std::string, int> interactions;
  for (const auto& [id, call] : provider.calls()) {
    auto conns = call->connections();
    if (conns.empty()) continue;
    interactions[base_call_id(conns.front()->wire_token())] =
        call->interactions_setup();
  }

  double inter_sum = 0;
  double wire_sum = 0;
  for (const auto& rec : out.records) {
    if (rec.outcome != CallOutcome::Completed) continue;
    CallCounts c;
    c.call_id = rec.call_id;
    auto it = interactions.find(rec.call_id);
    c.app_interactions = it == interactions.end() ? 0 : it->second;
    c.wire_messages = tracer.wire_count(rec.call_id);
    inter_sum += c.app_interactions;
    wire_sum += c.wire_messages;
    out.counts.push_back(std::move(c));
  }
  double denom = out.counts.empty() ? 1.0 : static_cast<double>(out.counts.size());
  out.report = build_report(out.records, cfg.single_call ? 0.0 : cfg.rate,
                            inter_sum / denom, wire_sum / denom);

  for (const auto& ms : servers) {
    out.ms_peak_connections += ms->peak_connections();
    out.ms_end_connections += ms->connection_count();
  }

  if (cfg.capture_trace) {
    out.trace = tracer.text();
    for (const auto& rec : out.records) {
      out.trace += "# call " + rec.call_id + " outcome=" +
                   to_string(rec.outcome) + " interactions=";
      auto it = interactions.find(rec.call_id);
      out.trace += std::to_string(it == interactions.end() ? 0 : it->second);
      out.trace += " wire=" + std::to_string(tracer.wire_count(rec.call_id));
      auto srd = compute_srd(rec);
      out.trace += " srd_us=" + (srd ? std::to_string(*srd) : std::string("-"));
      out.trace += "\n";
    }
  }

  out.exit_code = out.report.loss_fraction >= 0.01 ? 2 : 0;
  return out;
}

}  // namespace jcall
