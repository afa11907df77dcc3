#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "jcall/jcc/monitor.hpp"
#include "jcall/jcc/provider.hpp"
#include "jcall/net/engine.hpp"
#include "jcall/net/transport.hpp"
#include "jcall/sip/transaction.hpp"

using namespace jcall;

namespace {

SdpSession uac_sdp() {
  SdpSession s;
  s.origin = "uac 1 1 IN IP4 uac";
  s.connection_address = "uac";
  s.media.push_back({"audio", 7000, {"0"}});
  return s;
}

SdpSession uas_sdp() {
  SdpSession s;
  s.origin = "uas 1 1 IN IP4 uas";
  s.connection_address = "uas";
  s.media.push_back({"audio", 6000, {"0"}});
  return s;
}

struct FakeMs : PacketSink {
  InprocTransport& net;
  NetAddr addr{"ms1", 2427};
  std::vector<MgcpCommand> commands;
  std::vector<MgcpResponse> acks;
  int next_conn = 1;
  int crcx_fail_code = 0;  // nonzero fails the next CRCX once
  int mdcx_fail_code = 0;  // nonzero fails the next MDCX once
  bool silent = false;
  std::uint32_t next_ntfy_txid = 5000;

  explicit FakeMs(InprocTransport& n) : net(n) { net.bind(addr, this); }
  ~FakeMs() override { net.unbind(addr); }

  void on_datagram(const Datagram& d) override {
    auto parsed = parse_mgcp(d.payload);
    REQUIRE(parsed.ok());
    if (std::holds_alternative<MgcpResponse>(parsed.value())) {
      acks.push_back(std::get<MgcpResponse>(parsed.take()));
      return;
    }
    MgcpCommand cmd = std::get<MgcpCommand>(parsed.take());
    commands.push_back(cmd);
    if (silent) return;

    MgcpResponse rsp;
    rsp.transaction_id = cmd.transaction_id;
    switch (cmd.verb) {
      case MgcpVerb::Crcx: {
        if (crcx_fail_code != 0) {
          rsp.code = crcx_fail_code;
          crcx_fail_code = 0;
          break;
        }
        rsp.code = 200;
        rsp.set_param("I", "ms-conn-" + std::to_string(next_conn));
        rsp.set_param("Z", "ivr/" + std::to_string(next_conn) + "@ms1");
        SdpSession sdp;
        sdp.origin = "ms 0 0 IN IP4 ms1";
        sdp.connection_address = "ms1";
        sdp.media.push_back({"audio", 4000 + 2 * (next_conn - 1), {"0"}});
        rsp.sdp = sdp;
        ++next_conn;
        break;
      }
      case MgcpVerb::Mdcx:
        if (mdcx_fail_code != 0) {
          rsp.code = mdcx_fail_code;
          mdcx_fail_code = 0;
        } else {
          rsp.code = 200;
        }
        break;
      case MgcpVerb::Dlcx:
        rsp.code = 250;
        break;
      default:
        rsp.code = 200;
        break;
    }
    auto text = serialize_mgcp(rsp);
    REQUIRE(text.ok());
    net.send({addr, d.from, text.take()});
  }

  std::uint32_t send_ntfy(const std::string& x, const std::string& observed,
                          std::optional<std::uint32_t> txid = {}) {
    MgcpCommand ntfy;
    ntfy.verb = MgcpVerb::Ntfy;
    ntfy.transaction_id = txid.value_or(next_ntfy_txid++);
    ntfy.endpoint_id = "ivr/1@ms1";
    ntfy.set_param("X", x);
    ntfy.set_param("O", observed);
    auto text = serialize_mgcp(ntfy);
    REQUIRE(text.ok());
    net.send({addr, {"as", 2727}, text.take()});
    return ntfy.transaction_id;
  }

  std::size_t count(MgcpVerb v) const {
    std::size_t n = 0;
    for (const auto& c : commands)
      if (c.verb == v) ++n;
    return n;
  }

  const MgcpCommand* last(MgcpVerb v) const {
    for (auto it = commands.rbegin(); it != commands.rend(); ++it)
      if (it->verb == v) return &*it;
    return nullptr;
  }
};

struct FakeUac : PacketSink {
  InprocTransport& net;
  NetAddr addr{"uac", 5060};
  std::vector<SipMessage> rx;
  bool auto_ack = true;
  std::string call_id = "c1";
  SipMessage invite;

  explicit FakeUac(InprocTransport& n) : net(n) { net.bind(addr, this); }
  ~FakeUac() override { net.unbind(addr); }

  void on_datagram(const Datagram& d) override {
    auto parsed = parse_sip(d.payload);
    REQUIRE(parsed.ok());
    SipMessage msg = parsed.take();
    rx.push_back(msg);
    if (msg.is_response() && msg.status >= 200 && auto_ack) {
      auto cseq = msg.cseq();
      if (cseq && cseq->method == "INVITE") send(build_ack(invite, msg));
    }
    if (msg.is_request() && msg.method == SipMethod::Bye) {
      send(SipMessage::response_to(msg, 200));
    }
  }

  void send(const SipMessage& msg) {
    auto text = serialize_sip(msg);
    REQUIRE(text.ok());
    net.send({addr, {"as", 5060}, text.take()});
  }

  void send_invite(bool with_sdp = true) {
    invite = SipMessage::request(SipMethod::Invite, "sip:9876@as");
    invite.set_header("Via", "SIP/2.0/UDP uac:5060;branch=z9hG4bK-" + call_id);
    invite.set_header("From", "<sip:1234567890@uac>;tag=uac-" + call_id);
    invite.set_header("To", "<sip:9876@as>");
    invite.set_header("Call-ID", call_id);
    invite.set_header("CSeq", "1 INVITE");
    if (with_sdp) set_sip_body_sdp(invite, uac_sdp());
    send(invite);
  }

  void send_bye(std::uint32_t cseq = 2) {
    SipMessage bye = SipMessage::request(SipMethod::Bye, "sip:9876@as");
    bye.set_header("Via", "SIP/2.0/UDP uac:5060;branch=z9hG4bK-bye-" +
                              std::to_string(cseq));
    bye.set_header("From", "<sip:1234567890@uac>;tag=uac-" + call_id);
    bye.set_header("To", "<sip:9876@as>");
    bye.set_header("Call-ID", call_id);
    bye.set_header("CSeq", std::to_string(cseq) + " BYE");
    send(bye);
  }

  int count_status(int status, const std::string& method = "INVITE") const {
    int n = 0;
    for (const auto& m : rx) {
      if (!m.is_response() || m.status != status) continue;
      auto cseq = m.cseq();
      if (cseq && cseq->method == method) ++n;
    }
    return n;
  }

  const SipMessage* last_status(int status) const {
    for (auto it = rx.rbegin(); it != rx.rend(); ++it)
      if (it->is_response() && it->status == status) return &*it;
    return nullptr;
  }
};

struct FakeUas : PacketSink {
  InprocTransport& net;
  NetAddr addr{"uas", 5060};
  std::vector<SipMessage> rx;
  int reject_status = 0;  // nonzero answers INVITEs with this final
  bool ringing = true;
  SipMessage last_invite;

  explicit FakeUas(InprocTransport& n) : net(n) { net.bind(addr, this); }
  ~FakeUas() override { net.unbind(addr); }

  void on_datagram(const Datagram& d) override {
    auto parsed = parse_sip(d.payload);
    REQUIRE(parsed.ok());
    SipMessage msg = parsed.take();
    rx.push_back(msg);
    if (!msg.is_request()) return;
    if (msg.method == SipMethod::Invite) {
      last_invite = msg;
      if (reject_status != 0) {
        respond(reject_status, false);
        return;
      }
      if (ringing) respond(180, false);
      respond(200, true);
    } else if (msg.method == SipMethod::Bye) {
      auto text = serialize_sip(SipMessage::response_to(msg, 200));
      REQUIRE(text.ok());
      net.send({addr, d.from, text.take()});
    }
  }

  void respond(int status, bool with_sdp) {
    SipMessage rsp = SipMessage::response_to(last_invite, status);
    if (status > 100) {
      const std::string* to = rsp.header("To");
      if (to && to->find(";tag=") == std::string::npos)
        rsp.set_header("To", *to + ";tag=uas-tag");
    }
    if (with_sdp) set_sip_body_sdp(rsp, uas_sdp());
    auto text = serialize_sip(rsp);
    REQUIRE(text.ok());
    net.send({addr, {"as", 5060}, text.take()});
  }

  const SipMessage* last_request(SipMethod m) const {
    for (auto it = rx.rbegin(); it != rx.rend(); ++it)
      if (it->is_request() && it->method == m) return &*it;
    return nullptr;
  }
};

struct World {
  Engine engine{ClockMode::Virtual};
  InprocTransport net{engine};
  JccProvider provider;
  JccFsmMonitor monitor;
  FakeMs ms{net};
  FakeUac uac{net};
  FakeUas uas{net};
  std::vector<JccEvent> app_events;
  JccCall* offered_call = nullptr;
  JccConnection* offered_conn = nullptr;

  World() : provider(engine, net, config()) {
    monitor.attach(provider);
    provider.add_listener(
        JccProvider::app_event_filter(),
        [this](const JccEvent& ev) { app_events.push_back(ev); },
        /*counted=*/true);
    provider.set_call_offered([this](JccCall& call, JccConnection& conn) {
      offered_call = &call;
      offered_conn = &conn;
    });
  }

  static JccProviderConfig config() {
    JccProviderConfig c;
    c.sip_addr = {"as", 5060};
    c.mgcp_addr = {"as", 2727};
    return c;
  }

  void run() { engine.run(); }

  int events(JccEventKind kind, const std::string& conn_id = {}) const {
    int n = 0;
    for (const auto& ev : app_events)
      if (ev.kind == kind && (conn_id.empty() || ev.connection_id == conn_id))
        ++n;
    return n;
  }

  const JccEvent* last_midcall() const {
    for (auto it = app_events.rbegin(); it != app_events.rend(); ++it)
      if (it->kind == JccEventKind::MidCall) return &*it;
    return nullptr;
  }
};

JccConnection* make_media_conn(World& w) {
  auto created = w.offered_call->create_connection("mgcp:ms1:2427",
                                                   "sip:1234567890@uac");
  REQUIRE(created.ok());
  return created.value();
}

std::string routed_media_conn(World& w, JccConnection* m) {
  REQUIRE(m->select_route("endpointType=IVR").ok());
  REQUIRE(m->route_connection(false).ok());
  w.run();
  REQUIRE(m->jcc_state() == JccConnState::Connected);
  return m->id();
}

struct CallRefs {
  JccCall* call;
  JccConnection* caller;
  JccConnection* media;
  JccConnection* callee;
};

CallRefs bridge_call(World& w) {
  w.uac.send_invite();
  w.run();
  REQUIRE(w.offered_call != nullptr);
  JccCall* call = w.offered_call;
  JccConnection* caller = w.offered_conn;
  JccConnection* m = make_media_conn(w);
  routed_media_conn(w, m);
  REQUIRE(m->select_route("signal=ann(welcome)").ok());
  REQUIRE(m->attach_media().ok());
  w.run();
  const MgcpCommand* rqnt = w.ms.last(MgcpVerb::Rqnt);
  REQUIRE(rqnt != nullptr);
  w.ms.send_ntfy(*rqnt->param("X"), "A/oc");
  w.run();
  REQUIRE(m->release().ok());
  w.run();
  REQUIRE(call->route_call("sip:777@uas", *caller).ok());
  w.run();
  JccConnection* callee = call->connections().back();
  return {call, caller, m, callee};
}

}  // namespace

TEST_CASE("incoming invite materializes a call with an answering connection") {
  World w;
  w.uac.send_invite();
  w.run();

  REQUIRE(w.offered_call != nullptr);
  REQUIRE(w.offered_conn != nullptr);
  CHECK(w.offered_conn->flavor() == ConnFlavor::Sip);
  CHECK(w.offered_conn->jcc_state() == JccConnState::CallDelivery);
  CHECK(w.offered_conn->address().literal == "sip:1234567890@uac");
  CHECK(w.offered_conn->invited_uri() == "sip:9876@as");
  REQUIRE(w.offered_conn->peer_sdp().has_value());
  CHECK(w.offered_conn->peer_sdp()->media[0].port == 7000);
  CHECK(w.offered_call->state() == JccCall::State::Active);

  REQUIRE(!w.uac.rx.empty());
  CHECK(w.uac.rx.front().status == 100);

  CHECK(w.monitor.clean());
  CHECK(w.monitor.events_seen() == 2);
  CHECK(w.offered_call->interactions() == 0);
}

TEST_CASE("create_connection validates target and peer") {
  World w;
  w.uac.send_invite();
  w.run();
  JccCall* call = w.offered_call;

  auto bad_scheme = call->create_connection("tel:123", "sip:1234567890@uac");
  REQUIRE(!bad_scheme.ok());
  CHECK(bad_scheme.error() == JccError::InvalidTargetScheme);

  auto no_peer = call->create_connection("mgcp:ms1:2427", "sip:nobody@x");
  REQUIRE(!no_peer.ok());
  CHECK(no_peer.error() == JccError::NoSuchPeerConnection);

  auto good = call->create_connection("mgcp:ms1:2427", "sip:1234567890@uac");
  REQUIRE(good.ok());
  CHECK(good.value()->flavor() == ConnFlavor::Mgcp);
  CHECK(good.value()->jcc_state() == JccConnState::Idle);
}

TEST_CASE("create_connection needs the caller's offer") {
  World w;
  w.uac.send_invite(/*with_sdp=*/false);
  w.run();
  auto r = w.offered_call->create_connection("mgcp:ms1:2427",
                                             "sip:1234567890@uac");
  REQUIRE(!r.ok());
  CHECK(r.error() == JccError::PeerSdpMissing);
}

TEST_CASE("routing a media connection sends one wildcard create") {
  World w;
  w.uac.send_invite();
  w.run();
  JccCall* call = w.offered_call;
  JccConnection* m = make_media_conn(w);
  REQUIRE(m->select_route("endpointType=IVR").ok());
  REQUIRE(m->route_connection(false).ok());
  w.run();

  REQUIRE(w.ms.count(MgcpVerb::Crcx) == 1);
  const MgcpCommand& crcx = *w.ms.last(MgcpVerb::Crcx);
  CHECK(crcx.endpoint_id == "ivr/$@ms1");
  REQUIRE(crcx.param("C") != nullptr);
  CHECK(*crcx.param("C") == "c1");
  REQUIRE(crcx.param("M") != nullptr);
  CHECK(*crcx.param("M") == "sendrecv");
  REQUIRE(crcx.sdp.has_value());
  CHECK(crcx.sdp->media[0].port == 7000);

  CHECK(m->jcc_state() == JccConnState::Connected);
  CHECK(m->handler_state().phase == HandlerPhase::Connected);
  REQUIRE(m->handler_state().ms_endpoint.has_value());
  CHECK(*m->handler_state().ms_endpoint == "ivr/1@ms1");
  REQUIRE(m->handler_state().mgcp_connection_id.has_value());
  CHECK(*m->handler_state().mgcp_connection_id == "ms-conn-1");

  const SipMessage* early = w.uac.last_status(183);
  REQUIRE(early != nullptr);
  auto early_sdp = sip_body_sdp(*early);
  REQUIRE(early_sdp.has_value());
  CHECK(early_sdp->media[0].port == 4000);

  CHECK(w.events(JccEventKind::Connected, m->id()) == 1);
  CHECK(call->interactions() == 4);
  CHECK(!call->setup_complete());
  CHECK(w.monitor.clean());
}

TEST_CASE("route_connection rejects bad arguments and bad timing") {
  World w;
  w.uac.send_invite();
  w.run();
  JccConnection* m = make_media_conn(w);

  CHECK(m->route_connection(true).error() == JccError::IllegalArgument);
  CHECK(m->select_route("bogus=1").error() == JccError::UnknownParameter);
  CHECK(m->select_route("noequals").error() == JccError::MalformedParam);
  // endpointAddress was seeded from the target, endpointType is still missing.
  CHECK(m->route_connection(false).error() == JccError::IllegalState);

  REQUIRE(m->select_route("endpointType=IVR").ok());
  REQUIRE(m->route_connection(false).ok());
  CHECK(m->route_connection(false).error() == JccError::IllegalState);
  w.run();
  CHECK(m->route_connection(false).error() == JccError::IllegalState);

  CHECK(w.offered_conn->select_route("mode=sendrecv").error() ==
        JccError::IllegalState);
}

TEST_CASE("attach_media compiles staged request values into one RQNT") {
  World w;
  w.uac.send_invite();
  w.run();
  JccConnection* m = make_media_conn(w);
  routed_media_conn(w, m);

  CHECK(m->attach_media().error() == JccError::EmptyLedger);

  REQUIRE(m->select_route("signal=ann(welcome)").ok());
  REQUIRE(m->select_route("requestedEvents=dtmf").ok());
  REQUIRE(m->select_route("digitMap=(x.#)").ok());
  REQUIRE(m->attach_media().ok());
  w.run();

  REQUIRE(w.ms.count(MgcpVerb::Rqnt) == 1);
  const MgcpCommand& rqnt = *w.ms.last(MgcpVerb::Rqnt);
  CHECK(rqnt.endpoint_id == "ivr/1@ms1");
  REQUIRE(rqnt.params.size() == 4);
  CHECK(rqnt.params[0].code == "X");
  CHECK(rqnt.params[1] == MgcpParam{"S", "A/ann(welcome)"});
  CHECK(rqnt.params[2] == MgcpParam{"R", "D/dtmf"});
  CHECK(rqnt.params[3] == MgcpParam{"D", "(x.#)"});

  REQUIRE(m->select_route("signal=ann(other)").ok());
  CHECK(m->attach_media().error() == JccError::HandlerBusy);

  std::string x = rqnt.params[0].value;
  std::uint32_t txid = w.ms.send_ntfy(x, "D/1234#");
  w.run();

  const JccEvent* mid = w.last_midcall();
  REQUIRE(mid != nullptr);
  CHECK(mid->cause == kCauseRequestResult);
  CHECK(mid->payload.at("success") == "true");
  CHECK(mid->payload.at("digits") == "1234#");
  int midcalls = w.events(JccEventKind::MidCall);

  // A replayed notify draws the cached ack and is not delivered again.
  w.ms.send_ntfy(x, "D/1234#", txid);
  w.run();
  CHECK(w.events(JccEventKind::MidCall) == midcalls);
  int acks_for_txid = 0;
  for (const auto& a : w.ms.acks)
    if (a.transaction_id == txid && a.code == 200) ++acks_for_txid;
  CHECK(acks_for_txid == 2);
  CHECK(w.monitor.clean());
}

TEST_CASE("failed digit collection surfaces as an unsuccessful result") {
  World w;
  w.uac.send_invite();
  w.run();
  JccConnection* m = make_media_conn(w);
  routed_media_conn(w, m);
  REQUIRE(m->select_route("digitMap=(xxxx#)").ok());
  REQUIRE(m->attach_media().ok());
  w.run();
  const MgcpCommand& rqnt = *w.ms.last(MgcpVerb::Rqnt);
  w.ms.send_ntfy(*rqnt.param("X"), "D/fail(timeout)");
  w.run();

  const JccEvent* mid = w.last_midcall();
  REQUIRE(mid != nullptr);
  CHECK(mid->payload.at("success") == "false");
  CHECK(mid->payload.at("reason") == "timeout");
}

TEST_CASE("modify flush travels as a single MDCX") {
  World w;
  w.uac.send_invite();
  w.run();
  JccConnection* m = make_media_conn(w);
  routed_media_conn(w, m);

  REQUIRE(m->select_route("mode=recvonly").ok());
  REQUIRE(m->attach_media().ok());
  w.run();

  REQUIRE(w.ms.count(MgcpVerb::Mdcx) == 1);
  const MgcpCommand& mdcx = *w.ms.last(MgcpVerb::Mdcx);
  CHECK(mdcx.endpoint_id == "ivr/1@ms1");
  CHECK(*mdcx.param("C") == "c1");
  CHECK(*mdcx.param("I") == "ms-conn-1");
  CHECK(*mdcx.param("M") == "recvonly");

  const JccEvent* mid = w.last_midcall();
  REQUIRE(mid != nullptr);
  CHECK(mid->cause == kCauseConnectionChanged);
  CHECK(w.events(JccEventKind::Connected, m->id()) == 1);
  CHECK(w.monitor.clean());
}

TEST_CASE("mandatory change rebuilds the leg and then runs the queued request") {
  World w;
  w.uac.send_invite();
  w.run();
  JccConnection* m = make_media_conn(w);
  routed_media_conn(w, m);

  REQUIRE(m->select_route("endpointAddress=ms1:2427").ok());
  REQUIRE(m->select_route("signal=ann(again)").ok());
  REQUIRE(m->attach_media().ok());
  w.run();

  std::size_t n = w.ms.commands.size();
  REQUIRE(n >= 3);
  CHECK(w.ms.commands[n - 3].verb == MgcpVerb::Dlcx);
  CHECK(w.ms.commands[n - 2].verb == MgcpVerb::Crcx);
  CHECK(w.ms.commands[n - 1].verb == MgcpVerb::Rqnt);
  CHECK(*w.ms.commands[n - 3].param("I") == "ms-conn-1");
  CHECK(w.ms.commands[n - 2].endpoint_id == "ivr/$@ms1");
  CHECK(w.ms.commands[n - 1].endpoint_id == "ivr/2@ms1");

  CHECK(m->handler_state().phase == HandlerPhase::Connected);
  CHECK(*m->handler_state().mgcp_connection_id == "ms-conn-2");
  CHECK(*m->handler_state().ms_endpoint == "ivr/2@ms1");
  // The rebuild is invisible at the state level: still just one CONNECTED.
  CHECK(w.events(JccEventKind::Connected, m->id()) == 1);
  const JccEvent* mid = w.last_midcall();
  REQUIRE(mid != nullptr);
  CHECK(mid->cause == kCauseConnectionChanged);
  CHECK(w.monitor.clean());
}

TEST_CASE("modify failure parks the connection for a fresh route") {
  World w;
  w.uac.send_invite();
  w.run();
  JccConnection* m = make_media_conn(w);
  routed_media_conn(w, m);

  w.ms.mdcx_fail_code = 502;
  REQUIRE(m->select_route("mode=sendonly").ok());
  REQUIRE(m->attach_media().ok());
  w.run();

  CHECK(m->handler_state().phase == HandlerPhase::Error);
  CHECK(m->jcc_state() == JccConnState::Connected);
  const JccEvent* mid = w.last_midcall();
  REQUIRE(mid != nullptr);
  CHECK(mid->cause == kCauseChangeFailed);
  // The dead leg was cleaned up on the way into the error phase.
  std::size_t n = w.ms.commands.size();
  REQUIRE(n >= 2);
  CHECK(w.ms.commands[n - 2].verb == MgcpVerb::Mdcx);
  CHECK(w.ms.commands[n - 1].verb == MgcpVerb::Dlcx);

  REQUIRE(m->route_connection(false).ok());
  w.run();
  CHECK(m->handler_state().phase == HandlerPhase::Connected);
  CHECK(*m->handler_state().mgcp_connection_id == "ms-conn-2");
  CHECK(w.events(JccEventKind::Connected, m->id()) == 1);
  CHECK(w.monitor.clean());
}

TEST_CASE("create failure and media-server silence both fail the connection") {
  World w;
  w.uac.send_invite();
  w.run();
  JccConnection* m = make_media_conn(w);
  w.ms.crcx_fail_code = 500;
  REQUIRE(m->select_route("endpointType=IVR").ok());
  REQUIRE(m->route_connection(false).ok());
  w.run();
  CHECK(m->jcc_state() == JccConnState::Failed);
  CHECK(m->cause() == "crcx-500");
  CHECK(w.events(JccEventKind::Failed, m->id()) == 1);
  CHECK(m->route_connection(false).error() == JccError::TerminalConnection);

  World w2;
  w2.uac.send_invite();
  w2.run();
  JccConnection* m2 = make_media_conn(w2);
  w2.ms.silent = true;
  REQUIRE(m2->select_route("endpointType=IVR").ok());
  REQUIRE(m2->route_connection(false).ok());
  auto before = w2.engine.now();
  w2.run();
  CHECK(m2->jcc_state() == JccConnState::Failed);
  CHECK(m2->cause() == "media-server-timeout");
  // The retransmit ladder ran to exhaustion on the virtual clock.
  CHECK(w2.engine.now() - before >= millis(3000));
  CHECK(w2.ms.count(MgcpVerb::Crcx) == 5);
  CHECK(w2.monitor.clean());
}

TEST_CASE("releasing a media connection deletes the leg exactly once") {
  World w;
  w.uac.send_invite();
  w.run();
  JccConnection* m = make_media_conn(w);
  routed_media_conn(w, m);

  REQUIRE(m->release().ok());
  w.run();
  CHECK(m->jcc_state() == JccConnState::Disconnected);
  CHECK(m->handler_state().phase == HandlerPhase::Disconnected);
  CHECK(!m->handler_state().mgcp_connection_id.has_value());
  REQUIRE(w.ms.count(MgcpVerb::Dlcx) == 1);
  CHECK(*w.ms.last(MgcpVerb::Dlcx)->param("I") == "ms-conn-1");
  CHECK(w.events(JccEventKind::Disconnected, m->id()) == 1);

  CHECK(m->release().error() == JccError::TerminalConnection);
  CHECK(m->select_route("mode=x").error() == JccError::TerminalConnection);
  CHECK(m->attach_media().error() == JccError::TerminalConnection);
  CHECK(w.monitor.clean());
}

TEST_CASE("route_call bridges the caller to the dialed party") {
  World w;
  CallRefs refs = bridge_call(w);

  const SipMessage* invite = w.uas.last_request(SipMethod::Invite);
  REQUIRE(invite != nullptr);
  CHECK(invite->call_id() == "c1-b");
  const std::string* from = invite->header("From");
  REQUIRE(from != nullptr);
  CHECK(from->find("sip:1234567890@uac") != std::string::npos);
  auto offer = sip_body_sdp(*invite);
  REQUIRE(offer.has_value());
  CHECK(offer->media[0].port == 7000);

  const SipMessage* final_rsp = w.uac.last_status(200);
  REQUIRE(final_rsp != nullptr);
  auto answer = sip_body_sdp(*final_rsp);
  REQUIRE(answer.has_value());
  CHECK(answer->media[0].port == 6000);

  CHECK(refs.caller->jcc_state() == JccConnState::Connected);
  CHECK(refs.callee->jcc_state() == JccConnState::Connected);
  CHECK(refs.callee->address().literal == "sip:777@uas");
  CHECK(w.events(JccEventKind::Alerting) == 0);  // not an application event
  CHECK(refs.call->setup_complete());
  CHECK(refs.call->interactions_setup() == 12);
  CHECK(w.monitor.clean());
}

TEST_CASE("a rejected outgoing leg fails with the response status as cause") {
  World w;
  w.uas.reject_status = 486;
  w.uac.send_invite();
  w.run();
  JccCall* call = w.offered_call;
  REQUIRE(call->route_call("sip:777@uas", *w.offered_conn).ok());
  w.run();

  JccConnection* callee = call->connections().back();
  CHECK(callee->jcc_state() == JccConnState::Failed);
  CHECK(callee->cause() == "486");
  CHECK(w.events(JccEventKind::Failed, callee->id()) == 1);
  CHECK(w.offered_conn->jcc_state() == JccConnState::CallDelivery);
  CHECK(!call->setup_complete());
  CHECK(w.monitor.clean());
}

TEST_CASE("releasing an established leg sends BYE and settles on completion") {
  World w;
  CallRefs refs = bridge_call(w);

  REQUIRE(refs.caller->release().ok());
  w.run();
  CHECK(refs.caller->jcc_state() == JccConnState::Disconnected);
  CHECK(w.uac.count_status(200, "BYE") == 0);  // the 200 went the other way
  bool saw_bye = false;
  for (const auto& msg : w.uac.rx)
    if (msg.is_request() && msg.method == SipMethod::Bye) saw_bye = true;
  CHECK(saw_bye);

  REQUIRE(refs.callee->release().ok());
  w.run();
  CHECK(refs.callee->jcc_state() == JccConnState::Disconnected);
  CHECK(w.uas.last_request(SipMethod::Bye) != nullptr);
  CHECK(refs.call->state() == JccCall::State::Invalid);
  CHECK(w.monitor.clean());
}

TEST_CASE("a caller hangup lands as DISCONNECTED and replays are absorbed") {
  World w;
  CallRefs refs = bridge_call(w);

  w.uac.send_bye();
  w.run();
  CHECK(refs.caller->jcc_state() == JccConnState::Disconnected);
  CHECK(refs.caller->cause() == "peer-bye");
  CHECK(w.events(JccEventKind::Disconnected, refs.caller->id()) == 1);
  CHECK(w.uac.count_status(200, "BYE") == 1);

  w.uac.send_bye();  // same CSeq again: replay, no new event
  w.run();
  CHECK(w.uac.count_status(200, "BYE") == 2);
  CHECK(w.events(JccEventKind::Disconnected, refs.caller->id()) == 1);
  CHECK(w.monitor.clean());
}

TEST_CASE("releasing an unanswered incoming leg maps the cause to a status") {
  World w;
  w.uac.send_invite();
  w.run();
  REQUIRE(w.offered_conn->release(ReleaseCause::Forbidden).ok());
  w.run();
  CHECK(w.uac.count_status(403) == 1);
  CHECK(w.offered_conn->jcc_state() == JccConnState::Failed);
  CHECK(w.offered_conn->cause() == "403");
  CHECK(w.monitor.clean());

  World w2;
  w2.uac.send_invite();
  w2.run();
  REQUIRE(w2.offered_conn->release(ReleaseCause::PaymentRequired).ok());
  w2.run();
  CHECK(w2.uac.count_status(402) == 1);
}

TEST_CASE("requests outside any dialog get the standard answers") {
  World w;
  w.uac.send_bye();
  w.run();
  CHECK(w.uac.count_status(481, "BYE") == 1);

  SipMessage opts = SipMessage::request(SipMethod::Other, "sip:as");
  opts.method_text = "OPTIONS";
  opts.set_header("Via", "SIP/2.0/UDP uac:5060;branch=z9hG4bK-opt");
  opts.set_header("From", "<sip:1234567890@uac>;tag=opt");
  opts.set_header("To", "<sip:as>");
  opts.set_header("Call-ID", "opt-1");
  opts.set_header("CSeq", "1 OPTIONS");
  w.uac.send(opts);
  w.run();
  CHECK(w.uac.count_status(501, "OPTIONS") == 1);
}

TEST_CASE("a shut down provider turns new work away") {
  World w;
  w.provider.shutdown();
  auto r = w.provider.create_call();
  REQUIRE(!r.ok());
  CHECK(r.error() == JccError::ProviderShutDown);

  w.uac.send_invite();
  w.run();
  CHECK(w.uac.count_status(503) == 1);
  CHECK(w.offered_call == nullptr);
}
