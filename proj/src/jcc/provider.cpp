#include "jcall/jcc/provider.hpp"

#include <utility>

#include "jcall/util/log.hpp"

namespace jcall {

const char* to_string(JccError e) {
  switch (e) {
    case JccError::ProviderShutDown:
      return "ProviderShutDown";
    case JccError::NoSuchPeerConnection:
      return "NoSuchPeerConnection";
    case JccError::PeerSdpMissing:
      return "PeerSdpMissing";
    case JccError::InvalidTargetScheme:
      return "InvalidTargetScheme";
    case JccError::IllegalState:
      return "IllegalState";
    case JccError::IllegalArgument:
      return "IllegalArgument";
    case JccError::HandlerBusy:
      return "HandlerBusy";
    case JccError::UnknownParameter:
      return "UnknownParameter";
    case JccError::MalformedParam:
      return "MalformedParam";
    case JccError::TerminalConnection:
      return "TerminalConnection";
    case JccError::EmptyLedger:
      return "EmptyLedger";
  }
  return "?";
}

int release_status(ReleaseCause cause) {
  switch (cause) {
    case ReleaseCause::Normal:
      return 603;
    case ReleaseCause::Forbidden:
      return 403;
    case ReleaseCause::PaymentRequired:
      return 402;
    case ReleaseCause::ServiceUnavailable:
      return 503;
  }
  return 603;
}

std::string sip_uri_user(const std::string& uri) {
  std::string u = uri;
  if (u.rfind("sip:", 0) == 0) u.erase(0, 4);
  auto at = u.find('@');
  if (at == std::string::npos) return "";
  return u.substr(0, at);
}

std::string sip_uri_host_port(const std::string& uri) {
  std::string u = uri;
  if (u.rfind("sip:", 0) == 0) u.erase(0, 4);
  auto at = u.find('@');
  if (at != std::string::npos) u.erase(0, at + 1);
  auto semi = u.find(';');
  if (semi != std::string::npos) u.erase(semi);
  return u;
}

namespace {

std::string endpoint_wildcard_prefix(const std::string& endpoint_type) {
  if (endpoint_type == "IVR") return "ivr";
  if (endpoint_type == "Announcement") return "ann";
  if (endpoint_type == "PacketRelayAnnouncement") return "pra";
  if (endpoint_type == "PacketRelayIvr") return "pri";
  return endpoint_type;
}

std::string prefixed_event_value(const char* package, const std::string& value) {
  if (value.find('/') != std::string::npos) return value;
  return std::string(package) + value;
}

// Routing parameter values are single-line; an SDP travels as its lines
// joined with ';'.
std::optional<SdpSession> decode_sdp_value(const std::string& value) {
  std::string text;
  std::size_t start = 0;
  for (;;) {
    auto semi = value.find(';', start);
    auto end = semi == std::string::npos ? value.size() : semi;
    text.append(value, start, end - start);
    text += "\r\n";
    if (semi == std::string::npos) break;
    start = semi + 1;
  }
  auto parsed = parse_sdp(text);
  if (!parsed.ok()) return std::nullopt;
  return parsed.take();
}

}  // namespace

JccConnection::JccConnection(JccProvider& provider, JccCall& call,
                             std::string id, ConnFlavor flavor,
                             JccAddress address)
    : provider_(&provider),
      call_(&call),
      id_(std::move(id)),
      flavor_(flavor),
      address_(std::move(address)) {
  handler_.call_id = call_->id();
}

void JccConnection::set_state_fire(JccConnState next, std::string cause) {
  if (jcc_state_terminal(state_)) return;
  if (state_ == next) return;
  if (!jcc_transition_allowed(state_, next)) {
    logf(LogLevel::Error, "conn %s: unreachable transition %s -> %s",
         id_.c_str(), to_string(state_), to_string(next));
  }
  state_ = next;
  if (!cause.empty()) cause_ = cause;
  call_->refresh_state();
  provider_->fire_event(*this, event_for_state(next), std::move(cause), {});
}

void JccConnection::fire_midcall(const std::string& cause,
                                 std::map<std::string, std::string> payload) {
  provider_->fire_event(*this, JccEventKind::MidCall, cause,
                        std::move(payload));
}

void JccConnection::step_handler(const HandlerEvent& event) {
  auto pre_id = handler_.mgcp_connection_id;
  auto step = handler_step(handler_, event);
  if (step.illegal) {
    logf(LogLevel::Warn, "conn %s: handler dropped %s in %s", id_.c_str(),
         handler_event_name(event), to_string(handler_.phase));
    return;
  }
  handler_ = std::move(step.state);
  apply_actions(step.actions, pre_id);
}

void JccConnection::apply_actions(
    const std::vector<HandlerAction>& actions,
    const std::optional<std::string>& pre_connection_id) {
  for (const auto& action : actions) {
    if (std::holds_alternative<HandlerEmitCrcx>(action)) {
      send_crcx();
    } else if (std::holds_alternative<HandlerEmitMdcx>(action)) {
      send_mdcx();
    } else if (const auto* dlcx = std::get_if<HandlerEmitDlcx>(&action)) {
      send_dlcx(handler_.mgcp_connection_id ? handler_.mgcp_connection_id
                                            : pre_connection_id,
                dlcx->cleanup);
    } else if (std::holds_alternative<HandlerEmitRqnt>(action)) {
      send_rqnt();
    } else if (const auto* set = std::get_if<HandlerSetJccState>(&action)) {
      std::string cause;
      if (set->state == JccConnState::Failed)
        cause = cause_.empty() ? "media-setup-failed" : cause_;
      else if (set->state == JccConnState::Disconnected)
        cause = "released";
      set_state_fire(set->state, std::move(cause));
    } else if (const auto* mid = std::get_if<HandlerFireMidCall>(&action)) {
      if (state_ == JccConnState::Connected) fire_midcall(mid->cause, {});
    } else if (const auto* ans = std::get_if<HandlerAnswerSipLeg>(&action)) {
      if (peer_sip_ && peer_sip_->leg_ && !peer_sip_->leg_->answered_final() &&
          !peer_sip_->leg_->early_media_sent()) {
        peer_sip_->leg_->respond(183, ans->sdp);
        peer_sip_->local_sdp_ = ans->sdp;
      }
    }
  }
}

std::string JccConnection::ms_endpoint_for_commands() const {
  if (handler_.ms_endpoint) return *handler_.ms_endpoint;
  const std::string* ep_type = find_value(ledger_.committed, "endpointType");
  return endpoint_wildcard_prefix(ep_type ? *ep_type : "ivr") + "/$@" +
         ms_addr_.host;
}

void JccConnection::send_crcx() {
  const std::string* ep_addr = find_value(ledger_.committed, "endpointAddress");
  if (ep_addr) {
    if (auto parsed = NetAddr::parse(*ep_addr)) ms_addr_ = *parsed;
  }
  const std::string* ep_type = find_value(ledger_.committed, "endpointType");

  MgcpCommand cmd;
  cmd.verb = MgcpVerb::Crcx;
  cmd.endpoint_id = endpoint_wildcard_prefix(ep_type ? *ep_type : "ivr") +
                    "/$@" + ms_addr_.host;
  cmd.set_param("C", wire_token_);
  const std::string* mode = find_value(ledger_.committed, "mode");
  cmd.set_param("M", mode ? *mode : "sendrecv");
  if (const std::string* lo = find_value(ledger_.committed, "localOptions"))
    cmd.set_param("L", *lo);
  if (const std::string* rs = find_value(ledger_.committed, "remoteSdp"))
    cmd.sdp = decode_sdp_value(*rs);
  else if (peer_sip_)
    cmd.sdp = peer_sip_->peer_sdp_;

  provider_->agent_.send(
      std::move(cmd), ms_addr_,
      [this](MgcpTxOutcome outcome, const MgcpResponse* rsp) {
        switch (outcome) {
          case MgcpTxOutcome::Success: {
            HandlerRxCrcxOk ev;
            if (const std::string* i = rsp->param("I")) ev.connection_id = *i;
            if (const std::string* z = rsp->param("Z")) ev.endpoint = *z;
            ev.sdp = rsp->sdp;
            peer_sdp_ = rsp->sdp;
            step_handler(ev);
            break;
          }
          case MgcpTxOutcome::Failure:
            cause_ = "crcx-" + std::to_string(rsp->code);
            step_handler(HandlerRxCrcxFail{rsp->code});
            break;
          case MgcpTxOutcome::TxTimeout:
            cause_ = "media-server-timeout";
            step_handler(HandlerTxTimeout{});
            break;
        }
      });
}

void JccConnection::send_mdcx() {
  MgcpCommand cmd;
  cmd.verb = MgcpVerb::Mdcx;
  cmd.endpoint_id = ms_endpoint_for_commands();
  cmd.set_param("C", wire_token_);
  if (handler_.mgcp_connection_id)
    cmd.set_param("I", *handler_.mgcp_connection_id);
  if (const std::string* mode = find_value(ledger_.committed, "mode"))
    cmd.set_param("M", *mode);
  if (const std::string* lo = find_value(ledger_.committed, "localOptions"))
    cmd.set_param("L", *lo);
  if (const std::string* rs = find_value(ledger_.committed, "remoteSdp"))
    cmd.sdp = decode_sdp_value(*rs);

  provider_->agent_.send(
      std::move(cmd), ms_addr_,
      [this](MgcpTxOutcome outcome, const MgcpResponse* rsp) {
        switch (outcome) {
          case MgcpTxOutcome::Success:
            step_handler(HandlerRxMdcxOk{});
            break;
          case MgcpTxOutcome::Failure:
            step_handler(HandlerRxMdcxFail{rsp->code});
            break;
          case MgcpTxOutcome::TxTimeout:
            // The modify path has no timeout arc of its own; fold it into the
            // refusal arc so the leg lands in the recoverable error phase.
            step_handler(HandlerRxMdcxFail{504});
            break;
        }
      });
}

void JccConnection::send_dlcx(const std::optional<std::string>& connection_id,
                              bool cleanup) {
  MgcpCommand cmd;
  cmd.verb = MgcpVerb::Dlcx;
  cmd.endpoint_id = ms_endpoint_for_commands();
  cmd.set_param("C", wire_token_);
  if (connection_id) cmd.set_param("I", *connection_id);

  MgcpAgent::Completion done;
  if (cleanup) {
    done = [](MgcpTxOutcome, const MgcpResponse*) {};
  } else {
    done = [this](MgcpTxOutcome outcome, const MgcpResponse* rsp) {
      switch (outcome) {
        case MgcpTxOutcome::Success:
          step_handler(HandlerRxDlcxOk{});
          break;
        case MgcpTxOutcome::Failure:
          step_handler(HandlerRxDlcxFail{rsp->code});
          break;
        case MgcpTxOutcome::TxTimeout:
          step_handler(HandlerTxTimeout{});
          break;
      }
    };
  }
  provider_->agent_.send(std::move(cmd), ms_addr_, std::move(done));
}

void JccConnection::send_rqnt() {
  MgcpCommand cmd;
  cmd.verb = MgcpVerb::Rqnt;
  cmd.endpoint_id = ms_endpoint_for_commands();
  std::string x = provider_->fresh_x();
  cmd.set_param("X", x);
  if (const std::string* sig = find_value(staged_request_, "signal"))
    cmd.set_param("S", prefixed_event_value("A/", *sig));
  if (const std::string* ev = find_value(staged_request_, "requestedEvents"))
    cmd.set_param("R", prefixed_event_value("D/", *ev));
  if (const std::string* dm = find_value(staged_request_, "digitMap"))
    cmd.set_param("D", *dm);
  staged_request_.clear();
  rqnt_outstanding_ = true;
  outstanding_x_ = x;
  provider_->x_watch_[x] = this;

  provider_->agent_.send(
      std::move(cmd), ms_addr_,
      [this, x](MgcpTxOutcome outcome, const MgcpResponse* rsp) {
        if (outcome == MgcpTxOutcome::Success) return;  // completed by notify
        provider_->x_watch_.erase(x);
        if (outstanding_x_ == x) {
          rqnt_outstanding_ = false;
          outstanding_x_.clear();
        }
        std::map<std::string, std::string> payload;
        payload["success"] = "false";
        payload["reason"] = outcome == MgcpTxOutcome::Failure
                                ? "request-refused-" + std::to_string(rsp->code)
                                : "request-timeout";
        if (state_ == JccConnState::Connected)
          fire_midcall(kCauseRequestResult, std::move(payload));
      });
}

void JccConnection::on_ntfy(const MgcpCommand& ntfy) {
  const std::string* x = ntfy.param("X");
  if (!x || *x != outstanding_x_) {
    logf(LogLevel::Debug, "conn %s: notify for retired request", id_.c_str());
    return;
  }
  rqnt_outstanding_ = false;
  outstanding_x_.clear();
  provider_->x_watch_.erase(*x);

  std::string observed = ntfy.param("O") ? *ntfy.param("O") : "";
  std::map<std::string, std::string> payload;
  if (observed.rfind("D/fail(", 0) == 0) {
    auto close = observed.find(')', 7);
    payload["success"] = "false";
    payload["reason"] = observed.substr(
        7, close == std::string::npos ? std::string::npos : close - 7);
  } else if (observed == "A/oc") {
    payload["success"] = "true";
    payload["reason"] = "announcement-complete";
  } else if (observed.rfind("D/", 0) == 0) {
    payload["success"] = "true";
    payload["digits"] = observed.substr(2);
  } else {
    payload["success"] = "false";
    payload["reason"] = "unrecognized-" + observed;
  }
  if (state_ == JccConnState::Connected)
    fire_midcall(kCauseRequestResult, std::move(payload));
}

void JccConnection::commit_non_request_pending() {
  ParamValues keep;
  for (auto& [name, value] : ledger_.pending) {
    auto cls = classify_parameter(name);
    if (cls && *cls == ParamClass::Request)
      keep.emplace_back(name, value);
    else
      put_value(ledger_.committed, name, std::move(value));
  }
  ledger_.pending = std::move(keep);
}

Status<JccError> JccConnection::select_route(const std::string& param) {
  call_->note_api();
  if (flavor_ != ConnFlavor::Mgcp)
    return make_err(JccError::IllegalState,
                    "routing parameters need a media connection");
  if (jcc_state_terminal(state_))
    return make_err(JccError::TerminalConnection, id_);
  auto eq = param.find('=');
  if (eq == std::string::npos || eq == 0)
    return make_err(JccError::MalformedParam, param);
  std::string name = param.substr(0, eq);
  auto recorded = record_parameter(ledger_, name, param.substr(eq + 1));
  if (!recorded.ok()) return make_err(JccError::UnknownParameter, name);
  return ok_unit();
}

Status<JccError> JccConnection::route_connection(bool flag) {
  call_->note_api();
  if (flag)
    return make_err(JccError::IllegalArgument, "no synchronous routing mode");
  if (flavor_ != ConnFlavor::Mgcp)
    return make_err(JccError::IllegalState, "not a media connection");
  if (jcc_state_terminal(state_))
    return make_err(JccError::TerminalConnection, id_);
  if (handler_.phase == HandlerPhase::Idle) {
    if (state_ != JccConnState::Idle)
      return make_err(JccError::IllegalState, "connection already routed");
  } else if (handler_.phase != HandlerPhase::Error) {
    return make_err(JccError::IllegalState,
                    std::string("handler busy in ") + to_string(handler_.phase));
  }
  commit_non_request_pending();
  const std::string* ep_addr = find_value(ledger_.committed, "endpointAddress");
  const std::string* ep_type = find_value(ledger_.committed, "endpointType");
  if (!ep_addr || !ep_type)
    return make_err(JccError::IllegalState,
                    "endpointAddress and endpointType required");
  auto parsed = NetAddr::parse(*ep_addr);
  if (!parsed)
    return make_err(JccError::IllegalState,
                    "bad endpointAddress: " + *ep_addr);
  ms_addr_ = *parsed;
  step_handler(HandlerCmdRouteConnection{});
  return ok_unit();
}

Status<JccError> JccConnection::attach_media() {
  call_->note_api();
  if (flavor_ != ConnFlavor::Mgcp)
    return make_err(JccError::IllegalState, "not a media connection");
  if (jcc_state_terminal(state_))
    return make_err(JccError::TerminalConnection, id_);
  if (state_ != JccConnState::Connected)
    return make_err(JccError::IllegalState, "connection not established");
  if (handler_.phase == HandlerPhase::Reconnection || rqnt_outstanding_)
    return make_err(JccError::HandlerBusy, id_);
  if (handler_.phase != HandlerPhase::Connected)
    return make_err(JccError::IllegalState,
                    std::string("handler in ") + to_string(handler_.phase));
  auto flushed = flush_ledger(ledger_);
  if (!flushed.ok()) return make_err(JccError::EmptyLedger, "no staged changes");
  auto result = flushed.take();
  ledger_ = std::move(result.ledger);
  bool structural = result.plan.structural;
  bool modify = result.plan.modify;
  staged_request_ = std::move(result.plan.request);
  step_handler(HandlerCmdFlush{structural, modify, !staged_request_.empty()});
  return ok_unit();
}

Status<JccError> JccConnection::release(ReleaseCause cause) {
  call_->note_api();
  if (jcc_state_terminal(state_))
    return make_err(JccError::TerminalConnection, id_);

  if (flavor_ == ConnFlavor::Sip) {
    releasing_ = true;
    if (!leg_) {
      set_state_fire(JccConnState::Failed, "released");
      return ok_unit();
    }
    if (leg_->answering()) {
      if (!leg_->answered_final()) {
        int status = release_status(cause);
        leg_->respond(status, std::nullopt);
        set_state_fire(JccConnState::Failed, std::to_string(status));
      } else {
        leg_->send_bye();
      }
    } else {
      if (state_ == JccConnState::Connected) {
        leg_->send_bye();
      } else {
        leg_->abandon();
        set_state_fire(JccConnState::Failed, "released");
      }
    }
    return ok_unit();
  }

  switch (handler_.phase) {
    case HandlerPhase::Connected:
      step_handler(HandlerCmdRelease{});
      return ok_unit();
    case HandlerPhase::Error:
      // The failed leg was already torn down on the way into the error
      // phase; nothing is left on the media server.
      handler_.phase = HandlerPhase::Disconnected;
      set_state_fire(JccConnState::Disconnected, "released");
      return ok_unit();
    case HandlerPhase::Idle:
      handler_.phase = HandlerPhase::Disconnected;
      set_state_fire(JccConnState::Failed, "released");
      return ok_unit();
    default:
      return make_err(JccError::IllegalState,
                      std::string("operation in progress in ") +
                          to_string(handler_.phase));
  }
}

JccCall::JccCall(JccProvider& provider, std::string id)
    : provider_(&provider), id_(std::move(id)) {}

std::vector<JccConnection*> JccCall::connections() {
  std::vector<JccConnection*> out;
  out.reserve(conns_.size());
  for (auto& c : conns_) out.push_back(c.get());
  return out;
}

void JccCall::refresh_state() {
  if (conns_.empty()) {
    state_ = State::Idle;
    return;
  }
  for (auto& c : conns_) {
    if (!jcc_state_terminal(c->jcc_state())) {
      state_ = State::Active;
      return;
    }
  }
  state_ = State::Invalid;
}

void JccCall::maybe_freeze() {
  if (frozen_) return;
  int sip_count = 0;
  bool all_connected = true;
  for (auto& c : conns_) {
    if (c->flavor() != ConnFlavor::Sip) continue;
    ++sip_count;
    if (c->jcc_state() != JccConnState::Connected) all_connected = false;
  }
  if (sip_count >= 2 && all_connected) {
    frozen_ = true;
    setup_interactions_ = interactions_;
  }
}

Result<JccConnection*, JccError> JccCall::create_connection(
    const std::string& target, const std::string& peer) {
  note_api();
  if (state_ == State::Invalid)
    return make_err(JccError::IllegalState, "call has ended");
  JccAddress addr;
  if (!JccAddress::parse(target, addr))
    return make_err(JccError::InvalidTargetScheme, target);

  auto flavor =
      addr.scheme == AddrScheme::Sip ? ConnFlavor::Sip : ConnFlavor::Mgcp;
  std::string conn_id = "conn-" + std::to_string(provider_->next_conn_++);
  auto holder = std::unique_ptr<JccConnection>(
      new JccConnection(*provider_, *this, conn_id, flavor, addr));
  JccConnection* conn = holder.get();

  if (flavor == ConnFlavor::Mgcp) {
    JccConnection* peer_conn = nullptr;
    for (auto& c : conns_) {
      if (c->flavor() == ConnFlavor::Sip &&
          (c->address().literal == peer ||
           c->address().without_scheme() == peer)) {
        peer_conn = c.get();
        break;
      }
    }
    if (!peer_conn) return make_err(JccError::NoSuchPeerConnection, peer);
    if (!peer_conn->peer_sdp())
      return make_err(JccError::PeerSdpMissing, peer);
    conn->peer_sip_ = peer_conn;
    conn->wire_token_ =
        peer_conn->leg_ ? peer_conn->leg_->call_id() : id_;
    record_parameter(conn->ledger_, "endpointAddress", addr.without_scheme());
  }

  conns_.push_back(std::move(holder));
  refresh_state();
  provider_->fire_event(*conn, JccEventKind::Created, "", {});
  return conn;
}

Status<JccError> JccCall::route_call(const std::string& callee,
                                     JccConnection& caller_conn) {
  note_api();
  if (state_ == State::Invalid)
    return make_err(JccError::IllegalState, "call has ended");
  if (caller_conn.flavor_ != ConnFlavor::Sip || !caller_conn.leg_)
    return make_err(JccError::IllegalState, "caller connection has no dialog");
  if (caller_conn.leg_->answered_final())
    return make_err(JccError::IllegalState, "caller already answered");
  if (!caller_conn.peer_sdp_)
    return make_err(JccError::PeerSdpMissing, "caller offer not available");

  std::string uri = callee.rfind("sip:", 0) == 0 ? callee : "sip:" + callee;
  NetAddr dest = provider_->resolve_sip_host(uri);

  std::string conn_id = "conn-" + std::to_string(provider_->next_conn_++);
  auto holder = std::unique_ptr<JccConnection>(
      new JccConnection(*provider_, *this, conn_id, ConnFlavor::Sip,
                        JccAddress{AddrScheme::Sip, uri}));
  JccConnection* b = holder.get();
  conns_.push_back(std::move(holder));
  refresh_state();
  provider_->fire_event(*b, JccEventKind::Created, "", {});

  JccConnection* a = &caller_conn;
  SipLeg::Hooks hooks;
  hooks.on_provisional = [b](int status,
                             const std::optional<SdpSession>& sdp) {
    if (sdp) b->peer_sdp_ = sdp;
    if (status == 180 && b->state_ == JccConnState::CallDelivery)
      b->set_state_fire(JccConnState::Alerting);
  };
  hooks.on_answered = [a, b](const std::optional<SdpSession>& sdp) {
    if (sdp) b->peer_sdp_ = sdp;
    if (!jcc_state_terminal(b->state_)) {
      b->local_sdp_ = a->peer_sdp_;
      b->set_state_fire(JccConnState::Connected);
    }
    if (a->leg_ && !a->leg_->answered_final() &&
        !jcc_state_terminal(a->state_)) {
      a->leg_->respond(200, b->peer_sdp_);
      a->local_sdp_ = b->peer_sdp_;
    }
  };
  hooks.on_rejected = [b](int status) {
    if (!jcc_state_terminal(b->state_))
      b->set_state_fire(JccConnState::Failed, std::to_string(status));
  };
  hooks.on_invite_timeout = [b]() {
    if (!jcc_state_terminal(b->state_))
      b->set_state_fire(JccConnState::Failed, "invite-timeout");
  };
  hooks.on_remote_bye = [b]() {
    if (b->state_ == JccConnState::Connected)
      b->set_state_fire(JccConnState::Disconnected, "peer-bye");
    else if (!jcc_state_terminal(b->state_))
      b->set_state_fire(JccConnState::Failed, "peer-bye");
  };
  hooks.on_bye_done = [b]() {
    if (b->releasing_ && !jcc_state_terminal(b->state_)) {
      auto next = b->state_ == JccConnState::Connected
                      ? JccConnState::Disconnected
                      : JccConnState::Failed;
      b->set_state_fire(next, "released");
    }
  };

  b->leg_ = std::make_unique<SipLeg>(
      provider_->engine_, provider_->transport_, provider_->config_.sip_addr,
      dest, caller_conn.leg_->call_id() + "-b", caller_conn.address_.literal,
      uri, provider_->fresh_tag(), std::move(hooks));
  b->wire_token_ = b->leg_->call_id();
  provider_->sip_dialogs_[b->leg_->call_id()] = b;
  b->leg_->send_invite(caller_conn.peer_sdp_);
  b->set_state_fire(JccConnState::CallDelivery);
  return ok_unit();
}

JccProvider::JccProvider(Engine& engine, Transport& transport,
                         JccProviderConfig config)
    : engine_(engine),
      transport_(transport),
      config_(std::move(config)),
      agent_(engine, transport, config_.mgcp_addr) {
  transport_.bind(config_.sip_addr, this);
  agent_.set_command_handler(
      [this](const MgcpCommand& cmd, const NetAddr& from) {
        on_mgcp_command(cmd, from);
      });
}

JccProvider::~JccProvider() { transport_.unbind(config_.sip_addr); }

Result<JccCall*, JccError> JccProvider::create_call() {
  if (shutdown_) return make_err(JccError::ProviderShutDown);
  JccCall* call = make_call();
  call->note_api();
  return call;
}

JccCall* JccProvider::make_call() {
  std::string id = "call-" + std::to_string(next_call_++);
  auto call = std::unique_ptr<JccCall>(new JccCall(*this, id));
  JccCall* raw = call.get();
  calls_.emplace(raw->id_, std::move(call));
  return raw;
}

void JccProvider::add_listener(std::set<JccEventKind> filter, ListenerFn fn,
                               bool counted) {
  listeners_.push_back({std::move(filter), std::move(fn), counted});
}

std::set<JccEventKind> JccProvider::app_event_filter() {
  return {JccEventKind::Connected, JccEventKind::Disconnected,
          JccEventKind::Failed, JccEventKind::MidCall};
}

std::set<JccEventKind> JccProvider::all_event_kinds() {
  return {JccEventKind::Created,      JccEventKind::CallDelivery,
          JccEventKind::Alerting,     JccEventKind::Connected,
          JccEventKind::Disconnected, JccEventKind::Failed,
          JccEventKind::MidCall};
}

JccCall* JccProvider::find_call(const std::string& id) {
  auto it = calls_.find(id);
  return it == calls_.end() ? nullptr : it->second.get();
}

void JccProvider::fire_event(JccConnection& conn, JccEventKind kind,
                             std::string cause,
                             std::map<std::string, std::string> payload) {
  JccEvent ev;
  ev.kind = kind;
  ev.call_id = conn.call_->id_;
  ev.connection_id = conn.id_;
  ev.cause = std::move(cause);
  ev.payload = std::move(payload);

  bool counted = false;
  for (const auto& l : listeners_) {
    if (l.counted && l.filter.count(kind) > 0) {
      counted = true;
      break;
    }
  }
  if (counted) conn.call_->note_event();
  conn.call_->maybe_freeze();

  for (const auto& l : listeners_) {
    if (l.filter.count(kind) == 0) continue;
    auto fn = l.fn;
    engine_.post([fn, ev] { fn(ev); });
  }
}

void JccProvider::on_datagram(const Datagram& d) {
  auto parsed = parse_sip(d.payload);
  if (!parsed.ok()) {
    logf(LogLevel::Warn, "sip: dropping unparseable datagram from %s",
         d.from.to_string().c_str());
    return;
  }
  SipMessage msg = parsed.take();
  auto it = sip_dialogs_.find(msg.call_id());
  if (it != sip_dialogs_.end() && it->second->leg_) {
    it->second->leg_->handle(msg);
    return;
  }
  if (!msg.is_request()) {
    logf(LogLevel::Debug, "sip: response for unknown dialog %s",
         msg.call_id().c_str());
    return;
  }
  switch (msg.method) {
    case SipMethod::Invite:
      if (shutdown_) {
        respond_statelessly(d, msg, 503);
        return;
      }
      accept_invite(d, std::move(msg));
      return;
    case SipMethod::Ack:
      return;
    case SipMethod::Bye:
      respond_statelessly(d, msg, 481);
      return;
    default:
      respond_statelessly(d, msg, 501);
      return;
  }
}

void JccProvider::accept_invite(const Datagram& d, SipMessage invite) {
  JccCall* call = make_call();
  std::string conn_id = "conn-" + std::to_string(next_conn_++);
  const std::string* from = invite.header("From");
  std::string caller_uri = from ? sip_header_uri(*from) : "sip:unknown";
  auto holder = std::unique_ptr<JccConnection>(
      new JccConnection(*this, *call, conn_id, ConnFlavor::Sip,
                        JccAddress{AddrScheme::Sip, caller_uri}));
  JccConnection* conn = holder.get();
  conn->invited_uri_ = invite.request_uri;
  call->conns_.push_back(std::move(holder));
  call->refresh_state();

  SipLeg::Hooks hooks;
  hooks.on_ack = [conn]() {
    if (!conn->releasing_ && !jcc_state_terminal(conn->state_))
      conn->set_state_fire(JccConnState::Connected);
  };
  hooks.on_remote_bye = [conn]() {
    if (conn->state_ == JccConnState::Connected)
      conn->set_state_fire(JccConnState::Disconnected, "peer-bye");
    else if (!jcc_state_terminal(conn->state_))
      conn->set_state_fire(JccConnState::Failed, "peer-bye");
  };
  hooks.on_bye_done = [conn]() {
    if (conn->releasing_ && !jcc_state_terminal(conn->state_)) {
      auto next = conn->state_ == JccConnState::Connected
                      ? JccConnState::Disconnected
                      : JccConnState::Failed;
      conn->set_state_fire(next, "released");
    }
  };
  hooks.on_invite_timeout = [conn]() {
    if (!jcc_state_terminal(conn->state_))
      conn->set_state_fire(JccConnState::Failed, "handshake-timeout");
  };

  conn->leg_ = std::make_unique<SipLeg>(engine_, transport_, config_.sip_addr,
                                        d, std::move(invite), fresh_tag(),
                                        std::move(hooks));
  conn->peer_sdp_ = conn->leg_->remote_sdp();
  conn->wire_token_ = conn->leg_->call_id();
  sip_dialogs_[conn->leg_->call_id()] = conn;

  fire_event(*conn, JccEventKind::Created, "", {});
  conn->set_state_fire(JccConnState::CallDelivery);
  if (call_offered_) call_offered_(*call, *conn);
}

void JccProvider::on_mgcp_command(const MgcpCommand& cmd, const NetAddr& from) {
  if (cmd.verb != MgcpVerb::Ntfy) {
    MgcpResponse rsp;
    rsp.code = 510;
    rsp.transaction_id = cmd.transaction_id;
    rsp.comment = "unexpected command";
    agent_.respond(rsp, from);
    return;
  }
  std::string key =
      from.to_string() + "/" + std::to_string(cmd.transaction_id);
  auto cached = ntfy_acked_.find(key);
  if (cached != ntfy_acked_.end()) {
    agent_.respond(cached->second, from);
    return;
  }
  MgcpResponse ack;
  ack.code = 200;
  ack.transaction_id = cmd.transaction_id;
  ack.comment = "OK";
  agent_.respond(ack, from);
  ntfy_acked_.emplace(key, ack);
  ntfy_acked_order_.push_back(key);
  while (ntfy_acked_order_.size() > 1024) {
    ntfy_acked_.erase(ntfy_acked_order_.front());
    ntfy_acked_order_.pop_front();
  }

  const std::string* x = cmd.param("X");
  if (!x) {
    logf(LogLevel::Warn, "ntfy %u without a request id", cmd.transaction_id);
    return;
  }
  auto watcher = x_watch_.find(*x);
  if (watcher == x_watch_.end()) {
    logf(LogLevel::Debug, "ntfy %u for retired request id %s",
         cmd.transaction_id, x->c_str());
    return;
  }
  watcher->second->on_ntfy(cmd);
}

void JccProvider::respond_statelessly(const Datagram& d, const SipMessage& req,
                                      int status) {
  SipMessage rsp = SipMessage::response_to(req, status);
  auto text = serialize_sip(rsp);
  if (!text.ok()) {
    logf(LogLevel::Warn, "sip: cannot answer malformed request with %d",
         status);
    return;
  }
  transport_.send({d.to, d.from, text.take()});
}

NetAddr JccProvider::resolve_sip_host(const std::string& uri) const {
  std::string host_port = sip_uri_host_port(uri);
  std::string host = host_port;
  std::uint16_t port = 5060;
  if (auto parsed = NetAddr::parse(host_port)) {
    host = parsed->host;
    port = parsed->port;
  }
  auto it = config_.host_overrides.find(host);
  if (it != config_.host_overrides.end()) return it->second;
  return {host, port};
}

}  // namespace jcall
