#include "jcall/jcc/sipleg.hpp"

#include <utility>

#include "jcall/util/log.hpp"

namespace jcall {

namespace {

bool has_tag(const std::string& header_value) {
  return header_value.find(";tag=") != std::string::npos;
}

}  // namespace

std::optional<SdpSession> sip_body_sdp(const SipMessage& msg) {
  if (msg.body.empty()) return std::nullopt;
  const std::string* type = msg.header("Content-Type");
  if (type == nullptr || type->find("application/sdp") == std::string::npos)
    return std::nullopt;
  auto parsed = parse_sdp(msg.body);
  if (!parsed.ok()) {
    logf(LogLevel::Warn, "sip: undecodable sdp body in %s ignored",
         msg.call_id().c_str());
    return std::nullopt;
  }
  return parsed.take();
}

void set_sip_body_sdp(SipMessage& msg, const SdpSession& sdp) {
  auto text = serialize_sdp(sdp);
  if (!text.ok()) {
    logf(LogLevel::Error, "sip: refusing to attach unserializable sdp");
    return;
  }
  msg.set_header("Content-Type", "application/sdp");
  msg.body = text.take();
}

std::string sip_header_uri(const std::string& header_value) {
  std::string v = header_value;
  auto lt = v.find('<');
  if (lt != std::string::npos) {
    auto gt = v.find('>', lt);
    v = gt == std::string::npos ? v.substr(lt + 1) : v.substr(lt + 1, gt - lt - 1);
  } else {
    auto semi = v.find(';');
    if (semi != std::string::npos) v = v.substr(0, semi);
  }
  while (!v.empty() && v.front() == ' ') v.erase(v.begin());
  while (!v.empty() && v.back() == ' ') v.pop_back();
  return v;
}

void SipLeg::Runner::start(SipTxState initial,
                           std::function<void(const SipTxNotify&)> fn) {
  disarm();
  state = std::move(initial);
  notify = std::move(fn);
  active = true;
}

void SipLeg::Runner::step(const SipTxEvent& event) {
  if (!active) return;
  SipTxStep result = sip_transaction_step(state, event);
  if (result.illegal) return;
  state = result.state;
  for (const auto& action : result.actions) {
    if (const auto* emit = std::get_if<SipTxEmit>(&action)) {
      leg->send_msg(emit->message);
    } else if (const auto* arm = std::get_if<SipTxArmTimer>(&action)) {
      disarm();
      SipTimerKind kind = arm->kind;
      timer = leg->engine_.schedule_after(arm->delay, [this, kind] {
        timer.reset();
        if (kind == SipTimerKind::Retransmit)
          step(SipTxTimerRetransmit{});
        else
          step(SipTxTimerTimeout{});
      });
    } else if (const auto* n = std::get_if<SipTxNotify>(&action)) {
      if (notify) notify(*n);
    }
  }
  bool armed_phase =
      (state.role == SipTxRole::Client && state.phase == SipTxPhase::Calling) ||
      (state.role == SipTxRole::Server && state.phase == SipTxPhase::Completed);
  if (!armed_phase) disarm();
}

void SipLeg::Runner::disarm() {
  if (timer) {
    leg->engine_.cancel(*timer);
    timer.reset();
  }
}

SipLeg::SipLeg(Engine& engine, Transport& transport, NetAddr local,
               const Datagram& dgram, SipMessage invite, std::string local_tag,
               Hooks hooks)
    : engine_(engine),
      transport_(transport),
      local_(std::move(local)),
      remote_(dgram.from),
      answering_(true),
      call_id_(invite.call_id()),
      local_tag_(std::move(local_tag)),
      remote_tag_(invite.from_tag()),
      invite_(std::move(invite)),
      hooks_(std::move(hooks)) {
  invite_tx_.leg = this;
  bye_tx_.leg = this;
  remote_sdp_ = sip_body_sdp(invite_);
  invite_tx_.start(make_server_tx(invite_),
                   [this](const SipTxNotify& n) { on_invite_notify(n); });
  invite_tx_.step(SipTxRx{invite_});
}

SipLeg::SipLeg(Engine& engine, Transport& transport, NetAddr local,
               NetAddr remote, std::string call_id, std::string from_uri,
               std::string to_uri, std::string local_tag, Hooks hooks)
    : engine_(engine),
      transport_(transport),
      local_(std::move(local)),
      remote_(std::move(remote)),
      answering_(false),
      call_id_(std::move(call_id)),
      local_tag_(std::move(local_tag)),
      from_uri_(std::move(from_uri)),
      to_uri_(std::move(to_uri)),
      hooks_(std::move(hooks)) {
  invite_tx_.leg = this;
  bye_tx_.leg = this;
}

SipLeg::~SipLeg() {
  invite_tx_.disarm();
  bye_tx_.disarm();
}

void SipLeg::send_invite(const std::optional<SdpSession>& offer) {
  if (answering_ || invite_tx_.active) {
    logf(LogLevel::Warn, "sip leg %s: send_invite on a started leg ignored",
         call_id_.c_str());
    return;
  }
  SipMessage req = SipMessage::request(SipMethod::Invite, to_uri_);
  req.add_header("Via",
                 "SIP/2.0/UDP " + local_.to_string() + ";branch=z9hG4bK-" + call_id_);
  req.add_header("From", from_uri_ + ";tag=" + local_tag_);
  req.add_header("To", to_uri_);
  req.add_header("Call-ID", call_id_);
  req.add_header("CSeq", "1 INVITE");
  if (offer) set_sip_body_sdp(req, *offer);
  invite_ = req;
  invite_tx_.start(make_client_tx(req),
                   [this](const SipTxNotify& n) { on_invite_notify(n); });
  invite_tx_.step(SipTxSend{req});
}

void SipLeg::respond(int status, const std::optional<SdpSession>& sdp) {
  if (!answering_) {
    logf(LogLevel::Warn, "sip leg %s: respond() on the calling side ignored",
         call_id_.c_str());
    return;
  }
  if (final_sent_) {
    logf(LogLevel::Warn, "sip leg %s: already answered, %d ignored",
         call_id_.c_str(), status);
    return;
  }
  SipMessage rsp = SipMessage::response_to(invite_, status);
  if (status > 100) {
    const std::string* to = rsp.header("To");
    if (to != nullptr && !has_tag(*to))
      rsp.set_header("To", *to + ";tag=" + local_tag_);
  }
  if (sdp) set_sip_body_sdp(rsp, *sdp);
  if (status >= 200)
    final_sent_ = true;
  else if (sdp)
    early_media_sent_ = true;
  invite_tx_.step(SipTxSend{rsp});
}

void SipLeg::send_bye() {
  if (bye_sent_) return;
  bye_sent_ = true;
  std::string remote_id = remote_identity();
  SipMessage bye = SipMessage::request(SipMethod::Bye, sip_header_uri(remote_id));
  bye.add_header("Via", "SIP/2.0/UDP " + local_.to_string() + ";branch=z9hG4bK-" +
                            call_id_ + "-bye");
  bye.add_header("From", local_identity());
  bye.add_header("To", remote_id);
  bye.add_header("Call-ID", call_id_);
  bye.add_header("CSeq", std::to_string(++local_cseq_) + " BYE");
  bye_tx_.start(make_client_tx(bye),
                [this](const SipTxNotify& n) { on_bye_notify(n); });
  bye_tx_.step(SipTxSend{bye});
}

void SipLeg::abandon() { abandoned_ = true; }

void SipLeg::handle(const SipMessage& msg) {
  if (msg.is_request())
    handle_request(msg);
  else
    handle_response(msg);
}

void SipLeg::handle_request(const SipMessage& msg) {
  switch (msg.method) {
    case SipMethod::Invite:
    case SipMethod::Ack:
      if (answering_) {
        invite_tx_.step(SipTxRx{msg});
      } else {
        logf(LogLevel::Warn, "sip leg %s: unexpected %s request",
             call_id_.c_str(), msg.method_text.c_str());
      }
      return;
    case SipMethod::Bye: {
      auto cseq = msg.cseq();
      std::uint32_t n = cseq ? cseq->number : 0;
      auto replay = replayable_.find(n);
      if (replay != replayable_.end()) {
        transport_.send({local_, remote_, replay->second});
        return;
      }
      SipMessage rsp = SipMessage::response_to(msg, 200);
      auto text = serialize_sip(rsp);
      if (text.ok()) {
        replayable_[n] = text.value();
        transport_.send({local_, remote_, text.take()});
      }
      if (!remote_bye_seen_) {
        remote_bye_seen_ = true;
        if (hooks_.on_remote_bye) hooks_.on_remote_bye();
      }
      return;
    }
    case SipMethod::Other: {
      SipMessage rsp = SipMessage::response_to(msg, 501);
      send_msg(rsp);
      return;
    }
  }
}

void SipLeg::handle_response(const SipMessage& msg) {
  auto cseq = msg.cseq();
  if (!cseq) return;
  if (cseq->method == "INVITE") {
    if (!answering_ && invite_tx_.active &&
        invite_tx_.state.phase == SipTxPhase::Terminated && msg.status >= 200 &&
        msg.status < 300 && stored_ack_) {
      auto text = serialize_sip(*stored_ack_);
      if (text.ok()) transport_.send({local_, remote_, text.take()});
      return;
    }
    invite_tx_.step(SipTxRx{msg});
    return;
  }
  if (cseq->method == "BYE") {
    bye_tx_.step(SipTxRx{msg});
    return;
  }
  logf(LogLevel::Warn, "sip leg %s: response for unknown %s transaction",
       call_id_.c_str(), cseq->method.c_str());
}

void SipLeg::on_invite_notify(const SipTxNotify& n) {
  switch (n.outcome) {
    case SipTxOutcome::Provisional: {
      auto sdp = sip_body_sdp(n.message);
      if (sdp) remote_sdp_ = sdp;
      if (!abandoned_ && hooks_.on_provisional)
        hooks_.on_provisional(n.status, sdp);
      return;
    }
    case SipTxOutcome::Success: {
      remote_tag_ = n.message.to_tag();
      auto sdp = sip_body_sdp(n.message);
      if (sdp) remote_sdp_ = sdp;
      SipMessage ack = build_ack(invite_, n.message);
      stored_ack_ = ack;
      send_msg(ack);
      if (abandoned_) {
        send_bye();
        return;
      }
      if (hooks_.on_answered) hooks_.on_answered(sdp);
      return;
    }
    case SipTxOutcome::Failure:
      if (!abandoned_ && hooks_.on_rejected) hooks_.on_rejected(n.status);
      return;
    case SipTxOutcome::TimedOut:
      if (!abandoned_ && hooks_.on_invite_timeout) hooks_.on_invite_timeout();
      return;
    case SipTxOutcome::Ack:
      if (!ack_seen_) {
        ack_seen_ = true;
        if (hooks_.on_ack) hooks_.on_ack();
      }
      return;
  }
}

void SipLeg::on_bye_notify(const SipTxNotify& n) {
  switch (n.outcome) {
    case SipTxOutcome::TimedOut:
      logf(LogLevel::Warn, "sip leg %s: bye unanswered, closing locally",
           call_id_.c_str());
      [[fallthrough]];
    case SipTxOutcome::Success:
    case SipTxOutcome::Failure:
      if (hooks_.on_bye_done) hooks_.on_bye_done();
      return;
    default:
      return;
  }
}

std::string SipLeg::local_identity() const {
  if (!answering_) return from_uri_ + ";tag=" + local_tag_;
  const std::string* to = invite_.header("To");
  std::string base = to != nullptr ? *to : "";
  if (!has_tag(base)) base += ";tag=" + local_tag_;
  return base;
}

std::string SipLeg::remote_identity() const {
  if (answering_) {
    const std::string* from = invite_.header("From");
    return from != nullptr ? *from : "";
  }
  std::string base = to_uri_;
  if (!remote_tag_.empty()) base += ";tag=" + remote_tag_;
  return base;
}

void SipLeg::send_msg(const SipMessage& msg) {
  auto text = serialize_sip(msg);
  if (!text.ok()) {
    logf(LogLevel::Error, "sip leg %s: unserializable message dropped (%s)",
         call_id_.c_str(), text.error_detail().c_str());
    return;
  }
  transport_.send({local_, remote_, text.take()});
}

}  // namespace jcall
