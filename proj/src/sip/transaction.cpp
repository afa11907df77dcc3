#include "jcall/sip/transaction.hpp"

#include "jcall/util/log.hpp"

namespace jcall {

namespace {

SipTxStep unchanged(const SipTxState& state) { return {state, {}, false}; }

SipTxStep illegal_event(const SipTxState& state, const char* what) {
  logf(LogLevel::Warn, "sip-tx: illegal event (%s) in role=%s phase=%s", what,
       to_string(state.role), to_string(state.phase));
  return {state, {}, true};
}

void arm_next(SipTxStep& step, const SipTxConfig& config) {
  step.state.retransmit_count += 1;
  step.state.current_interval *= 2;
  SipTimerKind kind = step.state.retransmit_count >= config.max_retransmits
                          ? SipTimerKind::Timeout
                          : SipTimerKind::Retransmit;
  step.actions.push_back(SipTxArmTimer{kind, step.state.current_interval});
}

SipTxStep client_rx(const SipTxState& state, const SipMessage& msg,
                    const SipTxConfig&) {
  if (!msg.is_response()) return illegal_event(state, "request to client tx");
  SipTxStep step = unchanged(state);
  const bool invite = state.request.method == SipMethod::Invite;
  if (msg.status < 200) {
    switch (state.phase) {
      case SipTxPhase::Calling:
        step.state.phase = SipTxPhase::Proceeding;
        [[fallthrough]];
      case SipTxPhase::Proceeding:
        step.actions.push_back(
            SipTxNotify{SipTxOutcome::Provisional, msg.status, msg});
        break;
      default:
        break;
    }
    return step;
  }
  const bool success = msg.status < 300;
  switch (state.phase) {
    case SipTxPhase::Calling:
    case SipTxPhase::Proceeding:
      step.state.last_response = msg;
      if (success || !invite) {
        step.state.phase = SipTxPhase::Terminated;
      } else {
        step.state.phase = SipTxPhase::Completed;
        step.actions.push_back(SipTxEmit{build_ack(state.request, msg)});
      }
      step.actions.push_back(SipTxNotify{
          success ? SipTxOutcome::Success : SipTxOutcome::Failure, msg.status,
          msg});
      return step;
    case SipTxPhase::Completed:
      if (invite && msg.status >= 300)
        step.actions.push_back(SipTxEmit{build_ack(state.request, msg)});
      return step;
    case SipTxPhase::Terminated:
      return step;
  }
  return step;
}

SipTxStep server_rx(const SipTxState& state, const SipMessage& msg,
                    const SipTxConfig&) {
  if (msg.is_response()) return illegal_event(state, "response to server tx");
  if (msg.method == SipMethod::Ack &&
      state.request.method == SipMethod::Invite) {
    SipTxStep step = unchanged(state);
    switch (state.phase) {
      case SipTxPhase::Completed:
        step.state.phase = SipTxPhase::Terminated;
        step.actions.push_back(SipTxNotify{
            SipTxOutcome::Ack, state.last_response.status, msg});
        return step;
      case SipTxPhase::Terminated:
        return step;
      default:
        return illegal_event(state, "ACK before final response");
    }
  }
  if (msg.method != state.request.method)
    return illegal_event(state, "method mismatch");
  SipTxStep step = unchanged(state);
  switch (state.phase) {
    case SipTxPhase::Calling:
      if (state.request.method == SipMethod::Invite) {
        SipMessage trying = SipMessage::response_to(msg, 100);
        step.state.phase = SipTxPhase::Proceeding;
        step.state.last_response = trying;
        step.state.response_sent = true;
        step.actions.push_back(SipTxEmit{std::move(trying)});
      }
      return step;
    case SipTxPhase::Proceeding:
    case SipTxPhase::Completed:
      if (state.response_sent)
        step.actions.push_back(SipTxEmit{state.last_response});
      return step;
    case SipTxPhase::Terminated:
      return step;
  }
  return step;
}

SipTxStep server_send(const SipTxState& state, const SipMessage& msg,
                      const SipTxConfig& config) {
  if (!msg.is_response())
    return illegal_event(state, "server tx sends responses only");
  if (state.phase == SipTxPhase::Completed ||
      state.phase == SipTxPhase::Terminated)
    return illegal_event(state, "already answered");
  SipTxStep step = unchanged(state);
  step.state.last_response = msg;
  step.state.response_sent = true;
  if (msg.status < 200) {
    step.state.phase = SipTxPhase::Proceeding;
    step.actions.push_back(SipTxEmit{msg});
    return step;
  }
  if (state.request.method == SipMethod::Invite) {
    step.state.phase = SipTxPhase::Completed;
    step.state.retransmit_count = 0;
    step.state.current_interval = config.retransmit_base;
    step.actions.push_back(SipTxEmit{msg});
    step.actions.push_back(
        SipTxArmTimer{SipTimerKind::Retransmit, config.retransmit_base});
  } else {
    step.state.phase = SipTxPhase::Terminated;
    step.actions.push_back(SipTxEmit{msg});
  }
  return step;
}

}  // namespace

const char* to_string(SipTxRole role) {
  return role == SipTxRole::Client ? "client" : "server";
}

const char* to_string(SipTxPhase phase) {
  switch (phase) {
    case SipTxPhase::Calling: return "Calling";
    case SipTxPhase::Proceeding: return "Proceeding";
    case SipTxPhase::Completed: return "Completed";
    case SipTxPhase::Terminated: return "Terminated";
  }
  return "?";
}

const char* to_string(SipTxOutcome outcome) {
  switch (outcome) {
    case SipTxOutcome::Provisional: return "provisional";
    case SipTxOutcome::Success: return "success";
    case SipTxOutcome::Failure: return "failure";
    case SipTxOutcome::TimedOut: return "timeout";
    case SipTxOutcome::Ack: return "ack";
  }
  return "?";
}

SipTxState make_client_tx(SipMessage request) {
  SipTxState state;
  state.role = SipTxRole::Client;
  state.request = std::move(request);
  return state;
}

SipTxState make_server_tx(SipMessage request) {
  SipTxState state;
  state.role = SipTxRole::Server;
  state.request = std::move(request);
  return state;
}

SipTxStep sip_transaction_step(const SipTxState& state, const SipTxEvent& event,
                               const SipTxConfig& config) {
  if (const auto* send = std::get_if<SipTxSend>(&event)) {
    if (state.role == SipTxRole::Server)
      return server_send(state, send->message, config);
    if (state.phase != SipTxPhase::Calling || state.current_interval != 0)
      return illegal_event(state, "client tx sends once");
    if (!send->message.is_request())
      return illegal_event(state, "client tx sends requests only");
    SipTxStep step = unchanged(state);
    step.state.request = send->message;
    step.state.current_interval = config.retransmit_base;
    step.actions.push_back(SipTxEmit{send->message});
    step.actions.push_back(
        SipTxArmTimer{SipTimerKind::Retransmit, config.retransmit_base});
    return step;
  }
  if (const auto* rx = std::get_if<SipTxRx>(&event)) {
    return state.role == SipTxRole::Client
               ? client_rx(state, rx->message, config)
               : server_rx(state, rx->message, config);
  }
  if (std::holds_alternative<SipTxTimerRetransmit>(event)) {
    const bool active = state.role == SipTxRole::Client
                            ? state.phase == SipTxPhase::Calling
                            : state.phase == SipTxPhase::Completed;
    if (!active || state.current_interval == 0) return unchanged(state);
    if (state.retransmit_count >= config.max_retransmits)
      return unchanged(state);
    SipTxStep step = unchanged(state);
    step.actions.push_back(SipTxEmit{state.role == SipTxRole::Client
                                         ? state.request
                                         : state.last_response});
    arm_next(step, config);
    return step;
  }
  // SipTxTimerTimeout
  const bool awaiting = state.role == SipTxRole::Client
                            ? state.phase == SipTxPhase::Calling
                            : state.phase == SipTxPhase::Completed;
  if (!awaiting) return unchanged(state);
  SipTxStep step = unchanged(state);
  step.state.phase = SipTxPhase::Terminated;
  step.actions.push_back(SipTxNotify{SipTxOutcome::TimedOut, 0, {}});
  return step;
}

SipMessage build_ack(const SipMessage& request, const SipMessage& response) {
  SipMessage ack = SipMessage::request(SipMethod::Ack, request.request_uri);
  for (const char* name : {"Via", "From", "Call-ID"}) {
    if (const std::string* v = request.header(name)) ack.add_header(name, *v);
  }
  if (const std::string* to = response.header("To"))
    ack.add_header("To", *to);
  else if (const std::string* to = request.header("To"))
    ack.add_header("To", *to);
  auto cs = request.cseq();
  ack.set_header("CSeq", std::to_string(cs ? cs->number : 1) + " ACK");
  return ack;
}

}  // namespace jcall
