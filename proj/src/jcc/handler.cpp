#include "jcall/jcc/handler.hpp"

#include "jcall/util/log.hpp"

namespace jcall {

namespace {

HandlerStep illegal_event(const HandlerState& state,
                          const HandlerEvent& event) {
  logf(LogLevel::Warn, "handler %s: event %s illegal in phase %s",
       state.call_id.c_str(), handler_event_name(event),
       to_string(state.phase));
  return {state, {}, true};
}

void emit_queued_rqnt(HandlerStep& step) {
  if (!step.state.rqnt_queued) return;
  step.state.rqnt_queued = false;
  step.actions.push_back(HandlerEmitRqnt{});
}

HandlerStep on_idle(const HandlerState& state, const HandlerEvent& event) {
  if (!std::holds_alternative<HandlerCmdRouteConnection>(event))
    return illegal_event(state, event);
  HandlerStep step{state, {}, false};
  step.state.phase = HandlerPhase::InConnection;
  step.actions.push_back(HandlerEmitCrcx{});
  if (!state.first_connect_done)
    step.actions.push_back(HandlerSetJccState{JccConnState::CallDelivery});
  return step;
}

HandlerStep on_in_connection(const HandlerState& state,
                             const HandlerEvent& event) {
  if (const auto* ok = std::get_if<HandlerRxCrcxOk>(&event)) {
    HandlerStep step{state, {}, false};
    step.state.phase = HandlerPhase::Connected;
    step.state.mgcp_connection_id = ok->connection_id;
    if (!ok->endpoint.empty()) step.state.ms_endpoint = ok->endpoint;
    if (!state.first_connect_done) {
      step.state.first_connect_done = true;
      step.actions.push_back(HandlerSetJccState{JccConnState::Connected});
      step.actions.push_back(HandlerAnswerSipLeg{ok->sdp});
    } else {
      step.actions.push_back(HandlerFireMidCall{kCauseConnectionChanged});
      emit_queued_rqnt(step);
    }
    return step;
  }
  if (std::holds_alternative<HandlerRxCrcxFail>(event) ||
      std::holds_alternative<HandlerTxTimeout>(event)) {
    HandlerStep step{state, {}, false};
    step.state.phase = HandlerPhase::Idle;
    step.actions.push_back(HandlerSetJccState{JccConnState::Failed});
    return step;
  }
  return illegal_event(state, event);
}

HandlerStep on_connected(const HandlerState& state,
                         const HandlerEvent& event) {
  if (const auto* flush = std::get_if<HandlerCmdFlush>(&event)) {
    if (!flush->structural && !flush->modify && !flush->request)
      return illegal_event(state, event);
    HandlerStep step{state, {}, false};
    if (flush->structural) {
      step.state.phase = HandlerPhase::Reconnection;
      step.state.rqnt_queued = flush->request;
      step.actions.push_back(HandlerEmitDlcx{});
      return step;
    }
    if (flush->modify) {
      step.state.rqnt_queued = flush->request;
      step.actions.push_back(HandlerEmitMdcx{});
      return step;
    }
    step.actions.push_back(HandlerEmitRqnt{});
    return step;
  }
  if (std::holds_alternative<HandlerCmdRelease>(event)) {
    HandlerStep step{state, {}, false};
    step.state.phase = HandlerPhase::InDisconnection;
    step.actions.push_back(HandlerEmitDlcx{});
    return step;
  }
  if (std::holds_alternative<HandlerRxMdcxOk>(event)) {
    HandlerStep step{state, {}, false};
    step.actions.push_back(HandlerFireMidCall{kCauseConnectionChanged});
    emit_queued_rqnt(step);
    return step;
  }
  if (std::holds_alternative<HandlerRxMdcxFail>(event)) {
    HandlerStep step{state, {}, false};
    step.state.phase = HandlerPhase::Error;
    step.state.mgcp_connection_id.reset();
    step.actions.push_back(HandlerEmitDlcx{true});
    step.actions.push_back(HandlerFireMidCall{kCauseChangeFailed});
    return step;
  }
  return illegal_event(state, event);
}

HandlerStep on_reconnection(const HandlerState& state,
                            const HandlerEvent& event) {
  if (std::holds_alternative<HandlerRxDlcxOk>(event) ||
      std::holds_alternative<HandlerRxDlcxFail>(event)) {
    HandlerStep step{state, {}, false};
    step.actions.push_back(HandlerEmitCrcx{});
    return step;
  }
  if (const auto* ok = std::get_if<HandlerRxCrcxOk>(&event)) {
    HandlerStep step{state, {}, false};
    step.state.phase = HandlerPhase::Connected;
    step.state.mgcp_connection_id = ok->connection_id;
    if (!ok->endpoint.empty()) step.state.ms_endpoint = ok->endpoint;
    step.actions.push_back(HandlerFireMidCall{kCauseConnectionChanged});
    emit_queued_rqnt(step);
    return step;
  }
  if (std::holds_alternative<HandlerRxCrcxFail>(event) ||
      std::holds_alternative<HandlerTxTimeout>(event)) {
    HandlerStep step{state, {}, false};
    step.state.phase = HandlerPhase::Error;
    step.state.mgcp_connection_id.reset();
    step.actions.push_back(HandlerFireMidCall{kCauseChangeFailed});
    return step;
  }
  return illegal_event(state, event);
}

HandlerStep on_error(const HandlerState& state, const HandlerEvent& event) {
  if (!std::holds_alternative<HandlerCmdRouteConnection>(event))
    return illegal_event(state, event);
  HandlerStep step{state, {}, false};
  step.state.phase = HandlerPhase::InConnection;
  step.actions.push_back(HandlerEmitCrcx{});
  return step;
}

HandlerStep on_in_disconnection(const HandlerState& state,
                                const HandlerEvent& event) {
  if (std::holds_alternative<HandlerRxDlcxOk>(event) ||
      std::holds_alternative<HandlerRxDlcxFail>(event) ||
      std::holds_alternative<HandlerTxTimeout>(event)) {
    HandlerStep step{state, {}, false};
    step.state.phase = HandlerPhase::Disconnected;
    step.state.mgcp_connection_id.reset();
    step.actions.push_back(HandlerSetJccState{JccConnState::Disconnected});
    return step;
  }
  return illegal_event(state, event);
}

}  // namespace

const char* to_string(HandlerPhase phase) {
  switch (phase) {
    case HandlerPhase::Idle: return "Idle";
    case HandlerPhase::InConnection: return "InConnection";
    case HandlerPhase::Connected: return "Connected";
    case HandlerPhase::Reconnection: return "Reconnection";
    case HandlerPhase::Error: return "Error";
    case HandlerPhase::InDisconnection: return "InDisconnection";
    case HandlerPhase::Disconnected: return "Disconnected";
  }
  return "?";
}

const char* handler_event_name(const HandlerEvent& event) {
  struct Namer {
    const char* operator()(const HandlerCmdRouteConnection&) {
      return "cmd_route_connection";
    }
    const char* operator()(const HandlerCmdFlush&) { return "cmd_flush"; }
    const char* operator()(const HandlerCmdRelease&) { return "cmd_release"; }
    const char* operator()(const HandlerRxCrcxOk&) { return "rx_crcx_ok"; }
    const char* operator()(const HandlerRxCrcxFail&) { return "rx_crcx_fail"; }
    const char* operator()(const HandlerRxMdcxOk&) { return "rx_mdcx_ok"; }
    const char* operator()(const HandlerRxMdcxFail&) { return "rx_mdcx_fail"; }
    const char* operator()(const HandlerRxDlcxOk&) { return "rx_dlcx_ok"; }
    const char* operator()(const HandlerRxDlcxFail&) { return "rx_dlcx_fail"; }
    const char* operator()(const HandlerTxTimeout&) { return "tx_timeout"; }
  };
  return std::visit(Namer{}, event);
}

HandlerStep handler_step(const HandlerState& state, const HandlerEvent& event) {
  switch (state.phase) {
    case HandlerPhase::Idle: return on_idle(state, event);
    case HandlerPhase::InConnection: return on_in_connection(state, event);
    case HandlerPhase::Connected: return on_connected(state, event);
    case HandlerPhase::Reconnection: return on_reconnection(state, event);
    case HandlerPhase::Error: return on_error(state, event);
    case HandlerPhase::InDisconnection: return on_in_disconnection(state, event);
    case HandlerPhase::Disconnected: return {state, {}, false};
  }
  return illegal_event(state, event);
}

}  // namespace jcall
