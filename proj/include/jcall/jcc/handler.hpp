#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "jcall/jcc/types.hpp"
#include "jcall/sip/sdp.hpp"

namespace jcall {

enum class HandlerPhase {
  Idle,
  InConnection,
  Connected,
  Reconnection,
  Error,
  InDisconnection,
  Disconnected,
};

const char* to_string(HandlerPhase phase);

// Per-connection bridge state between a call-control connection and its
// media-server leg. Disconnected is absorbing; the connection id is held
// exactly while a media-server connection exists or is being replaced.
struct HandlerState {
  HandlerPhase phase = HandlerPhase::Idle;
  std::string call_id;
  std::optional<std::string> ms_endpoint;
  std::optional<std::string> mgcp_connection_id;
  bool first_connect_done = false;
  bool rqnt_queued = false;
};

struct HandlerCmdRouteConnection {};
struct HandlerCmdFlush {
  bool structural = false;
  bool modify = false;
  bool request = false;
};
struct HandlerCmdRelease {};
struct HandlerRxCrcxOk {
  std::string connection_id;
  std::string endpoint;
  std::optional<SdpSession> sdp;
};
struct HandlerRxCrcxFail {
  int code = 0;
};
struct HandlerRxMdcxOk {};
struct HandlerRxMdcxFail {
  int code = 0;
};
struct HandlerRxDlcxOk {};
struct HandlerRxDlcxFail {
  int code = 0;
};
struct HandlerTxTimeout {};

using HandlerEvent =
    std::variant<HandlerCmdRouteConnection, HandlerCmdFlush, HandlerCmdRelease,
                 HandlerRxCrcxOk, HandlerRxCrcxFail, HandlerRxMdcxOk,
                 HandlerRxMdcxFail, HandlerRxDlcxOk, HandlerRxDlcxFail,
                 HandlerTxTimeout>;

const char* handler_event_name(const HandlerEvent& event);

// Cleanup deletes are fire-and-forget: their completions never re-enter the
// machine.
struct HandlerEmitCrcx {};
struct HandlerEmitMdcx {};
struct HandlerEmitDlcx {
  bool cleanup = false;
};
struct HandlerEmitRqnt {};
// Carries the connection to the named call-control state and fires the
// matching event.
struct HandlerSetJccState {
  JccConnState state = JccConnState::Idle;
};
struct HandlerFireMidCall {
  std::string cause;
};
struct HandlerAnswerSipLeg {
  std::optional<SdpSession> sdp;
};

using HandlerAction =
    std::variant<HandlerEmitCrcx, HandlerEmitMdcx, HandlerEmitDlcx,
                 HandlerEmitRqnt, HandlerSetJccState, HandlerFireMidCall,
                 HandlerAnswerSipLeg>;

struct HandlerStep {
  HandlerState state;
  std::vector<HandlerAction> actions;
  bool illegal = false;  // event not in the table; state untouched
};

HandlerStep handler_step(const HandlerState& state, const HandlerEvent& event);

}  // namespace jcall
