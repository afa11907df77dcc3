#pragma once

#include <variant>
#include <vector>

#include "jcall/net/clock.hpp"
#include "jcall/sip/message.hpp"
#include "jcall/util/result.hpp"

namespace jcall {

enum class SipTxRole { Client, Server };

enum class SipTxPhase { Calling, Proceeding, Completed, Terminated };

const char* to_string(SipTxRole role);
const char* to_string(SipTxPhase phase);

struct SipTxConfig {
  Micros retransmit_base = millis(500);
  int max_retransmits = 6;
};

// Calling: request sent (client) or received, no response yet (server).
// Proceeding: provisional exchanged. Completed: final exchanged but the
// transaction still absorbs duplicates (client: re-ACKs a non-2xx final;
// server: re-emits the final until ACK). Terminated: absorbing.
struct SipTxState {
  SipTxRole role = SipTxRole::Client;
  SipTxPhase phase = SipTxPhase::Calling;
  int retransmit_count = 0;
  Micros current_interval = 0;
  SipMessage request;        // the request this transaction carries
  SipMessage last_response;  // server: last response sent; client: last final
  bool response_sent = false;
};

struct SipTxSend {
  SipMessage message;
};
struct SipTxRx {
  SipMessage message;
};
struct SipTxTimerRetransmit {};
struct SipTxTimerTimeout {};
using SipTxEvent =
    std::variant<SipTxSend, SipTxRx, SipTxTimerRetransmit, SipTxTimerTimeout>;

enum class SipTxOutcome { Provisional, Success, Failure, TimedOut, Ack };

const char* to_string(SipTxOutcome outcome);

enum class SipTimerKind { Retransmit, Timeout };

struct SipTxEmit {
  SipMessage message;
};
struct SipTxArmTimer {
  SipTimerKind kind = SipTimerKind::Retransmit;
  Micros delay = 0;
};
struct SipTxNotify {
  SipTxOutcome outcome = SipTxOutcome::Provisional;
  int status = 0;
  SipMessage message;
};
using SipTxAction = std::variant<SipTxEmit, SipTxArmTimer, SipTxNotify>;

struct SipTxStep {
  SipTxState state;
  std::vector<SipTxAction> actions;
  bool illegal = false;  // event not legal for (role, phase); state unchanged
};

// Client transactions are fed their own request via SipTxSend; server
// transactions are fed the incoming request via SipTxRx and their responses
// via SipTxSend. Timer events come back from whoever armed the timers.
SipTxState make_client_tx(SipMessage request);
SipTxState make_server_tx(SipMessage request);

SipTxStep sip_transaction_step(const SipTxState& state, const SipTxEvent& event,
                               const SipTxConfig& config = {});

// ACK for a received final response, addressed like the original request.
SipMessage build_ack(const SipMessage& request, const SipMessage& response);

}  // namespace jcall
