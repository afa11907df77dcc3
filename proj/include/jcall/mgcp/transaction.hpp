#pragma once

#include <variant>
#include <vector>

#include "jcall/mgcp/message.hpp"
#include "jcall/net/clock.hpp"

namespace jcall {

enum class MgcpTxPhase { Sent, Completed, TimedOut };

const char* to_string(MgcpTxPhase phase);

struct MgcpTxConfig {
  Micros retransmit_base = millis(200);
  int max_retransmits = 4;
};

struct MgcpTxState {
  MgcpTxPhase phase = MgcpTxPhase::Sent;
  int retransmit_count = 0;
  Micros current_interval = 0;
  MgcpCommand command;
};

struct MgcpTxSend {};
struct MgcpTxRxResponse {
  MgcpResponse response;
};
struct MgcpTxTimerRetransmit {};
struct MgcpTxTimerTimeout {};
using MgcpTxEvent = std::variant<MgcpTxSend, MgcpTxRxResponse,
                                 MgcpTxTimerRetransmit, MgcpTxTimerTimeout>;

enum class MgcpTxOutcome { Success, Failure, TxTimeout };

const char* to_string(MgcpTxOutcome outcome);

enum class MgcpTimerKind { Retransmit, Timeout };

struct MgcpTxEmit {
  MgcpCommand command;
};
struct MgcpTxArmTimer {
  MgcpTimerKind kind = MgcpTimerKind::Retransmit;
  Micros delay = 0;
};
struct MgcpTxNotify {
  MgcpTxOutcome outcome = MgcpTxOutcome::Success;
  MgcpResponse response;
};
using MgcpTxAction = std::variant<MgcpTxEmit, MgcpTxArmTimer, MgcpTxNotify>;

struct MgcpTxStep {
  MgcpTxState state;
  std::vector<MgcpTxAction> actions;
  bool illegal = false;
};

MgcpTxState make_mgcp_tx(MgcpCommand command);

// Exactly-once completion: whatever duplicates or stale timers arrive, a
// transaction emits a single notify across its lifetime.
MgcpTxStep mgcp_transaction_step(const MgcpTxState& state,
                                 const MgcpTxEvent& event,
                                 const MgcpTxConfig& config = {});

}  // namespace jcall
