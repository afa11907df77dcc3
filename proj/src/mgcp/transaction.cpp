#include "jcall/mgcp/transaction.hpp"

#include "jcall/util/log.hpp"

namespace jcall {

const char* to_string(MgcpTxPhase phase) {
  switch (phase) {
    case MgcpTxPhase::Sent: return "Sent";
    case MgcpTxPhase::Completed: return "Completed";
    case MgcpTxPhase::TimedOut: return "TimedOut";
  }
  return "?";
}

const char* to_string(MgcpTxOutcome outcome) {
  switch (outcome) {
    case MgcpTxOutcome::Success: return "success";
    case MgcpTxOutcome::Failure: return "failure";
    case MgcpTxOutcome::TxTimeout: return "tx_timeout";
  }
  return "?";
}

MgcpTxState make_mgcp_tx(MgcpCommand command) {
  MgcpTxState state;
  state.command = std::move(command);
  return state;
}

MgcpTxStep mgcp_transaction_step(const MgcpTxState& state,
                                 const MgcpTxEvent& event,
                                 const MgcpTxConfig& config) {
  MgcpTxStep step{state, {}, false};

  if (std::holds_alternative<MgcpTxSend>(event)) {
    if (state.phase != MgcpTxPhase::Sent || state.current_interval != 0) {
      logf(LogLevel::Warn, "mgcp-tx %u: duplicate send ignored",
           state.command.transaction_id);
      step.illegal = true;
      return step;
    }
    step.state.current_interval = config.retransmit_base;
    step.actions.push_back(MgcpTxEmit{state.command});
    step.actions.push_back(
        MgcpTxArmTimer{MgcpTimerKind::Retransmit, config.retransmit_base});
    return step;
  }

  if (const auto* rx = std::get_if<MgcpTxRxResponse>(&event)) {
    if (rx->response.transaction_id != state.command.transaction_id) {
      logf(LogLevel::Warn, "mgcp-tx %u: response for %u ignored",
           state.command.transaction_id, rx->response.transaction_id);
      step.illegal = true;
      return step;
    }
    if (state.phase != MgcpTxPhase::Sent) return step;
    step.state.phase = MgcpTxPhase::Completed;
    step.actions.push_back(MgcpTxNotify{rx->response.ok()
                                            ? MgcpTxOutcome::Success
                                            : MgcpTxOutcome::Failure,
                                        rx->response});
    return step;
  }

  if (std::holds_alternative<MgcpTxTimerRetransmit>(event)) {
    if (state.phase != MgcpTxPhase::Sent || state.current_interval == 0 ||
        state.retransmit_count >= config.max_retransmits)
      return step;
    step.state.retransmit_count += 1;
    step.state.current_interval *= 2;
    step.actions.push_back(MgcpTxEmit{state.command});
    MgcpTimerKind kind =
        step.state.retransmit_count >= config.max_retransmits
            ? MgcpTimerKind::Timeout
            : MgcpTimerKind::Retransmit;
    step.actions.push_back(MgcpTxArmTimer{kind, step.state.current_interval});
    return step;
  }

  // MgcpTxTimerTimeout
  if (state.phase != MgcpTxPhase::Sent) return step;
  step.state.phase = MgcpTxPhase::TimedOut;
  step.actions.push_back(MgcpTxNotify{MgcpTxOutcome::TxTimeout, {}});
  return step;
}

}  // namespace jcall
