#include "jcall/jcc/mgcp_agent.hpp"

#include <utility>

#include "jcall/util/log.hpp"

namespace jcall {

MgcpAgent::MgcpAgent(Engine& engine, Transport& transport, NetAddr local)
    : engine_(engine), transport_(transport), local_(std::move(local)) {
  transport_.bind(local_, this);
}

MgcpAgent::~MgcpAgent() {
  for (auto& [txid, rec] : txs_)
    if (rec.timer) engine_.cancel(*rec.timer);
  transport_.unbind(local_);
}

std::uint32_t MgcpAgent::send(MgcpCommand cmd, const NetAddr& dest,
                              Completion done) {
  std::uint32_t txid = next_txid_;
  next_txid_ = next_txid_ == kMgcpTxIdMax ? 1 : next_txid_ + 1;
  cmd.transaction_id = txid;
  TxRec rec;
  rec.state = make_mgcp_tx(cmd);
  rec.dest = dest;
  rec.done = std::move(done);
  txs_.emplace(txid, std::move(rec));
  step_tx(txid, MgcpTxSend{});
  return txid;
}

void MgcpAgent::respond(const MgcpResponse& rsp, const NetAddr& dest) {
  auto text = serialize_mgcp(rsp);
  if (!text.ok()) {
    logf(LogLevel::Error, "mgcp agent %s: unserializable response dropped",
         local_.to_string().c_str());
    return;
  }
  transport_.send({local_, dest, text.take()});
}

void MgcpAgent::on_datagram(const Datagram& d) {
  auto parsed = parse_mgcp(d.payload);
  if (!parsed.ok()) {
    logf(LogLevel::Warn, "mgcp agent %s: undecodable datagram from %s dropped",
         local_.to_string().c_str(), d.from.to_string().c_str());
    return;
  }
  MgcpMessage msg = parsed.take();
  if (const auto* rsp = std::get_if<MgcpResponse>(&msg)) {
    auto it = txs_.find(rsp->transaction_id);
    if (it == txs_.end()) {
      logf(LogLevel::Debug, "mgcp agent %s: response for finished tx %u",
           local_.to_string().c_str(), rsp->transaction_id);
      return;
    }
    step_tx(it->first, MgcpTxRxResponse{*rsp});
    return;
  }
  const auto& cmd = std::get<MgcpCommand>(msg);
  if (command_handler_) {
    command_handler_(cmd, d.from);
    return;
  }
  MgcpResponse rsp;
  rsp.code = 510;
  rsp.transaction_id = cmd.transaction_id;
  rsp.comment = "unexpected command";
  respond(rsp, d.from);
}

void MgcpAgent::step_tx(std::uint32_t txid, const MgcpTxEvent& event) {
  auto it = txs_.find(txid);
  if (it == txs_.end()) return;
  TxRec& rec = it->second;
  MgcpTxStep result = mgcp_transaction_step(rec.state, event);
  if (result.illegal) return;
  rec.state = result.state;
  std::optional<std::pair<MgcpTxOutcome, MgcpResponse>> completion;
  for (const auto& action : result.actions) {
    if (const auto* e = std::get_if<MgcpTxEmit>(&action)) {
      emit(e->command, rec.dest);
    } else if (const auto* arm = std::get_if<MgcpTxArmTimer>(&action)) {
      if (rec.timer) engine_.cancel(*rec.timer);
      MgcpTimerKind kind = arm->kind;
      rec.timer = engine_.schedule_after(arm->delay, [this, txid, kind] {
        auto rit = txs_.find(txid);
        if (rit != txs_.end()) rit->second.timer.reset();
        if (kind == MgcpTimerKind::Retransmit)
          step_tx(txid, MgcpTxTimerRetransmit{});
        else
          step_tx(txid, MgcpTxTimerTimeout{});
      });
    } else if (const auto* n = std::get_if<MgcpTxNotify>(&action)) {
      completion = {n->outcome, n->response};
    }
  }
  if (completion) {
    Completion done = std::move(rec.done);
    if (rec.timer) engine_.cancel(*rec.timer);
    txs_.erase(it);
    if (done)
      done(completion->first,
           completion->first == MgcpTxOutcome::TxTimeout ? nullptr
                                                         : &completion->second);
  }
}

void MgcpAgent::emit(const MgcpCommand& cmd, const NetAddr& dest) {
  auto text = serialize_mgcp(cmd);
  if (!text.ok()) {
    logf(LogLevel::Error, "mgcp agent %s: unserializable %s dropped",
         local_.to_string().c_str(), to_string(cmd.verb));
    return;
  }
  transport_.send({local_, dest, text.take()});
}

}  // namespace jcall
