#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>

#include "jcall/mgcp/message.hpp"
#include "jcall/mgcp/transaction.hpp"
#include "jcall/net/engine.hpp"
#include "jcall/net/transport.hpp"

namespace jcall {

/// Owns one MGCP port: runs retransmitting client transactions for outgoing
/// commands and hands incoming commands to a pluggable handler. Used by the
/// call-agent side for CRCX/MDCX/DLCX/RQNT (receiving NTFY) and by the media
/// server for NTFY (receiving everything else).
class MgcpAgent : public PacketSink {
public:
  using Completion = std::function<void(MgcpTxOutcome, const MgcpResponse*)>;
  using CommandHandler = std::function<void(const MgcpCommand&, const NetAddr&)>;

  MgcpAgent(Engine& engine, Transport& transport, NetAddr local);
  ~MgcpAgent() override;
  MgcpAgent(const MgcpAgent&) = delete;
  MgcpAgent& operator=(const MgcpAgent&) = delete;

  // Assigns the transaction id, emits, and retransmits until completion.
  std::uint32_t send(MgcpCommand cmd, const NetAddr& dest, Completion done);

  void respond(const MgcpResponse& rsp, const NetAddr& dest);

  // Incoming commands land here; without a handler they draw a 510.
  void set_command_handler(CommandHandler handler) {
    command_handler_ = std::move(handler);
  }

  const NetAddr& local_addr() const { return local_; }

  void on_datagram(const Datagram& d) override;

private:
  struct TxRec {
    MgcpTxState state;
    NetAddr dest;
    Completion done;
    std::optional<Engine::TimerId> timer;
  };

  void step_tx(std::uint32_t txid, const MgcpTxEvent& event);
  void emit(const MgcpCommand& cmd, const NetAddr& dest);

  Engine& engine_;
  Transport& transport_;
  NetAddr local_;
  CommandHandler command_handler_;
  std::map<std::uint32_t, TxRec> txs_;
  std::uint32_t next_txid_ = 1;
};

}  // namespace jcall
