#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "jcall/net/engine.hpp"
#include "jcall/net/transport.hpp"
#include "jcall/sip/message.hpp"
#include "jcall/sip/sdp.hpp"
#include "jcall/sip/transaction.hpp"

namespace jcall {

/// One side of one SIP dialog: the answering side of a received INVITE or the
/// calling side of an outgoing one. Owns the transaction machines and their
/// timers; the connection layer sees dialog-level callbacks only.
class SipLeg {
public:
  struct Hooks {
    std::function<void()> on_ack;         // answering side: handshake complete
    std::function<void()> on_remote_bye;  // peer tore the dialog down
    std::function<void(int, const std::optional<SdpSession>&)> on_provisional;
    std::function<void(const std::optional<SdpSession>&)> on_answered;
    std::function<void(int)> on_rejected;  // calling side: non-2xx final
    std::function<void()> on_invite_timeout;
    std::function<void()> on_bye_done;
  };

  // Answering side; sends 100 for the INVITE before the constructor returns.
  SipLeg(Engine& engine, Transport& transport, NetAddr local,
         const Datagram& dgram, SipMessage invite, std::string local_tag,
         Hooks hooks);

  // Calling side; quiet until send_invite().
  SipLeg(Engine& engine, Transport& transport, NetAddr local, NetAddr remote,
         std::string call_id, std::string from_uri, std::string to_uri,
         std::string local_tag, Hooks hooks);

  ~SipLeg();
  SipLeg(const SipLeg&) = delete;
  SipLeg& operator=(const SipLeg&) = delete;

  void send_invite(const std::optional<SdpSession>& offer);
  void respond(int status, const std::optional<SdpSession>& sdp);
  void send_bye();
  // Calling side: forget the dialog. A late 200 is still ACKed and then
  // immediately torn down with BYE; everything else is swallowed.
  void abandon();

  // In-dialog traffic demultiplexed by the owner on Call-ID.
  void handle(const SipMessage& msg);

  const std::string& call_id() const { return call_id_; }
  bool answering() const { return answering_; }
  bool answered_final() const { return final_sent_; }
  bool early_media_sent() const { return early_media_sent_; }
  const std::optional<SdpSession>& remote_sdp() const { return remote_sdp_; }

private:
  struct Runner {
    SipLeg* leg = nullptr;
    bool active = false;
    SipTxState state;
    std::optional<Engine::TimerId> timer;
    std::function<void(const SipTxNotify&)> notify;

    void start(SipTxState initial, std::function<void(const SipTxNotify&)> fn);
    void step(const SipTxEvent& event);
    void disarm();
  };

  void send_msg(const SipMessage& msg);
  void handle_request(const SipMessage& msg);
  void handle_response(const SipMessage& msg);
  void on_invite_notify(const SipTxNotify& n);
  void on_bye_notify(const SipTxNotify& n);
  std::string local_identity() const;
  std::string remote_identity() const;

  Engine& engine_;
  Transport& transport_;
  NetAddr local_;
  NetAddr remote_;
  bool answering_ = false;
  std::string call_id_;
  std::string local_tag_;
  std::string remote_tag_;
  std::string from_uri_;  // calling side
  std::string to_uri_;    // calling side
  SipMessage invite_;
  Hooks hooks_;

  Runner invite_tx_;
  Runner bye_tx_;
  std::uint32_t local_cseq_ = 1;
  bool final_sent_ = false;
  bool early_media_sent_ = false;
  bool abandoned_ = false;
  bool ack_seen_ = false;
  bool remote_bye_seen_ = false;
  bool bye_sent_ = false;
  std::optional<SipMessage> stored_ack_;
  std::optional<SdpSession> remote_sdp_;
  std::map<std::uint32_t, std::string> replayable_;  // answered non-INVITEs
};

std::optional<SdpSession> sip_body_sdp(const SipMessage& msg);
void set_sip_body_sdp(SipMessage& msg, const SdpSession& sdp);
// The bare URI inside a From/To value: angle brackets and parameters removed.
std::string sip_header_uri(const std::string& header_value);

}  // namespace jcall
