#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "jcall/jcc/handler.hpp"
#include "jcall/jcc/ledger.hpp"
#include "jcall/jcc/mgcp_agent.hpp"
#include "jcall/jcc/sipleg.hpp"
#include "jcall/jcc/types.hpp"
#include "jcall/net/engine.hpp"
#include "jcall/net/transport.hpp"
#include "jcall/util/result.hpp"

namespace jcall {

enum class JccError {
  ProviderShutDown,
  NoSuchPeerConnection,
  PeerSdpMissing,
  InvalidTargetScheme,
  IllegalState,
  IllegalArgument,
  HandlerBusy,
  UnknownParameter,
  MalformedParam,
  TerminalConnection,
  EmptyLedger,
};

const char* to_string(JccError e);

enum class ConnFlavor { Sip, Mgcp };

// Why a connection is being let go. On an unanswered incoming leg this picks
// the rejection status; an established dialog gets a BYE either way.
enum class ReleaseCause { Normal, Forbidden, PaymentRequired, ServiceUnavailable };

int release_status(ReleaseCause cause);

class JccProvider;
class JccCall;

class JccConnection {
public:
  const std::string& id() const { return id_; }
  ConnFlavor flavor() const { return flavor_; }
  JccConnState jcc_state() const { return state_; }
  const JccAddress& address() const { return address_; }
  const std::string& cause() const { return cause_; }
  const std::optional<SdpSession>& peer_sdp() const { return peer_sdp_; }
  const std::optional<SdpSession>& local_sdp() const { return local_sdp_; }
  // Answering legs only: the URI the caller dialed.
  const std::string& invited_uri() const { return invited_uri_; }
  // Network-side correlation id: SIP dialog Call-ID or MGCP call token.
  const std::string& wire_token() const { return wire_token_; }
  JccCall& call() { return *call_; }

  Status<JccError> select_route(const std::string& param);
  Status<JccError> route_connection(bool flag);
  Status<JccError> attach_media();
  Status<JccError> release(ReleaseCause cause = ReleaseCause::Normal);

  const HandlerState& handler_state() const { return handler_; }

private:
  friend class JccProvider;
  friend class JccCall;

  JccConnection(JccProvider& provider, JccCall& call, std::string id,
                ConnFlavor flavor, JccAddress address);

  void set_state_fire(JccConnState next, std::string cause = {});
  void fire_midcall(const std::string& cause,
                    std::map<std::string, std::string> payload);
  void step_handler(const HandlerEvent& event);
  void apply_actions(const std::vector<HandlerAction>& actions,
                     const std::optional<std::string>& pre_connection_id);
  void send_crcx();
  void send_mdcx();
  void send_dlcx(const std::optional<std::string>& connection_id, bool cleanup);
  void send_rqnt();
  void on_ntfy(const MgcpCommand& ntfy);
  void commit_non_request_pending();
  std::string ms_endpoint_for_commands() const;

  JccProvider* provider_;
  JccCall* call_;
  std::string id_;
  ConnFlavor flavor_;
  JccAddress address_;
  JccConnState state_ = JccConnState::Idle;
  std::string cause_;
  std::optional<SdpSession> peer_sdp_;
  std::optional<SdpSession> local_sdp_;
  std::string invited_uri_;

  // SIP flavor
  std::unique_ptr<SipLeg> leg_;
  bool releasing_ = false;

  // MGCP flavor
  HandlerState handler_;
  ParameterLedger ledger_;
  ParamValues staged_request_;
  bool rqnt_outstanding_ = false;
  std::string outstanding_x_;
  NetAddr ms_addr_;
  JccConnection* peer_sip_ = nullptr;
  std::string wire_token_;
};

class JccCall {
public:
  enum class State { Idle, Active, Invalid };

  const std::string& id() const { return id_; }
  State state() const { return state_; }
  std::vector<JccConnection*> connections();

  Result<JccConnection*, JccError> create_connection(const std::string& target,
                                                     const std::string& peer);
  Status<JccError> route_call(const std::string& callee,
                              JccConnection& caller_conn);

  // Application touchpoints so far: counted API calls plus events actually
  // delivered through counted listeners.
  int interactions() const { return interactions_; }
  // Frozen the moment both SIP legs reach CONNECTED; total until then.
  int interactions_setup() const {
    return frozen_ ? setup_interactions_ : interactions_;
  }
  bool setup_complete() const { return frozen_; }

private:
  friend class JccProvider;
  friend class JccConnection;

  JccCall(JccProvider& provider, std::string id);

  void note_api() { ++interactions_; }
  void note_event() { ++interactions_; }
  void maybe_freeze();
  void refresh_state();

  JccProvider* provider_;
  std::string id_;
  State state_ = State::Idle;
  std::vector<std::unique_ptr<JccConnection>> conns_;
  int interactions_ = 0;
  int setup_interactions_ = 0;
  bool frozen_ = false;
};

struct JccProviderConfig {
  NetAddr sip_addr{"as", 5060};
  NetAddr mgcp_addr{"as", 2727};
  // URI host -> transport address, for hosts that are not bound literally.
  std::map<std::string, NetAddr> host_overrides;
};

/// The call-control platform: owns the SIP port and the MGCP call-agent port,
/// materializes incoming INVITEs as calls with an answering connection, and
/// delivers connection events to registered listeners.
class JccProvider : public PacketSink {
public:
  using ListenerFn = std::function<void(const JccEvent&)>;
  using CallOffered = std::function<void(JccCall&, JccConnection&)>;

  JccProvider(Engine& engine, Transport& transport, JccProviderConfig config);
  ~JccProvider() override;
  JccProvider(const JccProvider&) = delete;
  JccProvider& operator=(const JccProvider&) = delete;

  Result<JccCall*, JccError> create_call();

  // Invoked synchronously for each new incoming call, before any of its
  // events are delivered. Not part of the interaction count.
  void set_call_offered(CallOffered fn) { call_offered_ = std::move(fn); }

  // counted=true marks the application's own listener: events it receives
  // are charged to the owning call's interaction count.
  void add_listener(std::set<JccEventKind> filter, ListenerFn fn, bool counted);

  static std::set<JccEventKind> app_event_filter();
  static std::set<JccEventKind> all_event_kinds();

  void shutdown() { shutdown_ = true; }
  bool is_shut_down() const { return shutdown_; }

  JccCall* find_call(const std::string& id);
  const std::map<std::string, std::unique_ptr<JccCall>>& calls() const {
    return calls_;
  }
  Engine& engine() { return engine_; }

  void on_datagram(const Datagram& d) override;

private:
  friend class JccCall;
  friend class JccConnection;

  struct Listener {
    std::set<JccEventKind> filter;
    ListenerFn fn;
    bool counted = false;
  };

  JccCall* make_call();
  void fire_event(JccConnection& conn, JccEventKind kind, std::string cause,
                  std::map<std::string, std::string> payload);
  void accept_invite(const Datagram& d, SipMessage invite);
  void on_mgcp_command(const MgcpCommand& cmd, const NetAddr& from);
  void respond_statelessly(const Datagram& d, const SipMessage& req, int status);
  NetAddr resolve_sip_host(const std::string& uri) const;
  std::string fresh_tag() { return "t" + std::to_string(next_tag_++); }
  std::string fresh_x() { return std::to_string(next_x_++); }

  Engine& engine_;
  Transport& transport_;
  JccProviderConfig config_;
  MgcpAgent agent_;
  CallOffered call_offered_;
  std::vector<Listener> listeners_;
  std::map<std::string, std::unique_ptr<JccCall>> calls_;
  std::map<std::string, JccConnection*> sip_dialogs_;
  std::map<std::string, JccConnection*> x_watch_;
  // Notify dedupe keyed by "<source>/<txid>": replays draw the cached ack.
  std::map<std::string, MgcpResponse> ntfy_acked_;
  std::deque<std::string> ntfy_acked_order_;
  std::uint64_t next_call_ = 1;
  std::uint64_t next_conn_ = 1;
  std::uint64_t next_tag_ = 1;
  std::uint64_t next_x_ = 1;
  bool shutdown_ = false;
};

std::string sip_uri_user(const std::string& uri);
std::string sip_uri_host_port(const std::string& uri);

}  // namespace jcall
