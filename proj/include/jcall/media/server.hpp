#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "jcall/jcc/mgcp_agent.hpp"
#include "jcall/media/digitmap.hpp"
#include "jcall/net/engine.hpp"
#include "jcall/net/transport.hpp"
#include "jcall/sip/sdp.hpp"

namespace jcall {

enum class MsEndpointType { Announcement, Ivr, PacketRelayAnnouncement, PacketRelayIvr };

const char* to_string(MsEndpointType type);
std::optional<MsEndpointType> ms_endpoint_type_from_prefix(std::string_view prefix);
bool ms_endpoint_collects_digits(MsEndpointType type);

struct MediaServerConfig {
  NetAddr addr{"ms1", 2427};
  // Artificial processing delay applied to every inbound command; nonzero
  // values model an overloaded server and exercise the caller's retransmits.
  Micros service_delay = 0;
  Micros inter_digit_timeout = seconds(4);
  Micros default_announcement_length = seconds(2);
  // Named announcement lengths; names not listed fall back to the default.
  std::map<std::string, Micros> announcements;
  // Per-type endpoint pool size; zero means unbounded.
  int endpoints_per_type = 0;
};

/// Simulated media server: endpoints with RTP-less connections, announcement
/// playback, and DTMF collection against a digit map. Commands arrive on the
/// MGCP port; digits are injected in-process, addressed by the port the
/// connection advertised in its SDP.
class MediaServer {
public:
  struct Connection {
    std::string id;
    std::string call_token;
    std::string mode;
    int sdp_port = 0;
    std::optional<SdpSession> remote_sdp;
  };

  struct ActiveRequest {
    std::string x;
    NetAddr notify_dest;
    std::string call_token;
    bool collecting = false;
    DigitMap map;
    std::string collected;
    bool announcement = false;
    std::optional<Engine::TimerId> digit_timer;
    std::optional<Engine::TimerId> announcement_timer;
  };

  struct Endpoint {
    std::string id;
    MsEndpointType type = MsEndpointType::Ivr;
    int index = 0;
    std::map<std::string, Connection> connections;
    std::optional<ActiveRequest> request;
  };

  MediaServer(Engine& engine, Transport& transport, MediaServerConfig config);
  MediaServer(const MediaServer&) = delete;
  MediaServer& operator=(const MediaServer&) = delete;

  // Feeds one DTMF digit to whichever endpoint owns the connection that
  // advertised this SDP port. Digits with no collection underway are dropped.
  void inject_dtmf(int sdp_port, char digit);

  void set_service_delay(Micros delay) { config_.service_delay = delay; }
  // The next `count` commands of this verb draw the given failure code
  // instead of being processed.
  void arm_fault(MgcpVerb verb, int code, int count = 1);

  const NetAddr& addr() const { return agent_.local_addr(); }
  const Endpoint* endpoint(const std::string& id) const;
  int connection_count() const;
  int busy_endpoint_count() const;
  int peak_connections() const { return peak_connections_; }
  int dropped_digits() const { return dropped_digits_; }

private:
  struct EndpointName {
    std::string prefix;
    bool wildcard = false;
    int index = 0;
    std::string host;
  };

  static std::optional<EndpointName> parse_endpoint_name(std::string_view id);

  void on_command(const MgcpCommand& cmd, const NetAddr& from);
  void process(const MgcpCommand& cmd, const NetAddr& from, const std::string& key);
  MgcpResponse dispatch(const MgcpCommand& cmd, const NetAddr& from);
  MgcpResponse handle_crcx(const MgcpCommand& cmd, const EndpointName& name);
  MgcpResponse handle_mdcx(const MgcpCommand& cmd, Endpoint& ep);
  MgcpResponse handle_dlcx(const MgcpCommand& cmd, Endpoint& ep);
  MgcpResponse handle_rqnt(const MgcpCommand& cmd, Endpoint& ep, const NetAddr& from);

  Endpoint* allocate_endpoint(const EndpointName& name);
  void release_connection(Endpoint& ep, const std::string& conn_id);
  void clear_request(Endpoint& ep);
  void finish_request(Endpoint& ep, const std::string& observed);
  void on_digit_timer(const std::string& endpoint_id, const std::string& x);
  void on_announcement_done(const std::string& endpoint_id, const std::string& x);

  Engine& engine_;
  MediaServerConfig config_;
  MgcpAgent agent_;
  std::map<std::string, Endpoint> endpoints_;
  struct PortRef {
    std::string endpoint_id;
    std::string conn_id;
  };
  std::map<int, PortRef> ports_;
  std::map<std::string, MgcpResponse> answered_;
  std::deque<std::string> answered_order_;
  std::set<std::string> in_flight_;
  std::map<MgcpVerb, std::pair<int, int>> faults_;
  std::uint64_t next_conn_ = 1;
  int next_port_ = 4000;
  int dropped_digits_ = 0;
  int peak_connections_ = 0;
};

// Parses "ann(name)" or "ann(name,3s)" and resolves the play length from the
// explicit value, the catalog, or the fallback. Returns the announcement name.
std::optional<std::string> ms_parse_announcement_signal(std::string_view signal,
                                                        Micros* length,
                                                        Micros fallback,
                                                        const std::map<std::string, Micros>& catalog);

}  // namespace jcall
