#pragma once

#include <map>
#include <string>
#include <string_view>

namespace jcall {

enum class JccConnState {
  Idle,
  CallDelivery,
  Alerting,
  Connected,
  Disconnected,
  Failed,
};

const char* to_string(JccConnState s);

inline bool jcc_state_terminal(JccConnState s) {
  return s == JccConnState::Disconnected || s == JccConnState::Failed;
}

// The reachable state graph. Anything outside it is a bug the monitor flags.
bool jcc_transition_allowed(JccConnState from, JccConnState to);

enum class JccEventKind {
  Created,
  CallDelivery,
  Alerting,
  Connected,
  Disconnected,
  Failed,
  MidCall,
};

const char* to_string(JccEventKind k);

JccEventKind event_for_state(JccConnState s);

inline constexpr const char* kCauseConnectionChanged = "CONNECTION_CHANGED";
inline constexpr const char* kCauseChangeFailed = "CONNECTION_CHANGE_FAILED";
inline constexpr const char* kCauseRequestResult = "REQUEST_RESULT";

struct JccEvent {
  JccEventKind kind = JccEventKind::Created;
  std::string call_id;
  std::string connection_id;
  std::string cause;
  std::map<std::string, std::string> payload;
};

enum class AddrScheme { Sip, Mgcp };

struct JccAddress {
  AddrScheme scheme = AddrScheme::Sip;
  std::string literal;  // "sip:alice@host" or "mgcp:10.0.0.2:2427"

  bool operator==(const JccAddress&) const = default;
  static JccAddress sip(std::string user_at_host);
  static JccAddress mgcp(std::string host_port);
  // Parses by prefix; anything without a known scheme prefix is rejected.
  static bool parse(std::string_view text, JccAddress& out);
  std::string without_scheme() const;
};

}  // namespace jcall
