#include "jcall/jcc/types.hpp"

namespace jcall {

const char* to_string(JccConnState s) {
  switch (s) {
    case JccConnState::Idle: return "IDLE";
    case JccConnState::CallDelivery: return "CALL_DELIVERY";
    case JccConnState::Alerting: return "ALERTING";
    case JccConnState::Connected: return "CONNECTED";
    case JccConnState::Disconnected: return "DISCONNECTED";
    case JccConnState::Failed: return "FAILED";
  }
  return "?";
}

bool jcc_transition_allowed(JccConnState from, JccConnState to) {
  using S = JccConnState;
  switch (from) {
    case S::Idle:
      return to == S::CallDelivery || to == S::Failed;
    case S::CallDelivery:
      return to == S::Alerting || to == S::Connected || to == S::Failed;
    case S::Alerting:
      return to == S::Connected || to == S::Failed || to == S::Disconnected;
    case S::Connected:
      return to == S::Disconnected || to == S::Failed;
    case S::Disconnected:
    case S::Failed:
      return false;
  }
  return false;
}

const char* to_string(JccEventKind k) {
  switch (k) {
    case JccEventKind::Created: return "CONNECTION_CREATED";
    case JccEventKind::CallDelivery: return "CONNECTION_CALL_DELIVERY";
    case JccEventKind::Alerting: return "CONNECTION_ALERTING";
    case JccEventKind::Connected: return "CONNECTION_CONNECTED";
    case JccEventKind::Disconnected: return "CONNECTION_DISCONNECTED";
    case JccEventKind::Failed: return "CONNECTION_FAILED";
    case JccEventKind::MidCall: return "CONNECTION_MID_CALL";
  }
  return "?";
}

JccEventKind event_for_state(JccConnState s) {
  switch (s) {
    case JccConnState::Idle: return JccEventKind::Created;
    case JccConnState::CallDelivery: return JccEventKind::CallDelivery;
    case JccConnState::Alerting: return JccEventKind::Alerting;
    case JccConnState::Connected: return JccEventKind::Connected;
    case JccConnState::Disconnected: return JccEventKind::Disconnected;
    case JccConnState::Failed: return JccEventKind::Failed;
  }
  return JccEventKind::Created;
}

JccAddress JccAddress::sip(std::string user_at_host) {
  return {AddrScheme::Sip, "sip:" + std::move(user_at_host)};
}

JccAddress JccAddress::mgcp(std::string host_port) {
  return {AddrScheme::Mgcp, "mgcp:" + std::move(host_port)};
}

bool JccAddress::parse(std::string_view text, JccAddress& out) {
  if (text.substr(0, 4) == "sip:") {
    out = {AddrScheme::Sip, std::string(text)};
    return true;
  }
  if (text.substr(0, 5) == "mgcp:") {
    out = {AddrScheme::Mgcp, std::string(text)};
    return true;
  }
  return false;
}

std::string JccAddress::without_scheme() const {
  std::size_t colon = literal.find(':');
  return colon == std::string::npos ? literal : literal.substr(colon + 1);
}

}  // namespace jcall
