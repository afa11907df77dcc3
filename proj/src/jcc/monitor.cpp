#include "jcall/jcc/monitor.hpp"

namespace jcall {

void JccFsmMonitor::attach(JccProvider& provider) {
  provider.add_listener(
      JccProvider::all_event_kinds(),
      [this](const JccEvent& ev) { observe(ev); },
      /*counted=*/false);
}

void JccFsmMonitor::flag(const JccEvent& ev, std::string what) {
  violations_.push_back(ev.connection_id + ": " + std::move(what));
}

void JccFsmMonitor::observe(const JccEvent& ev) {
  ++events_seen_;
  auto& track = conns_[ev.connection_id];

  if (ev.kind == JccEventKind::Created) {
    if (track.created) flag(ev, "created twice");
    track.created = true;
    track.state = JccConnState::Idle;
    return;
  }
  if (!track.created) flag(ev, "event before creation");
  if (track.terminal) {
    flag(ev, std::string("event after terminal state: ") + to_string(ev.kind));
    return;
  }
  if (ev.kind == JccEventKind::MidCall) {
    if (track.state != JccConnState::Connected)
      flag(ev, std::string("mid-call event in ") + to_string(track.state));
    return;
  }

  JccConnState next;
  switch (ev.kind) {
    case JccEventKind::CallDelivery:
      next = JccConnState::CallDelivery;
      break;
    case JccEventKind::Alerting:
      next = JccConnState::Alerting;
      break;
    case JccEventKind::Connected:
      next = JccConnState::Connected;
      break;
    case JccEventKind::Disconnected:
      next = JccConnState::Disconnected;
      break;
    case JccEventKind::Failed:
      next = JccConnState::Failed;
      break;
    default:
      return;
  }
  if (!jcc_transition_allowed(track.state, next)) {
    flag(ev, std::string("illegal transition ") + to_string(track.state) +
                 " -> " + to_string(next));
  }
  track.state = next;
  if (jcc_state_terminal(next)) track.terminal = true;
}

}  // namespace jcall
