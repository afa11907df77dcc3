#pragma once

#include <map>
#include <string>
#include <vector>

#include "jcall/jcc/provider.hpp"
#include "jcall/jcc/types.hpp"

namespace jcall {

/// Watches every connection event and records anything that leaves the
/// reachable state graph: transitions outside the allowed set, events after
/// a terminal state, mid-call events outside CONNECTED, and connections
/// whose creation event never fired. Attach once, read violations() at the
/// end of a run.
class JccFsmMonitor {
public:
  void attach(JccProvider& provider);
  void observe(const JccEvent& ev);

  const std::vector<std::string>& violations() const { return violations_; }
  bool clean() const { return violations_.empty(); }
  int events_seen() const { return events_seen_; }

private:
  struct ConnTrack {
    bool created = false;
    bool terminal = false;
    JccConnState state = JccConnState::Idle;
  };

  void flag(const JccEvent& ev, std::string what);

  std::map<std::string, ConnTrack> conns_;
  std::vector<std::string> violations_;
  int events_seen_ = 0;
};

}  // namespace jcall
