#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jcall/jcc/provider.hpp"
#include "jcall/net/clock.hpp"
#include "jcall/net/transport.hpp"
#include "jcall/pcs/store.hpp"

namespace jcall {

// Full walks the caller through card, PIN, and callee collection; None plays
// the greeting only and authenticates from the caller's own address, which is
// the shape load runs use.
enum class CollectionMode { Full, None };

struct PcsConfig {
  std::vector<NetAddr> media_servers{{"ms1", 2427}};
  Micros billing_period = seconds(10);
  CollectionMode collection = CollectionMode::Full;
  std::string callee_domain = "uas";
  std::string greeting_announcement = "welcome";
  std::string pin_announcement = "pin";
  std::string callee_announcement = "callee";
  std::string reject_announcement = "authfail";
  std::string endpoint_type = "ivr";
  int max_attempts = 3;
};

enum class PcsConfigError { Unreadable, Malformed };

Result<PcsConfig, PcsConfigError> parse_pcs_config(const std::string& text);
Result<PcsConfig, PcsConfigError> load_pcs_config(const std::string& path);

enum class PcsPhase {
  Greeting,
  CollectCard,
  CollectPin,
  CollectCallee,
  Validating,
  Bridging,
  InCall,
  Ending,
};

const char* to_string(PcsPhase phase);

/// Prepaid card calls: an IVR front end collects the card, PIN, and callee,
/// the store admits or rejects, and admitted calls are bridged and billed
/// until the credit runs dry. Telephony is reached through call-control
/// operations and events only.
class PcsService {
public:
  struct Stats {
    int offered = 0;
    int admitted = 0;
    int bridged = 0;
    int rejected_auth = 0;
    int rejected_credit = 0;
    int failed = 0;
    int abandoned = 0;
    int finished = 0;
    int expired = 0;
  };

  PcsService(JccProvider& provider, SubscriberStore& store, PcsConfig config = {});

  const Stats& stats() const { return stats_; }
  std::optional<PcsPhase> phase_of(const std::string& call_id) const;
  std::size_t open_calls() const { return calls_.size(); }

private:
  struct CallCtx {
    PcsPhase phase = PcsPhase::Greeting;
    JccCall* call = nullptr;
    JccConnection* caller = nullptr;
    JccConnection* ms = nullptr;
    JccConnection* callee = nullptr;
    std::string card;
    std::string pin;
    std::string collected_callee;
    std::string callee_uri;
    int attempts = 0;
    bool authenticated = false;
    bool reject_pending = false;
    ReleaseCause reject_cause = ReleaseCause::Forbidden;
    std::int64_t initial_credit = 0;
    std::int64_t remaining = 0;
    std::int64_t rate = 1;
    Micros bridged_at = 0;
    std::optional<Engine::TimerId> billing_timer;
  };

  void on_call_offered(JccCall& call, JccConnection& caller);
  void on_event(const JccEvent& ev);
  void on_connected(CallCtx& ctx, const JccEvent& ev);
  void on_disconnected(CallCtx& ctx, const JccEvent& ev);
  void on_failed(CallCtx& ctx, const JccEvent& ev);
  void on_midcall(CallCtx& ctx, const JccEvent& ev);
  void on_collection_result(CallCtx& ctx, const JccEvent& ev);

  void start_round(CallCtx& ctx, PcsPhase round);
  void validate(CallCtx& ctx);
  void play_reject(CallCtx& ctx, ReleaseCause cause);
  void deliver_reject(CallCtx& ctx);
  bool step_ok(CallCtx& ctx, Status<JccError> st);
  void bridge(CallCtx& ctx);
  void enter_call(CallCtx& ctx);
  void on_billing_tick(const std::string& call_id);
  void settle_on_hangup(CallCtx& ctx);
  void fail_call(CallCtx& ctx, ReleaseCause cause);
  void release_live(JccConnection* conn, ReleaseCause cause);
  void cancel_billing(CallCtx& ctx);
  void reap_if_settled(const std::string& call_id);

  JccProvider& provider_;
  SubscriberStore& store_;
  PcsConfig config_;
  Stats stats_;
  std::map<std::string, CallCtx> calls_;
  std::size_t next_ms_ = 0;
};

}  // namespace jcall
