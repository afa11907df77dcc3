#include "jcall/pcs/service.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "jcall/util/log.hpp"

namespace jcall {

const char* to_string(PcsPhase phase) {
  switch (phase) {
    case PcsPhase::Greeting: return "Greeting";
    case PcsPhase::CollectCard: return "CollectCard";
    case PcsPhase::CollectPin: return "CollectPin";
    case PcsPhase::CollectCallee: return "CollectCallee";
    case PcsPhase::Validating: return "Validating";
    case PcsPhase::Bridging: return "Bridging";
    case PcsPhase::InCall: return "InCall";
    case PcsPhase::Ending: return "Ending";
  }
  return "?";
}

Result<PcsConfig, PcsConfigError> parse_pcs_config(const std::string& text) {
  nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    return make_err(PcsConfigError::Malformed, "expected a JSON object");
  }
  PcsConfig cfg;
  if (doc.contains("media_servers")) {
    if (!doc["media_servers"].is_array() || doc["media_servers"].empty()) {
      return make_err(PcsConfigError::Malformed, "media_servers must be a non-empty array");
    }
    cfg.media_servers.clear();
    for (const auto& item : doc["media_servers"]) {
      if (!item.is_string()) return make_err(PcsConfigError::Malformed, "media server entry");
      auto addr = NetAddr::parse(item.get<std::string>());
      if (!addr) return make_err(PcsConfigError::Malformed, item.get<std::string>());
      cfg.media_servers.push_back(*addr);
    }
  }
  if (doc.contains("billing_period_seconds")) {
    if (!doc["billing_period_seconds"].is_number_integer() ||
        doc["billing_period_seconds"].get<std::int64_t>() < 1) {
      return make_err(PcsConfigError::Malformed, "billing_period_seconds");
    }
    cfg.billing_period = seconds(doc["billing_period_seconds"].get<std::int64_t>());
  }
  if (doc.contains("collection")) {
    std::string mode = doc["collection"].is_string() ? doc["collection"].get<std::string>() : "";
    if (mode == "full") {
      cfg.collection = CollectionMode::Full;
    } else if (mode == "none") {
      cfg.collection = CollectionMode::None;
    } else {
      return make_err(PcsConfigError::Malformed, "collection must be full or none");
    }
  }
  if (doc.contains("callee_domain")) {
    if (!doc["callee_domain"].is_string()) return make_err(PcsConfigError::Malformed, "callee_domain");
    cfg.callee_domain = doc["callee_domain"].get<std::string>();
  }
  if (doc.contains("announcements")) {
    const auto& ann = doc["announcements"];
    if (!ann.is_object()) return make_err(PcsConfigError::Malformed, "announcements");
    auto pick = [&](const char* key, std::string* slot) -> bool {
      if (!ann.contains(key)) return true;
      if (!ann[key].is_string()) return false;
      *slot = ann[key].get<std::string>();
      return true;
    };
    if (!pick("greeting", &cfg.greeting_announcement) || !pick("pin", &cfg.pin_announcement) ||
        !pick("callee", &cfg.callee_announcement) || !pick("reject", &cfg.reject_announcement)) {
      return make_err(PcsConfigError::Malformed, "announcements");
    }
  }
  if (doc.contains("max_attempts")) {
    if (!doc["max_attempts"].is_number_integer() || doc["max_attempts"].get<int>() < 1) {
      return make_err(PcsConfigError::Malformed, "max_attempts");
    }
    cfg.max_attempts = doc["max_attempts"].get<int>();
  }
  return cfg;
}

Result<PcsConfig, PcsConfigError> load_pcs_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) return make_err(PcsConfigError::Unreadable, path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_pcs_config(buf.str());
}

PcsService::PcsService(JccProvider& provider, SubscriberStore& store, PcsConfig config)
    : provider_(provider), store_(store), config_(std::move(config)) {
  provider_.set_call_offered(
      [this](JccCall& call, JccConnection& caller) { on_call_offered(call, caller); });
  provider_.add_listener(JccProvider::app_event_filter(),
                         [this](const JccEvent& ev) { on_event(ev); }, true);
}

std::optional<PcsPhase> PcsService::phase_of(const std::string& call_id) const {
  auto it = calls_.find(call_id);
  if (it == calls_.end()) return std::nullopt;
  return it->second.phase;
}

void PcsService::on_call_offered(JccCall& call, JccConnection& caller) {
  ++stats_.offered;
  const std::string hint = sip_uri_user(caller.address().literal);
  if (const SubscriberProfile* known = store_.find(hint);
      known && known->credit_seconds <= 0) {
    // The store already knows this caller is out of credit, so the call is
    // refused before any media work starts.
    ++stats_.rejected_credit;
    logf(LogLevel::Info, "call %s: refused up front, no credit on %s", call.id().c_str(),
         hint.c_str());
    release_live(&caller, ReleaseCause::PaymentRequired);
    return;
  }

  const NetAddr& ms = config_.media_servers[next_ms_++ % config_.media_servers.size()];
  auto created = call.create_connection("mgcp:" + ms.to_string(), caller.address().literal);
  if (!created.ok()) {
    ++stats_.failed;
    release_live(&caller, ReleaseCause::ServiceUnavailable);
    return;
  }
  CallCtx ctx;
  ctx.call = &call;
  ctx.caller = &caller;
  ctx.ms = created.value();
  CallCtx& live = calls_.emplace(call.id(), std::move(ctx)).first->second;
  if (!step_ok(live, live.ms->select_route("endpointType=" + config_.endpoint_type))) return;
  step_ok(live, live.ms->route_connection(false));
}

void PcsService::on_event(const JccEvent& ev) {
  auto it = calls_.find(ev.call_id);
  if (it == calls_.end()) return;
  CallCtx& ctx = it->second;
  switch (ev.kind) {
    case JccEventKind::Connected: on_connected(ctx, ev); break;
    case JccEventKind::Disconnected: on_disconnected(ctx, ev); break;
    case JccEventKind::Failed: on_failed(ctx, ev); break;
    case JccEventKind::MidCall: on_midcall(ctx, ev); break;
    default: break;
  }
  reap_if_settled(ev.call_id);
}

void PcsService::on_connected(CallCtx& ctx, const JccEvent& ev) {
  if (ctx.ms && ev.connection_id == ctx.ms->id()) {
    start_round(ctx, config_.collection == CollectionMode::Full ? PcsPhase::CollectCard
                                                                : PcsPhase::Greeting);
    return;
  }
  if (ctx.phase == PcsPhase::Bridging && ctx.caller && ctx.callee &&
      ctx.caller->jcc_state() == JccConnState::Connected &&
      ctx.callee->jcc_state() == JccConnState::Connected) {
    enter_call(ctx);
  }
}

void PcsService::on_disconnected(CallCtx& ctx, const JccEvent& ev) {
  if (ctx.ms && ev.connection_id == ctx.ms->id()) {
    if (ctx.phase == PcsPhase::Validating && ctx.authenticated) {
      bridge(ctx);
    } else if (ctx.phase != PcsPhase::Ending) {
      fail_call(ctx, ReleaseCause::ServiceUnavailable);
    }
    return;
  }
  if (ctx.phase == PcsPhase::InCall) {
    settle_on_hangup(ctx);
    ++stats_.finished;
    ctx.phase = PcsPhase::Ending;
    JccConnection* other =
        (ctx.caller && ev.connection_id == ctx.caller->id()) ? ctx.callee : ctx.caller;
    release_live(other, ReleaseCause::Normal);
    return;
  }
  if (ctx.phase != PcsPhase::Ending && ctx.caller && ev.connection_id == ctx.caller->id()) {
    // The caller walked away mid-dialogue.
    ++stats_.abandoned;
    ctx.phase = PcsPhase::Ending;
    release_live(ctx.ms, ReleaseCause::Normal);
    release_live(ctx.callee, ReleaseCause::Normal);
    return;
  }
  if (ctx.phase != PcsPhase::Ending) fail_call(ctx, ReleaseCause::ServiceUnavailable);
}

void PcsService::on_failed(CallCtx& ctx, const JccEvent& ev) {
  (void)ev;
  if (ctx.phase == PcsPhase::Ending) return;
  fail_call(ctx, ReleaseCause::ServiceUnavailable);
}

void PcsService::on_midcall(CallCtx& ctx, const JccEvent& ev) {
  if (!ctx.ms || ev.connection_id != ctx.ms->id()) return;
  if (ev.cause == kCauseChangeFailed) {
    fail_call(ctx, ReleaseCause::ServiceUnavailable);
    return;
  }
  if (ev.cause != kCauseRequestResult) return;

  bool success = false;
  if (auto it = ev.payload.find("success"); it != ev.payload.end()) {
    success = it->second == "true";
  }
  switch (ctx.phase) {
    case PcsPhase::Greeting:
      if (success) {
        validate(ctx);
      } else {
        fail_call(ctx, ReleaseCause::ServiceUnavailable);
      }
      return;
    case PcsPhase::CollectCard:
    case PcsPhase::CollectPin:
    case PcsPhase::CollectCallee:
      on_collection_result(ctx, ev);
      return;
    case PcsPhase::Ending:
      if (ctx.reject_pending) deliver_reject(ctx);
      return;
    default:
      return;
  }
}

void PcsService::on_collection_result(CallCtx& ctx, const JccEvent& ev) {
  bool success = false;
  if (auto it = ev.payload.find("success"); it != ev.payload.end()) {
    success = it->second == "true";
  }
  std::string digits;
  if (auto it = ev.payload.find("digits"); it != ev.payload.end()) digits = it->second;
  if (!digits.empty() && digits.back() == '#') digits.pop_back();

  if (success && !digits.empty()) {
    ctx.attempts = 0;
    switch (ctx.phase) {
      case PcsPhase::CollectCard:
        ctx.card = digits;
        start_round(ctx, PcsPhase::CollectPin);
        return;
      case PcsPhase::CollectPin:
        ctx.pin = digits;
        start_round(ctx, PcsPhase::CollectCallee);
        return;
      case PcsPhase::CollectCallee:
        ctx.collected_callee = digits;
        validate(ctx);
        return;
      default:
        return;
    }
  }

  std::string reason;
  if (auto it = ev.payload.find("reason"); it != ev.payload.end()) reason = it->second;
  if (reason.rfind("request", 0) == 0) {
    // The media server refused or timed out; that is not the caller's doing.
    fail_call(ctx, ReleaseCause::ServiceUnavailable);
    return;
  }
  if (++ctx.attempts >= config_.max_attempts) {
    logf(LogLevel::Info, "call %s: collection gave up in %s", ctx.call->id().c_str(),
         to_string(ctx.phase));
    play_reject(ctx, ReleaseCause::Forbidden);
    return;
  }
  start_round(ctx, ctx.phase);
}

void PcsService::start_round(CallCtx& ctx, PcsPhase round) {
  ctx.phase = round;
  const char* prompt = nullptr;
  const char* map = nullptr;
  switch (round) {
    case PcsPhase::Greeting:
      prompt = config_.greeting_announcement.c_str();
      break;
    case PcsPhase::CollectCard:
      prompt = config_.greeting_announcement.c_str();
      map = "(x.#)";
      break;
    case PcsPhase::CollectPin:
      prompt = config_.pin_announcement.c_str();
      map = "(xxxx#)";
      break;
    case PcsPhase::CollectCallee:
      prompt = config_.callee_announcement.c_str();
      map = "(x.#)";
      break;
    default:
      return;
  }
  if (!step_ok(ctx, ctx.ms->select_route(std::string("signal=ann(") + prompt + ")"))) return;
  if (map) {
    if (!step_ok(ctx, ctx.ms->select_route("requestedEvents=dtmf"))) return;
    if (!step_ok(ctx, ctx.ms->select_route(std::string("digitMap=") + map))) return;
  }
  step_ok(ctx, ctx.ms->attach_media());
}

void PcsService::validate(CallCtx& ctx) {
  ctx.phase = PcsPhase::Validating;
  std::string card = ctx.card;
  auto outcome = [&]() -> Result<SubscriberProfile, AuthError> {
    if (config_.collection == CollectionMode::None) {
      // The caller's own address names the card; no PIN round took place.
      card = sip_uri_user(ctx.caller->address().literal);
      const SubscriberProfile* profile = store_.find(card);
      if (!profile) return make_err(AuthError::UnknownCard, card);
      if (profile->credit_seconds <= 0) return make_err(AuthError::NoCredit, card);
      return *profile;
    }
    return store_.authenticate(card, ctx.pin);
  }();

  if (!outcome.ok()) {
    logf(LogLevel::Info, "call %s: rejected, %s", ctx.call->id().c_str(),
         to_string(outcome.error()));
    play_reject(ctx, outcome.error() == AuthError::NoCredit ? ReleaseCause::PaymentRequired
                                                            : ReleaseCause::Forbidden);
    return;
  }

  const SubscriberProfile& profile = outcome.value();
  ctx.card = card;
  ctx.authenticated = true;
  ctx.initial_credit = profile.credit_seconds;
  ctx.remaining = profile.credit_seconds;
  ctx.rate = profile.rate;
  std::string user = config_.collection == CollectionMode::None
                         ? sip_uri_user(ctx.caller->invited_uri())
                         : ctx.collected_callee;
  ctx.callee_uri = "sip:" + user + "@" + config_.callee_domain;
  logf(LogLevel::Info, "call %s: admitted %s -> %s, credit %llds", ctx.call->id().c_str(),
       card.c_str(), ctx.callee_uri.c_str(), static_cast<long long>(profile.credit_seconds));
  // The media leg goes away before the callee leg exists.
  step_ok(ctx, ctx.ms->release());
}

void PcsService::play_reject(CallCtx& ctx, ReleaseCause cause) {
  if (cause == ReleaseCause::PaymentRequired) {
    ++stats_.rejected_credit;
  } else {
    ++stats_.rejected_auth;
  }
  ctx.phase = PcsPhase::Ending;
  ctx.reject_pending = true;
  ctx.reject_cause = cause;
  if (!ctx.ms || jcc_state_terminal(ctx.ms->jcc_state())) {
    deliver_reject(ctx);
    return;
  }
  if (!ctx.ms->select_route("signal=ann(" + config_.reject_announcement + ")").ok() ||
      !ctx.ms->attach_media().ok()) {
    deliver_reject(ctx);
  }
}

void PcsService::deliver_reject(CallCtx& ctx) {
  ctx.reject_pending = false;
  release_live(ctx.caller, ctx.reject_cause);
  release_live(ctx.ms, ReleaseCause::Normal);
}

void PcsService::bridge(CallCtx& ctx) {
  ctx.phase = PcsPhase::Bridging;
  auto routed = ctx.call->route_call(ctx.callee_uri, *ctx.caller);
  if (!routed.ok()) {
    fail_call(ctx, ReleaseCause::ServiceUnavailable);
    return;
  }
  ctx.callee = ctx.call->connections().back();
  ++stats_.admitted;
}

void PcsService::enter_call(CallCtx& ctx) {
  ctx.phase = PcsPhase::InCall;
  ++stats_.bridged;
  ctx.bridged_at = provider_.engine().now();
  std::string id = ctx.call->id();
  ctx.billing_timer = provider_.engine().schedule_after(
      config_.billing_period, [this, id] { on_billing_tick(id); });
}

void PcsService::on_billing_tick(const std::string& call_id) {
  auto it = calls_.find(call_id);
  if (it == calls_.end()) return;
  CallCtx& ctx = it->second;
  ctx.billing_timer.reset();
  if (ctx.phase != PcsPhase::InCall) return;

  ctx.remaining -= (config_.billing_period / kMicrosPerSecond) * ctx.rate;
  std::int64_t left = ctx.remaining < 0 ? 0 : ctx.remaining;
  if (auto persisted = store_.set_credit(ctx.card, left); !persisted.ok()) {
    logf(LogLevel::Warn, "call %s: credit write failed, %s", call_id.c_str(),
         to_string(persisted.error()));
  }
  if (ctx.remaining <= 0) {
    logf(LogLevel::Info, "call %s: credit exhausted", call_id.c_str());
    ++stats_.expired;
    ctx.phase = PcsPhase::Ending;
    release_live(ctx.caller, ReleaseCause::Normal);
    release_live(ctx.callee, ReleaseCause::Normal);
    return;
  }
  std::string id = call_id;
  ctx.billing_timer = provider_.engine().schedule_after(
      config_.billing_period, [this, id] { on_billing_tick(id); });
}

void PcsService::settle_on_hangup(CallCtx& ctx) {
  cancel_billing(ctx);
  Micros elapsed = provider_.engine().now() - ctx.bridged_at;
  std::int64_t billed = (elapsed / kMicrosPerSecond) * ctx.rate;
  std::int64_t left = ctx.initial_credit - billed;
  if (left < 0) left = 0;
  if (auto persisted = store_.set_credit(ctx.card, left); !persisted.ok()) {
    logf(LogLevel::Warn, "call %s: final credit write failed, %s", ctx.call->id().c_str(),
         to_string(persisted.error()));
  }
}

void PcsService::fail_call(CallCtx& ctx, ReleaseCause cause) {
  if (ctx.phase == PcsPhase::Ending) return;
  logf(LogLevel::Info, "call %s: failed in %s", ctx.call->id().c_str(), to_string(ctx.phase));
  ctx.phase = PcsPhase::Ending;
  ++stats_.failed;
  cancel_billing(ctx);
  release_live(ctx.caller, cause);
  release_live(ctx.ms, ReleaseCause::Normal);
  release_live(ctx.callee, ReleaseCause::Normal);
}

void PcsService::release_live(JccConnection* conn, ReleaseCause cause) {
  if (!conn || jcc_state_terminal(conn->jcc_state())) return;
  if (auto released = conn->release(cause); !released.ok()) {
    logf(LogLevel::Warn, "conn %s: release failed, %s", conn->id().c_str(),
         to_string(released.error()));
  }
}

bool PcsService::step_ok(CallCtx& ctx, Status<JccError> st) {
  if (st.ok()) return true;
  logf(LogLevel::Warn, "call %s: %s", ctx.call->id().c_str(), to_string(st.error()));
  fail_call(ctx, ReleaseCause::ServiceUnavailable);
  return false;
}

void PcsService::cancel_billing(CallCtx& ctx) {
  if (ctx.billing_timer) {
    provider_.engine().cancel(*ctx.billing_timer);
    ctx.billing_timer.reset();
  }
}

void PcsService::reap_if_settled(const std::string& call_id) {
  auto it = calls_.find(call_id);
  if (it == calls_.end()) return;
  if (it->second.call->state() != JccCall::State::Invalid) return;
  cancel_billing(it->second);
  calls_.erase(it);
}

}  // namespace jcall
