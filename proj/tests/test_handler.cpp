#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <string>
#include <vector>

#include "jcall/jcc/handler.hpp"
#include "jcall/jcc/ledger.hpp"

using namespace jcall;

namespace {

std::string action_sig(const std::vector<HandlerAction>& actions) {
  std::string out;
  for (const auto& a : actions) {
    if (!out.empty()) out += ",";
    if (std::holds_alternative<HandlerEmitCrcx>(a)) {
      out += "crcx";
    } else if (std::holds_alternative<HandlerEmitMdcx>(a)) {
      out += "mdcx";
    } else if (const auto* d = std::get_if<HandlerEmitDlcx>(&a)) {
      out += d->cleanup ? "dlcx!" : "dlcx";
    } else if (std::holds_alternative<HandlerEmitRqnt>(a)) {
      out += "rqnt";
    } else if (const auto* s = std::get_if<HandlerSetJccState>(&a)) {
      out += std::string("jcc:") + to_string(s->state);
    } else if (const auto* m = std::get_if<HandlerFireMidCall>(&a)) {
      out += "midcall:" + m->cause;
    } else {
      out += "answer";
    }
  }
  return out;
}

HandlerState in_phase(HandlerPhase phase, bool first_done) {
  HandlerState s;
  s.phase = phase;
  s.call_id = "call1";
  s.first_connect_done = first_done;
  if (phase == HandlerPhase::Connected || phase == HandlerPhase::Reconnection ||
      phase == HandlerPhase::InDisconnection)
    s.mgcp_connection_id = "conn1";
  return s;
}

struct EventCase {
  const char* name;
  HandlerEvent event;
};

std::vector<EventCase> all_events() {
  return {
      {"route", HandlerCmdRouteConnection{}},
      {"release", HandlerCmdRelease{}},
      {"flush_structural", HandlerCmdFlush{true, false, false}},
      {"flush_modify", HandlerCmdFlush{false, true, false}},
      {"flush_request", HandlerCmdFlush{false, false, true}},
      {"flush_empty", HandlerCmdFlush{false, false, false}},
      {"crcx_ok", HandlerRxCrcxOk{"conn2", "ivr/1@ms1", std::nullopt}},
      {"crcx_fail", HandlerRxCrcxFail{400}},
      {"mdcx_ok", HandlerRxMdcxOk{}},
      {"mdcx_fail", HandlerRxMdcxFail{400}},
      {"dlcx_ok", HandlerRxDlcxOk{}},
      {"dlcx_fail", HandlerRxDlcxFail{400}},
      {"timeout", HandlerTxTimeout{}},
  };
}

struct Expected {
  HandlerPhase to;
  const char* first_pass;   // actions when first_connect_done == false
  const char* steady_pass;  // actions when first_connect_done == true
};

// The full transition table. Pairs absent here must be rejected unchanged,
// except in Disconnected, which absorbs everything silently.
const std::map<std::pair<HandlerPhase, std::string>, Expected> kTable = {
    {{HandlerPhase::Idle, "route"},
     {HandlerPhase::InConnection, "crcx,jcc:CALL_DELIVERY", "crcx"}},
    {{HandlerPhase::InConnection, "crcx_ok"},
     {HandlerPhase::Connected, "jcc:CONNECTED,answer",
      "midcall:CONNECTION_CHANGED"}},
    {{HandlerPhase::InConnection, "crcx_fail"},
     {HandlerPhase::Idle, "jcc:FAILED", "jcc:FAILED"}},
    {{HandlerPhase::InConnection, "timeout"},
     {HandlerPhase::Idle, "jcc:FAILED", "jcc:FAILED"}},
    {{HandlerPhase::Connected, "flush_structural"},
     {HandlerPhase::Reconnection, "dlcx", "dlcx"}},
    {{HandlerPhase::Connected, "flush_modify"},
     {HandlerPhase::Connected, "mdcx", "mdcx"}},
    {{HandlerPhase::Connected, "flush_request"},
     {HandlerPhase::Connected, "rqnt", "rqnt"}},
    {{HandlerPhase::Connected, "release"},
     {HandlerPhase::InDisconnection, "dlcx", "dlcx"}},
    {{HandlerPhase::Connected, "mdcx_ok"},
     {HandlerPhase::Connected, "midcall:CONNECTION_CHANGED",
      "midcall:CONNECTION_CHANGED"}},
    {{HandlerPhase::Connected, "mdcx_fail"},
     {HandlerPhase::Error, "dlcx!,midcall:CONNECTION_CHANGE_FAILED",
      "dlcx!,midcall:CONNECTION_CHANGE_FAILED"}},
    {{HandlerPhase::Reconnection, "dlcx_ok"},
     {HandlerPhase::Reconnection, "crcx", "crcx"}},
    {{HandlerPhase::Reconnection, "dlcx_fail"},
     {HandlerPhase::Reconnection, "crcx", "crcx"}},
    {{HandlerPhase::Reconnection, "crcx_ok"},
     {HandlerPhase::Connected, "midcall:CONNECTION_CHANGED",
      "midcall:CONNECTION_CHANGED"}},
    {{HandlerPhase::Reconnection, "crcx_fail"},
     {HandlerPhase::Error, "midcall:CONNECTION_CHANGE_FAILED",
      "midcall:CONNECTION_CHANGE_FAILED"}},
    {{HandlerPhase::Reconnection, "timeout"},
     {HandlerPhase::Error, "midcall:CONNECTION_CHANGE_FAILED",
      "midcall:CONNECTION_CHANGE_FAILED"}},
    {{HandlerPhase::Error, "route"}, {HandlerPhase::InConnection, "crcx", "crcx"}},
    {{HandlerPhase::InDisconnection, "dlcx_ok"},
     {HandlerPhase::Disconnected, "jcc:DISCONNECTED", "jcc:DISCONNECTED"}},
    {{HandlerPhase::InDisconnection, "dlcx_fail"},
     {HandlerPhase::Disconnected, "jcc:DISCONNECTED", "jcc:DISCONNECTED"}},
    {{HandlerPhase::InDisconnection, "timeout"},
     {HandlerPhase::Disconnected, "jcc:DISCONNECTED", "jcc:DISCONNECTED"}},
};

const HandlerPhase kAllPhases[] = {
    HandlerPhase::Idle,         HandlerPhase::InConnection,
    HandlerPhase::Connected,    HandlerPhase::Reconnection,
    HandlerPhase::Error,        HandlerPhase::InDisconnection,
    HandlerPhase::Disconnected,
};

}  // namespace

TEST_CASE("every (phase, event) pair behaves exactly per the table") {
  for (HandlerPhase phase : kAllPhases) {
    for (bool first_done : {false, true}) {
      for (const EventCase& ev : all_events()) {
        CAPTURE(to_string(phase));
        CAPTURE(ev.name);
        CAPTURE(first_done);
        HandlerState state = in_phase(phase, first_done);
        HandlerStep step = handler_step(state, ev.event);
        if (phase == HandlerPhase::Disconnected) {
          CHECK_FALSE(step.illegal);
          CHECK(step.actions.empty());
          CHECK(step.state.phase == HandlerPhase::Disconnected);
          continue;
        }
        auto it = kTable.find({phase, ev.name});
        if (it == kTable.end()) {
          CHECK(step.illegal);
          CHECK(step.actions.empty());
          CHECK(step.state.phase == state.phase);
          CHECK(step.state.mgcp_connection_id == state.mgcp_connection_id);
          CHECK(step.state.first_connect_done == state.first_connect_done);
          continue;
        }
        CHECK_FALSE(step.illegal);
        CHECK(step.state.phase == it->second.to);
        CHECK(action_sig(step.actions) ==
              (first_done ? it->second.steady_pass : it->second.first_pass));
      }
    }
  }
}

TEST_CASE("connection id is held exactly while a media connection exists") {
  HandlerState s = in_phase(HandlerPhase::Idle, false);
  auto routed = handler_step(s, HandlerCmdRouteConnection{});
  CHECK_FALSE(routed.state.mgcp_connection_id.has_value());
  auto up = handler_step(routed.state,
                         HandlerRxCrcxOk{"conn9", "ann/2@ms1", std::nullopt});
  REQUIRE(up.state.mgcp_connection_id.has_value());
  CHECK(*up.state.mgcp_connection_id == "conn9");
  CHECK(up.state.ms_endpoint == "ann/2@ms1");
  CHECK(up.state.first_connect_done);
  auto released = handler_step(up.state, HandlerCmdRelease{});
  CHECK(released.state.mgcp_connection_id.has_value());
  auto down = handler_step(released.state, HandlerRxDlcxOk{});
  CHECK(down.state.phase == HandlerPhase::Disconnected);
  CHECK_FALSE(down.state.mgcp_connection_id.has_value());
}

TEST_CASE("modify flush runs one mdcx then reports one change") {
  HandlerState s = in_phase(HandlerPhase::Connected, true);
  auto flushed = handler_step(s, HandlerCmdFlush{false, true, false});
  CHECK(action_sig(flushed.actions) == "mdcx");
  auto done = handler_step(flushed.state, HandlerRxMdcxOk{});
  CHECK(action_sig(done.actions) == "midcall:CONNECTION_CHANGED");
  CHECK(done.state.phase == HandlerPhase::Connected);
}

TEST_CASE("structural flush replaces the connection then reports one change") {
  HandlerState s = in_phase(HandlerPhase::Connected, true);
  auto flushed = handler_step(s, HandlerCmdFlush{true, false, false});
  CHECK(action_sig(flushed.actions) == "dlcx");
  auto deleted = handler_step(flushed.state, HandlerRxDlcxOk{});
  CHECK(action_sig(deleted.actions) == "crcx");
  auto rebuilt = handler_step(deleted.state,
                              HandlerRxCrcxOk{"conn3", "ivr/2@ms2", std::nullopt});
  CHECK(action_sig(rebuilt.actions) == "midcall:CONNECTION_CHANGED");
  CHECK(rebuilt.state.phase == HandlerPhase::Connected);
  CHECK(*rebuilt.state.mgcp_connection_id == "conn3");
}

TEST_CASE("request values queued behind a structural flush ride out afterwards") {
  HandlerState s = in_phase(HandlerPhase::Connected, true);
  auto flushed = handler_step(s, HandlerCmdFlush{true, false, true});
  CHECK(flushed.state.rqnt_queued);
  auto deleted = handler_step(flushed.state, HandlerRxDlcxOk{});
  CHECK(action_sig(deleted.actions) == "crcx");
  auto rebuilt = handler_step(deleted.state,
                              HandlerRxCrcxOk{"conn4", "", std::nullopt});
  CHECK(action_sig(rebuilt.actions) == "midcall:CONNECTION_CHANGED,rqnt");
  CHECK_FALSE(rebuilt.state.rqnt_queued);
}

TEST_CASE("request values queued behind a modify ride out after the mdcx") {
  HandlerState s = in_phase(HandlerPhase::Connected, true);
  auto flushed = handler_step(s, HandlerCmdFlush{false, true, true});
  CHECK(action_sig(flushed.actions) == "mdcx");
  auto done = handler_step(flushed.state, HandlerRxMdcxOk{});
  CHECK(action_sig(done.actions) == "midcall:CONNECTION_CHANGED,rqnt");
}

TEST_CASE("modify failure abandons the connection but keeps the handler usable") {
  HandlerState s = in_phase(HandlerPhase::Connected, true);
  auto failed = handler_step(s, HandlerRxMdcxFail{400});
  CHECK(failed.state.phase == HandlerPhase::Error);
  CHECK_FALSE(failed.state.mgcp_connection_id.has_value());
  CHECK(action_sig(failed.actions) ==
        "dlcx!,midcall:CONNECTION_CHANGE_FAILED");
  auto retried = handler_step(failed.state, HandlerCmdRouteConnection{});
  CHECK(retried.state.phase == HandlerPhase::InConnection);
  CHECK(action_sig(retried.actions) == "crcx");
  auto up = handler_step(retried.state,
                         HandlerRxCrcxOk{"conn5", "", std::nullopt});
  CHECK(action_sig(up.actions) == "midcall:CONNECTION_CHANGED");
}

TEST_CASE("parameters classify into the three ledger classes") {
  CHECK(classify_parameter("endpointAddress") == ParamClass::Mandatory);
  CHECK(classify_parameter("endpointType") == ParamClass::Mandatory);
  CHECK(classify_parameter("mode") == ParamClass::Modify);
  CHECK(classify_parameter("localOptions") == ParamClass::Modify);
  CHECK(classify_parameter("remoteSdp") == ParamClass::Modify);
  CHECK(classify_parameter("notifiedEntity") == ParamClass::Modify);
  CHECK(classify_parameter("signal") == ParamClass::Request);
  CHECK(classify_parameter("requestedEvents") == ParamClass::Request);
  CHECK(classify_parameter("digitMap") == ParamClass::Request);
  CHECK_FALSE(classify_parameter("bogus").has_value());
}

TEST_CASE("recording an unknown parameter fails; flushing nothing fails") {
  ParameterLedger ledger;
  auto bad = record_parameter(ledger, "bogus", "1");
  REQUIRE_FALSE(bad.ok());
  CHECK(bad.error() == LedgerError::UnknownParameter);
  auto empty = flush_ledger(ledger);
  REQUIRE_FALSE(empty.ok());
  CHECK(empty.error() == LedgerError::EmptyLedger);
}

TEST_CASE("request-only flush compiles the values and commits none of them") {
  ParameterLedger ledger;
  REQUIRE(record_parameter(ledger, "signal", "ann(welcome)").ok());
  REQUIRE(record_parameter(ledger, "requestedEvents", "dtmf").ok());
  REQUIRE(record_parameter(ledger, "digitMap", "(xxxx#)").ok());
  auto r = flush_ledger(ledger);
  REQUIRE(r.ok());
  const FlushPlan& plan = r.value().plan;
  CHECK_FALSE(plan.structural);
  CHECK_FALSE(plan.modify);
  REQUIRE(plan.request.size() == 3);
  CHECK(plan.request[0] == std::pair<std::string, std::string>{
                               "signal", "ann(welcome)"});
  CHECK(r.value().ledger.committed.empty());
  CHECK(r.value().ledger.pending.empty());
}

TEST_CASE("modify flush carries the merged committed view") {
  ParameterLedger ledger;
  ledger.committed = {{"endpointType", "IVR"}, {"mode", "recvonly"}};
  REQUIRE(record_parameter(ledger, "mode", "sendrecv").ok());
  auto r = flush_ledger(ledger);
  REQUIRE(r.ok());
  CHECK(r.value().plan.modify);
  CHECK_FALSE(r.value().plan.structural);
  REQUIRE(find_value(r.value().plan.merged, "mode") != nullptr);
  CHECK(*find_value(r.value().plan.merged, "mode") == "sendrecv");
  CHECK(*find_value(r.value().ledger.committed, "endpointType") == "IVR");
}

TEST_CASE("a mandatory change folds any modify changes into the rebuild") {
  ParameterLedger ledger;
  ledger.committed = {{"endpointType", "IVR"}};
  REQUIRE(record_parameter(ledger, "endpointAddress", "ms2:2427").ok());
  REQUIRE(record_parameter(ledger, "mode", "sendonly").ok());
  REQUIRE(record_parameter(ledger, "digitMap", "(x.#)").ok());
  auto r = flush_ledger(ledger);
  REQUIRE(r.ok());
  CHECK(r.value().plan.structural);
  CHECK_FALSE(r.value().plan.modify);
  CHECK(*find_value(r.value().plan.merged, "endpointAddress") == "ms2:2427");
  CHECK(*find_value(r.value().plan.merged, "mode") == "sendonly");
  REQUIRE(r.value().plan.request.size() == 1);
  CHECK(find_value(r.value().ledger.committed, "digitMap") == nullptr);
}
