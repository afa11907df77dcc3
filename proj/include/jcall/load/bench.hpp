#pragma once

#include <optional>
#include <string>
#include <vector>

#include "jcall/load/metrics.hpp"
#include "jcall/net/clock.hpp"
#include "jcall/pcs/service.hpp"
#include "jcall/pcs/store.hpp"

namespace jcall {

enum class TransportKind { Inproc, Udp };

enum class BenchError { ConfigInvalid, TopologyUnreachable };

const char* to_string(BenchError e);

// Wire-level trouble injected into a run. Parsed from a comma-separated spec:
//   drop-first:crcx-ok    swallow the first 2xx answer to a connection create
//   drop-first:ntfy-ack   swallow the first 2xx answer to a notify
//   ms-delay:50ms         media servers answer commands this much later
//   crcx-fail:N           media servers refuse the next N creates with 400
//   mdcx-fail:N           media servers refuse the next N modifies with 400
struct FaultPlan {
  bool drop_first_crcx_ok = false;
  bool drop_first_ntfy_ack = false;
  Micros ms_delay = 0;
  int crcx_fail = 0;
  int mdcx_fail = 0;
};

Result<FaultPlan, BenchError> parse_fault_spec(const std::string& spec);

struct BenchConfig {
  double rate = 1.0;  // calls per second; ignored with single_call
  Micros duration = seconds(10);
  Micros call_length = seconds(180);
  bool single_call = false;
  ClockMode clock = ClockMode::Virtual;
  TransportKind transport = TransportKind::Inproc;
  unsigned seed = 1;
  int media_servers = 1;
  // Defaults to Full for single-call runs and None for load runs.
  std::optional<CollectionMode> collection;
  std::string faults;
  std::string subscribers_path;
  // Overrides the built-in subscriber set when non-empty.
  std::vector<SubscriberProfile> subscribers;
  bool capture_trace = true;
};

struct CallCounts {
  std::string call_id;
  int app_interactions = 0;
  int wire_messages = 0;
};

struct BenchResult {
  MetricsReport report;
  std::vector<CallRecord> records;
  // One entry per completed call, launch order.
  std::vector<CallCounts> counts;
  std::string trace;
  int ms_peak_connections = 0;
  int ms_end_connections = 0;
  int fsm_violations = 0;
  Micros end_time = 0;
  int exit_code = 0;  // nonzero when loss_fraction reaches 0.01
};

// Stands up caller pool, service, media servers, and responder over one
// engine, runs the configured window, and aggregates the records.
Result<BenchResult, BenchError> run_bench(const BenchConfig& cfg);

}  // namespace jcall
