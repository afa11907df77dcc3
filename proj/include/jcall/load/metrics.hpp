#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "jcall/net/clock.hpp"
#include "jcall/util/result.hpp"

namespace jcall {

enum class CallOutcome { Completed, Lost, Rejected };

const char* to_string(CallOutcome o);

/// Timeline of one scripted call, timestamps in engine micros.
struct CallRecord {
  std::string call_id;
  Micros t_invite = 0;
  std::optional<Micros> t_first_non100_provisional;
  std::optional<Micros> t_answered;
  std::optional<Micros> t_released;
  CallOutcome outcome = CallOutcome::Lost;
};

// Session request delay: INVITE to the first provisional other than 100.
// A call that never saw one yields no sample but still counts for loss.
std::optional<Micros> compute_srd(const CallRecord& rec);

struct MetricsReport {
  double offered_rate = 0.0;  // calls per second
  int attempted = 0;
  int completed = 0;
  int lost = 0;
  double loss_fraction = 0.0;
  double srd_avg_ms = 0.0;
  double srd_p95_ms = 0.0;
  double app_interactions_per_call = 0.0;
  double wire_messages_per_call = 0.0;
};

// Nearest-rank percentile over an unsorted sample; 0 for an empty one.
Micros percentile_nearest_rank(std::vector<Micros> sample, double fraction);

// interactions/wire are averaged over completed calls by the caller and passed
// through; everything else is derived from the records.
MetricsReport build_report(const std::vector<CallRecord>& records,
                           double offered_rate, double app_interactions_per_call,
                           double wire_messages_per_call);

std::string report_json(const MetricsReport& r);
std::string report_csv(const MetricsReport& r);

enum class MctError { NoneQualify };

const char* to_string(MctError e);

struct MctResult {
  double mct = 0.0;
  // Highest rate that also keeps p95 SRD at or under 500 ms; absent when no
  // qualifying rate meets the stricter bar.
  std::optional<double> mct95;
};

// Highest offered rate whose loss fraction stays below 0.01.
Result<MctResult, MctError> find_mct(
    const std::vector<std::pair<double, MetricsReport>>& results);

}  // namespace jcall
