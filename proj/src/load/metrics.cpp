#include "jcall/load/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace jcall {

const char* to_string(CallOutcome o) {
  switch (o) {
    case CallOutcome::Completed: return "completed";
    case CallOutcome::Lost: return "lost";
    case CallOutcome::Rejected: return "rejected";
  }
  return "?";
}

const char* to_string(MctError e) {
  switch (e) {
    case MctError::NoneQualify: return "NoneQualify";
  }
  return "?";
}

std::optional<Micros> compute_srd(const CallRecord& rec) {
  if (!rec.t_first_non100_provisional) return std::nullopt;
  return *rec.t_first_non100_provisional - rec.t_invite;
}

Micros percentile_nearest_rank(std::vector<Micros> sample, double fraction) {
  if (sample.empty()) return 0;
  std::sort(sample.begin(), sample.end());
  auto rank = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(sample.size())));
  if (rank == 0) rank = 1;
  if (rank > sample.size()) rank = sample.size();
  return sample[rank - 1];
}

MetricsReport build_report(const std::vector<CallRecord>& records,
                           double offered_rate, double app_interactions_per_call,
                           double wire_messages_per_call) {
  MetricsReport r;
  r.offered_rate = offered_rate;
  r.attempted = static_cast<int>(records.size());
  r.app_interactions_per_call = app_interactions_per_call;
  r.wire_messages_per_call = wire_messages_per_call;

  std::vector<Micros> srd;
  for (const auto& rec : records) {
    switch (rec.outcome) {
      case CallOutcome::Completed: ++r.completed; break;
      case CallOutcome::Lost: ++r.lost; break;
      case CallOutcome::Rejected: break;
    }
    if (auto d = compute_srd(rec)) srd.push_back(*d);
  }
  if (r.attempted > 0)
    r.loss_fraction = static_cast<double>(r.lost) / r.attempted;
  if (!srd.empty()) {
    double sum = 0;
    for (Micros d : srd) sum += to_millis(d);
    r.srd_avg_ms = sum / static_cast<double>(srd.size());
    r.srd_p95_ms = to_millis(percentile_nearest_rank(srd, 0.95));
  }
  return r;
}

namespace {

// Fixed-point formatting keeps reports byte-stable across identical runs.
std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace

std::string report_json(const MetricsReport& r) {
  std::string out = "{\n";
  out += "  \"offered_rate\": " + fmt(r.offered_rate) + ",\n";
  out += "  \"attempted\": " + std::to_string(r.attempted) + ",\n";
  out += "  \"completed\": " + std::to_string(r.completed) + ",\n";
  out += "  \"lost\": " + std::to_string(r.lost) + ",\n";
  out += "  \"loss_fraction\": " + fmt(r.loss_fraction) + ",\n";
  out += "  \"srd_avg_ms\": " + fmt(r.srd_avg_ms) + ",\n";
  out += "  \"srd_p95_ms\": " + fmt(r.srd_p95_ms) + ",\n";
  out += "  \"app_interactions_per_call\": " + fmt(r.app_interactions_per_call) + ",\n";
  out += "  \"wire_messages_per_call\": " + fmt(r.wire_messages_per_call) + "\n";
  out += "}\n";
  return out;
}

std::string report_csv(const MetricsReport& r) {
  std::string out =
      "offered_rate,attempted,completed,lost,loss_fraction,"
      "srd_avg_ms,srd_p95_ms,app_interactions_per_call,wire_messages_per_call\n";
  out += fmt(r.offered_rate) + "," + std::to_string(r.attempted) + "," +
         std::to_string(r.completed) + "," + std::to_string(r.lost) + "," +
         fmt(r.loss_fraction) + "," + fmt(r.srd_avg_ms) + "," +
         fmt(r.srd_p95_ms) + "," + fmt(r.app_interactions_per_call) + "," +
         fmt(r.wire_messages_per_call) + "\n";
  return out;
}

Result<MctResult, MctError> find_mct(
    const std::vector<std::pair<double, MetricsReport>>& results) {
  MctResult res;
  bool any = false;
  for (const auto& [rate, report] : results) {
    if (report.loss_fraction >= 0.01) continue;
    if (!any || rate > res.mct) res.mct = rate;
    any = true;
    if (report.srd_p95_ms <= 500.0 && (!res.mct95 || rate > *res.mct95))
      res.mct95 = rate;
  }
  if (!any) return make_err(MctError::NoneQualify, "no rate kept loss under 0.01");
  return res;
}

}  // namespace jcall
