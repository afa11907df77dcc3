#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "jcall/util/result.hpp"

namespace jcall {

// How a connection parameter reaches the media server. Mandatory values
// require tearing the connection down and recreating it, Modify values
// travel in a single MDCX, Request values compile into one RQNT and are
// consumed by it rather than remembered.
enum class ParamClass { Mandatory, Modify, Request };

const char* to_string(ParamClass c);

std::optional<ParamClass> classify_parameter(std::string_view name);

using ParamValues = std::vector<std::pair<std::string, std::string>>;

const std::string* find_value(const ParamValues& values, std::string_view name);
void put_value(ParamValues& values, std::string_view name, std::string value);

struct ParameterLedger {
  ParamValues committed;
  ParamValues pending;
};

enum class LedgerError { UnknownParameter, EmptyLedger };

// Stages one "name=value" change; no wire traffic results until a flush.
Status<LedgerError> record_parameter(ParameterLedger& ledger,
                                     std::string_view name, std::string value);

struct FlushPlan {
  bool structural = false;  // one DLCX + CRCX pair
  bool modify = false;      // one MDCX
  ParamValues merged;       // committed view the rebuilt/modified leg uses
  ParamValues request;      // compiled into one RQNT, consumed here
};

struct FlushResult {
  FlushPlan plan;
  ParameterLedger ledger;
};

Result<FlushResult, LedgerError> flush_ledger(const ParameterLedger& ledger);

}  // namespace jcall
