#include "jcall/jcc/ledger.hpp"

namespace jcall {

const char* to_string(ParamClass c) {
  switch (c) {
    case ParamClass::Mandatory: return "mandatory";
    case ParamClass::Modify: return "modify";
    case ParamClass::Request: return "request";
  }
  return "?";
}

std::optional<ParamClass> classify_parameter(std::string_view name) {
  if (name == "endpointAddress" || name == "endpointType")
    return ParamClass::Mandatory;
  if (name == "mode" || name == "localOptions" || name == "remoteSdp" ||
      name == "notifiedEntity")
    return ParamClass::Modify;
  if (name == "signal" || name == "requestedEvents" || name == "digitMap")
    return ParamClass::Request;
  return std::nullopt;
}

const std::string* find_value(const ParamValues& values,
                              std::string_view name) {
  for (const auto& [k, v] : values) {
    if (k == name) return &v;
  }
  return nullptr;
}

void put_value(ParamValues& values, std::string_view name, std::string value) {
  for (auto& [k, v] : values) {
    if (k == name) {
      v = std::move(value);
      return;
    }
  }
  values.emplace_back(std::string(name), std::move(value));
}

Status<LedgerError> record_parameter(ParameterLedger& ledger,
                                     std::string_view name,
                                     std::string value) {
  if (!classify_parameter(name))
    return make_err(LedgerError::UnknownParameter, std::string(name));
  put_value(ledger.pending, name, std::move(value));
  return ok_unit();
}

Result<FlushResult, LedgerError> flush_ledger(const ParameterLedger& ledger) {
  if (ledger.pending.empty()) return make_err(LedgerError::EmptyLedger);
  FlushResult out;
  out.ledger.committed = ledger.committed;
  for (const auto& [name, value] : ledger.pending) {
    switch (*classify_parameter(name)) {
      case ParamClass::Mandatory:
        out.plan.structural = true;
        put_value(out.ledger.committed, name, value);
        break;
      case ParamClass::Modify:
        out.plan.modify = true;
        put_value(out.ledger.committed, name, value);
        break;
      case ParamClass::Request:
        put_value(out.plan.request, name, value);
        break;
    }
  }
  if (out.plan.structural) out.plan.modify = false;
  out.plan.merged = out.ledger.committed;
  return out;
}

}  // namespace jcall
