#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "jcall/sip/sdp.hpp"
#include "jcall/util/result.hpp"

namespace jcall {

enum class MgcpVerb { Crcx, Mdcx, Dlcx, Rqnt, Ntfy };

const char* to_string(MgcpVerb verb);
std::optional<MgcpVerb> mgcp_verb_from(std::string_view token);

constexpr std::uint32_t kMgcpTxIdMax = 999999999;

// Parameter order is preserved and significant: serialization emits the
// lines exactly as listed, so traces can be compared byte for byte.
struct MgcpParam {
  std::string code;
  std::string value;
  bool operator==(const MgcpParam&) const = default;
};

struct MgcpCommand {
  MgcpVerb verb = MgcpVerb::Crcx;
  std::uint32_t transaction_id = 0;
  std::string endpoint_id;
  std::vector<MgcpParam> params;
  std::optional<SdpSession> sdp;

  const std::string* param(std::string_view code) const;
  void set_param(std::string_view code, std::string value);
  bool operator==(const MgcpCommand&) const = default;
};

struct MgcpResponse {
  int code = 200;
  std::uint32_t transaction_id = 0;
  std::string comment;
  std::vector<MgcpParam> params;
  std::optional<SdpSession> sdp;

  const std::string* param(std::string_view code) const;
  void set_param(std::string_view code, std::string value);
  bool ok() const { return code >= 200 && code < 300; }
  bool operator==(const MgcpResponse&) const = default;
};

using MgcpMessage = std::variant<MgcpCommand, MgcpResponse>;

enum class MgcpParseError { MalformedMgcp, UnknownVerb };
enum class MgcpSerializeError { InvariantViolation };

Result<MgcpMessage, MgcpParseError> parse_mgcp(std::string_view datagram);
Result<std::string, MgcpSerializeError> serialize_mgcp(const MgcpCommand& cmd);
Result<std::string, MgcpSerializeError> serialize_mgcp(const MgcpResponse& rsp);

}  // namespace jcall
