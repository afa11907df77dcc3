#pragma once

#include <string>
#include <vector>

#include "jcall/util/result.hpp"

namespace jcall {

struct SdpMedia {
  std::string media_type;  // "audio"
  int port = 0;
  std::vector<std::string> codecs;  // RTP/AVP payload numbers, order preserved

  bool operator==(const SdpMedia&) const = default;
};

/// Minimal audio session description: one origin, one connection address, one
/// or more media lines. Unknown lines are skipped on parse; serialization is
/// canonical, so struct -> text -> struct is the identity.
struct SdpSession {
  std::string origin;              // full o= payload
  std::string connection_address;  // c= IN IP4 address
  std::vector<SdpMedia> media;

  bool operator==(const SdpSession&) const = default;
};

enum class SdpError { MalformedSdp };

Result<SdpSession, SdpError> parse_sdp(std::string_view text);
Result<std::string, SdpError> serialize_sdp(const SdpSession& session);

}  // namespace jcall
