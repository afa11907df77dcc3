#include "jcall/sip/sdp.hpp"

#include <charconv>
#include <sstream>

namespace jcall {

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line = nl == std::string_view::npos
                                ? text.substr(pos)
                                : text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return lines;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

Result<SdpSession, SdpError> parse_sdp(std::string_view text) {
  SdpSession session;
  bool saw_version = false;
  for (std::string_view line : split_lines(text)) {
    if (line.empty()) continue;
    if (line.size() < 2 || line[1] != '=')
      return make_err(SdpError::MalformedSdp, "line without type=");
    char type = line[0];
    std::string_view value = line.substr(2);
    switch (type) {
      case 'v':
        if (value != "0")
          return make_err(SdpError::MalformedSdp, "unsupported version");
        saw_version = true;
        break;
      case 'o':
        session.origin = std::string(value);
        break;
      case 'c': {
        auto parts = split_ws(value);
        if (parts.size() != 3 || parts[0] != "IN" || parts[1] != "IP4")
          return make_err(SdpError::MalformedSdp, "bad connection line");
        session.connection_address = std::string(parts[2]);
        break;
      }
      case 'm': {
        auto parts = split_ws(value);
        if (parts.size() < 4)
          return make_err(SdpError::MalformedSdp, "short media line");
        SdpMedia media;
        media.media_type = std::string(parts[0]);
        int port = 0;
        auto [ptr, ec] =
            std::from_chars(parts[1].data(), parts[1].data() + parts[1].size(), port);
        if (ec != std::errc() || ptr != parts[1].data() + parts[1].size())
          return make_err(SdpError::MalformedSdp, "bad media port");
        if (port <= 0)
          return make_err(SdpError::MalformedSdp, "media port must be positive");
        media.port = port;
        for (std::size_t i = 3; i < parts.size(); ++i)
          media.codecs.emplace_back(parts[i]);
        session.media.push_back(std::move(media));
        break;
      }
      default:
        break;  // s=, t=, a= and friends are tolerated and dropped
    }
  }
  if (!saw_version) return make_err(SdpError::MalformedSdp, "missing v=0");
  if (session.media.empty())
    return make_err(SdpError::MalformedSdp, "no media line");
  return session;
}

Result<std::string, SdpError> serialize_sdp(const SdpSession& session) {
  if (session.media.empty())
    return make_err(SdpError::MalformedSdp, "no media line");
  std::ostringstream out;
  out << "v=0\r\n";
  out << "o=" << session.origin << "\r\n";
  out << "c=IN IP4 " << session.connection_address << "\r\n";
  for (const auto& media : session.media) {
    if (media.port <= 0)
      return make_err(SdpError::MalformedSdp, "media port must be positive");
    out << "m=" << media.media_type << " " << media.port << " RTP/AVP";
    for (const auto& codec : media.codecs) out << " " << codec;
    out << "\r\n";
  }
  return out.str();
}

}  // namespace jcall
