#include "jcall/mgcp/message.hpp"

#include <cctype>
#include <charconv>
#include <sstream>

namespace jcall {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

bool parse_u32(std::string_view s, std::uint32_t& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

const std::string* find_param(const std::vector<MgcpParam>& params,
                              std::string_view code) {
  for (const auto& p : params) {
    if (p.code == code) return &p.value;
  }
  return nullptr;
}

void put_param(std::vector<MgcpParam>& params, std::string_view code,
               std::string value) {
  for (auto& p : params) {
    if (p.code == code) {
      p.value = std::move(value);
      return;
    }
  }
  params.push_back({std::string(code), std::move(value)});
}

// Splits the datagram into (first line, parameter lines, sdp remainder).
struct Lines {
  std::string_view first;
  std::vector<std::pair<std::string_view, std::string_view>> params;
  std::string_view sdp;
};

Result<Lines, MgcpParseError> split_lines(std::string_view datagram) {
  Lines out;
  std::size_t pos = 0;
  bool have_first = false;
  while (pos < datagram.size()) {
    std::size_t eol = datagram.find('\n', pos);
    std::size_t raw_len =
        eol == std::string_view::npos ? datagram.size() - pos : eol - pos;
    std::string_view line = datagram.substr(pos, raw_len);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = eol == std::string_view::npos ? datagram.size() : eol + 1;
    if (!have_first) {
      out.first = line;
      have_first = true;
      continue;
    }
    if (line.empty()) {
      out.sdp = datagram.substr(pos);
      break;
    }
    std::size_t colon = line.find(':');
    if (colon == std::string_view::npos || colon == 0)
      return make_err(MgcpParseError::MalformedMgcp,
                      "bad parameter line: " + std::string(line));
    out.params.emplace_back(trim(line.substr(0, colon)),
                            trim(line.substr(colon + 1)));
  }
  if (!have_first) return make_err(MgcpParseError::MalformedMgcp, "empty");
  return out;
}

}  // namespace

const char* to_string(MgcpVerb verb) {
  switch (verb) {
    case MgcpVerb::Crcx: return "CRCX";
    case MgcpVerb::Mdcx: return "MDCX";
    case MgcpVerb::Dlcx: return "DLCX";
    case MgcpVerb::Rqnt: return "RQNT";
    case MgcpVerb::Ntfy: return "NTFY";
  }
  return "?";
}

std::optional<MgcpVerb> mgcp_verb_from(std::string_view token) {
  if (token == "CRCX") return MgcpVerb::Crcx;
  if (token == "MDCX") return MgcpVerb::Mdcx;
  if (token == "DLCX") return MgcpVerb::Dlcx;
  if (token == "RQNT") return MgcpVerb::Rqnt;
  if (token == "NTFY") return MgcpVerb::Ntfy;
  return std::nullopt;
}

const std::string* MgcpCommand::param(std::string_view code) const {
  return find_param(params, code);
}
void MgcpCommand::set_param(std::string_view code, std::string value) {
  put_param(params, code, std::move(value));
}
const std::string* MgcpResponse::param(std::string_view code) const {
  return find_param(params, code);
}
void MgcpResponse::set_param(std::string_view code, std::string value) {
  put_param(params, code, std::move(value));
}

Result<MgcpMessage, MgcpParseError> parse_mgcp(std::string_view datagram) {
  if (datagram.empty())
    return make_err(MgcpParseError::MalformedMgcp, "empty datagram");
  auto lines = split_lines(datagram);
  if (!lines.ok()) return make_err(lines.error(), lines.error_detail());
  const Lines& split = lines.value();

  std::vector<std::string_view> tokens;
  {
    std::size_t start = 0;
    const std::string_view first = split.first;
    while (start <= first.size()) {
      std::size_t space = first.find(' ', start);
      if (space == std::string_view::npos) {
        tokens.push_back(first.substr(start));
        break;
      }
      tokens.push_back(first.substr(start, space - start));
      start = space + 1;
    }
  }
  if (tokens.empty() || tokens[0].empty())
    return make_err(MgcpParseError::MalformedMgcp, "bad first line");

  std::optional<SdpSession> sdp;
  if (!split.sdp.empty()) {
    auto parsed = parse_sdp(split.sdp);
    if (!parsed.ok())
      return make_err(MgcpParseError::MalformedMgcp, "bad SDP payload");
    sdp = parsed.take();
  }

  if (std::isdigit(static_cast<unsigned char>(tokens[0][0]))) {
    if (tokens.size() < 2)
      return make_err(MgcpParseError::MalformedMgcp, "short response line");
    MgcpResponse rsp;
    std::uint32_t code = 0;
    if (!parse_u32(tokens[0], code) || code > 999)
      return make_err(MgcpParseError::MalformedMgcp, "bad response code");
    rsp.code = static_cast<int>(code);
    if (!parse_u32(tokens[1], rsp.transaction_id) || rsp.transaction_id < 1 ||
        rsp.transaction_id > kMgcpTxIdMax)
      return make_err(MgcpParseError::MalformedMgcp, "bad transaction id");
    if (tokens.size() > 2) {
      std::size_t comment_at = split.first.find(' ');
      comment_at = split.first.find(' ', comment_at + 1);
      rsp.comment = std::string(split.first.substr(comment_at + 1));
    }
    for (const auto& [code_sv, value_sv] : split.params)
      rsp.params.push_back({std::string(code_sv), std::string(value_sv)});
    rsp.sdp = std::move(sdp);
    return MgcpMessage{std::move(rsp)};
  }

  if (tokens.size() != 5 || tokens[3] != "MGCP" || tokens[4] != "1.0")
    return make_err(MgcpParseError::MalformedMgcp, "bad command line");
  auto verb = mgcp_verb_from(tokens[0]);
  if (!verb)
    return make_err(MgcpParseError::UnknownVerb, std::string(tokens[0]));
  MgcpCommand cmd;
  cmd.verb = *verb;
  if (!parse_u32(tokens[1], cmd.transaction_id) || cmd.transaction_id < 1 ||
      cmd.transaction_id > kMgcpTxIdMax)
    return make_err(MgcpParseError::MalformedMgcp, "bad transaction id");
  if (tokens[2].empty())
    return make_err(MgcpParseError::MalformedMgcp, "empty endpoint");
  cmd.endpoint_id = std::string(tokens[2]);
  for (const auto& [code_sv, value_sv] : split.params)
    cmd.params.push_back({std::string(code_sv), std::string(value_sv)});
  cmd.sdp = std::move(sdp);
  return MgcpMessage{std::move(cmd)};
}

namespace {

Result<std::string, MgcpSerializeError> append_params_and_sdp(
    std::ostringstream& out, const std::vector<MgcpParam>& params,
    const std::optional<SdpSession>& sdp) {
  for (const auto& p : params) {
    if (p.code.empty() || p.code.find(' ') != std::string::npos ||
        p.code.find(':') != std::string::npos)
      return make_err(MgcpSerializeError::InvariantViolation,
                      "bad parameter code");
    out << p.code << ": " << p.value << "\r\n";
  }
  if (sdp) {
    auto text = serialize_sdp(*sdp);
    if (!text.ok())
      return make_err(MgcpSerializeError::InvariantViolation, "bad SDP");
    out << "\r\n" << text.value();
  }
  return out.str();
}

}  // namespace

Result<std::string, MgcpSerializeError> serialize_mgcp(const MgcpCommand& cmd) {
  if (cmd.transaction_id < 1 || cmd.transaction_id > kMgcpTxIdMax)
    return make_err(MgcpSerializeError::InvariantViolation,
                    "transaction id out of range");
  if (cmd.endpoint_id.empty() ||
      cmd.endpoint_id.find(' ') != std::string::npos)
    return make_err(MgcpSerializeError::InvariantViolation, "bad endpoint id");
  switch (cmd.verb) {
    case MgcpVerb::Crcx:
      if (!cmd.param("C") || !cmd.param("M"))
        return make_err(MgcpSerializeError::InvariantViolation,
                        "CRCX requires C and M");
      break;
    case MgcpVerb::Rqnt:
      if (!cmd.param("X"))
        return make_err(MgcpSerializeError::InvariantViolation,
                        "RQNT requires X");
      break;
    case MgcpVerb::Ntfy:
      if (!cmd.param("X") || !cmd.param("O"))
        return make_err(MgcpSerializeError::InvariantViolation,
                        "NTFY requires X and O");
      break;
    default:
      break;
  }
  std::ostringstream out;
  out << to_string(cmd.verb) << " " << cmd.transaction_id << " "
      << cmd.endpoint_id << " MGCP 1.0\r\n";
  return append_params_and_sdp(out, cmd.params, cmd.sdp);
}

Result<std::string, MgcpSerializeError> serialize_mgcp(const MgcpResponse& rsp) {
  if (rsp.transaction_id < 1 || rsp.transaction_id > kMgcpTxIdMax)
    return make_err(MgcpSerializeError::InvariantViolation,
                    "transaction id out of range");
  if (rsp.code < 0 || rsp.code > 999)
    return make_err(MgcpSerializeError::InvariantViolation, "bad code");
  std::ostringstream out;
  out << rsp.code << " " << rsp.transaction_id;
  if (!rsp.comment.empty()) out << " " << rsp.comment;
  out << "\r\n";
  return append_params_and_sdp(out, rsp.params, rsp.sdp);
}

}  // namespace jcall
