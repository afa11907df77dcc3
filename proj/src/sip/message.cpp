#include "jcall/sip/message.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

namespace jcall {

namespace {

bool ci_equal(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  }
  return true;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::string tag_of(const std::string* header_value) {
  if (!header_value) return {};
  std::string_view v = *header_value;
  std::size_t pos = v.find(";tag=");
  if (pos == std::string_view::npos) return {};
  std::string_view rest = v.substr(pos + 5);
  std::size_t end = rest.find(';');
  return std::string(rest.substr(0, end));
}

}  // namespace

const char* to_string(SipMethod m) {
  switch (m) {
    case SipMethod::Invite: return "INVITE";
    case SipMethod::Ack: return "ACK";
    case SipMethod::Bye: return "BYE";
    case SipMethod::Other: return "OTHER";
  }
  return "?";
}

SipMethod sip_method_from(std::string_view token) {
  if (token == "INVITE") return SipMethod::Invite;
  if (token == "ACK") return SipMethod::Ack;
  if (token == "BYE") return SipMethod::Bye;
  return SipMethod::Other;
}

const std::string* SipMessage::header(std::string_view name) const {
  for (const auto& [k, v] : headers) {
    if (ci_equal(k, name)) return &v;
  }
  return nullptr;
}

void SipMessage::set_header(std::string_view name, std::string value) {
  for (auto& [k, v] : headers) {
    if (ci_equal(k, name)) {
      v = std::move(value);
      return;
    }
  }
  headers.emplace_back(std::string(name), std::move(value));
}

void SipMessage::add_header(std::string_view name, std::string value) {
  headers.emplace_back(std::string(name), std::move(value));
}

std::string SipMessage::call_id() const {
  const std::string* v = header("Call-ID");
  return v ? *v : std::string();
}

std::optional<SipMessage::CSeq> SipMessage::cseq() const {
  const std::string* v = header("CSeq");
  if (!v) return std::nullopt;
  std::string_view s = trim(*v);
  std::size_t space = s.find(' ');
  if (space == std::string_view::npos) return std::nullopt;
  std::string_view num = s.substr(0, space);
  std::uint32_t n = 0;
  auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), n);
  if (ec != std::errc() || ptr != num.data() + num.size()) return std::nullopt;
  CSeq out;
  out.number = n;
  out.method = std::string(trim(s.substr(space + 1)));
  return out;
}

std::string SipMessage::from_tag() const { return tag_of(header("From")); }
std::string SipMessage::to_tag() const { return tag_of(header("To")); }

SipMessage SipMessage::request(SipMethod m, std::string uri) {
  SipMessage msg;
  msg.kind = Kind::Request;
  msg.method = m;
  msg.method_text = to_string(m);
  msg.request_uri = std::move(uri);
  return msg;
}

SipMessage SipMessage::response_to(const SipMessage& req, int status) {
  SipMessage msg;
  msg.kind = Kind::Response;
  msg.status = status;
  msg.reason = default_reason(status);
  msg.method = req.method;
  msg.method_text = req.method_text;
  for (const auto& [k, v] : req.headers) {
    if (ci_equal(k, "Via") || ci_equal(k, "From") || ci_equal(k, "To") ||
        ci_equal(k, "Call-ID") || ci_equal(k, "CSeq"))
      msg.add_header(k, v);
  }
  return msg;
}

const char* default_reason(int status) {
  switch (status) {
    case 100: return "Trying";
    case 180: return "Ringing";
    case 183: return "Session Progress";
    case 200: return "OK";
    case 400: return "Bad Request";
    case 402: return "Payment Required";
    case 403: return "Forbidden";
    case 404: return "Not Found";
    case 408: return "Request Timeout";
    case 480: return "Temporarily Unavailable";
    case 481: return "Call/Transaction Does Not Exist";
    case 486: return "Busy Here";
    case 500: return "Server Internal Error";
    case 501: return "Not Implemented";
    case 503: return "Service Unavailable";
    case 603: return "Decline";
    default: return "Unknown";
  }
}

Result<SipMessage, SipParseError> parse_sip(std::string_view datagram) {
  if (datagram.empty()) return make_err(SipParseError::EmptyDatagram);

  std::size_t line_end = datagram.find("\r\n");
  std::size_t line_len = line_end;
  std::size_t next = line_end == std::string_view::npos ? datagram.size()
                                                        : line_end + 2;
  if (line_end == std::string_view::npos) {
    line_len = datagram.find('\n');
    if (line_len != std::string_view::npos) next = line_len + 1;
  }
  std::string_view start_line = datagram.substr(
      0, line_len == std::string_view::npos ? datagram.size() : line_len);

  SipMessage msg;
  if (start_line.substr(0, 8) == "SIP/2.0 ") {
    msg.kind = SipMessage::Kind::Response;
    std::string_view rest = start_line.substr(8);
    std::size_t space = rest.find(' ');
    std::string_view code = space == std::string_view::npos
                                ? rest
                                : rest.substr(0, space);
    int status = 0;
    auto [ptr, ec] = std::from_chars(code.data(), code.data() + code.size(), status);
    if (ec != std::errc() || ptr != code.data() + code.size() || status < 100 ||
        status > 699)
      return make_err(SipParseError::MalformedStartLine, "bad status code");
    msg.status = status;
    msg.reason = space == std::string_view::npos
                     ? std::string()
                     : std::string(rest.substr(space + 1));
  } else {
    std::size_t sp1 = start_line.find(' ');
    std::size_t sp2 = sp1 == std::string_view::npos
                          ? std::string_view::npos
                          : start_line.find(' ', sp1 + 1);
    if (sp1 == std::string_view::npos || sp2 == std::string_view::npos)
      return make_err(SipParseError::MalformedStartLine, "expected 3 tokens");
    std::string_view version = start_line.substr(sp2 + 1);
    if (version != "SIP/2.0")
      return make_err(SipParseError::MalformedStartLine, "bad version");
    std::string_view method = start_line.substr(0, sp1);
    std::string_view uri = start_line.substr(sp1 + 1, sp2 - sp1 - 1);
    if (method.empty() || uri.empty())
      return make_err(SipParseError::MalformedStartLine, "empty method or uri");
    msg.kind = SipMessage::Kind::Request;
    msg.method = sip_method_from(method);
    msg.method_text = std::string(method);
    msg.request_uri = std::string(uri);
  }

  // Header block runs to the first blank line.
  std::optional<std::size_t> content_length;
  std::size_t pos = next;
  bool blank_seen = false;
  while (pos < datagram.size()) {
    std::size_t eol = datagram.find('\n', pos);
    std::size_t raw_len =
        eol == std::string_view::npos ? datagram.size() - pos : eol - pos;
    std::string_view line = datagram.substr(pos, raw_len);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = eol == std::string_view::npos ? datagram.size() : eol + 1;
    if (line.empty()) {
      blank_seen = true;
      break;
    }
    std::size_t colon = line.find(':');
    if (colon == std::string_view::npos || colon == 0)
      return make_err(SipParseError::MalformedHeader, std::string(line));
    std::string_view name = trim(line.substr(0, colon));
    std::string_view value = trim(line.substr(colon + 1));
    if (name.empty())
      return make_err(SipParseError::MalformedHeader, std::string(line));
    if (ci_equal(name, "Content-Length")) {
      std::size_t n = 0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), n);
      if (ec != std::errc() || ptr != value.data() + value.size())
        return make_err(SipParseError::MalformedHeader, "bad Content-Length");
      content_length = n;
      continue;
    }
    msg.headers.emplace_back(std::string(name), std::string(value));
  }

  std::string_view body = blank_seen ? datagram.substr(pos) : std::string_view();
  if (content_length) {
    if (body.size() != *content_length)
      return make_err(SipParseError::BodyLengthMismatch,
                      "declared " + std::to_string(*content_length) + " got " +
                          std::to_string(body.size()));
  }
  msg.body = std::string(body);

  for (const char* required : {"Call-ID", "From", "To", "CSeq"}) {
    if (!msg.header(required))
      return make_err(SipParseError::MissingMandatoryHeader, required);
  }

  if (msg.is_response()) {
    auto cs = msg.cseq();
    if (!cs) return make_err(SipParseError::MalformedHeader, "bad CSeq");
    msg.method = sip_method_from(cs->method);
    msg.method_text = cs->method;
  }
  return msg;
}

Result<std::string, SipSerializeError> serialize_sip(const SipMessage& msg) {
  for (const char* required : {"Call-ID", "From", "To", "CSeq"}) {
    if (!msg.header(required))
      return make_err(SipSerializeError::InvariantViolation,
                      std::string("missing ") + required);
  }
  if (msg.header("Content-Length"))
    return make_err(SipSerializeError::InvariantViolation,
                    "Content-Length is derived, not stored");
  if (!msg.body.empty() && !msg.header("Content-Type"))
    return make_err(SipSerializeError::InvariantViolation,
                    "body requires Content-Type");

  std::ostringstream out;
  if (msg.is_request()) {
    if (msg.method_text.empty() || msg.request_uri.empty())
      return make_err(SipSerializeError::InvariantViolation,
                      "request needs method and uri");
    out << msg.method_text << " " << msg.request_uri << " SIP/2.0\r\n";
  } else {
    if (msg.status < 100 || msg.status > 699)
      return make_err(SipSerializeError::InvariantViolation,
                      "status out of range");
    out << "SIP/2.0 " << msg.status;
    if (!msg.reason.empty()) out << " " << msg.reason;
    out << "\r\n";
  }
  for (const auto& [k, v] : msg.headers) out << k << ": " << v << "\r\n";
  out << "Content-Length: " << msg.body.size() << "\r\n\r\n";
  out << msg.body;
  return out.str();
}

}  // namespace jcall
