#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "jcall/util/result.hpp"

namespace jcall {

enum class SipMethod { Invite, Ack, Bye, Other };

const char* to_string(SipMethod m);
SipMethod sip_method_from(std::string_view token);

/// One SIP datagram, request or response. Header order is preserved and
/// significant for serialization. Content-Length never appears in `headers`:
/// it is recomputed on serialize and checked and stripped on parse.
struct SipMessage {
  enum class Kind { Request, Response };

  Kind kind = Kind::Request;
  SipMethod method = SipMethod::Invite;  // requests: start line; responses: CSeq
  std::string method_text = "INVITE";
  std::string request_uri;  // requests only
  int status = 0;           // responses only
  std::string reason;       // responses only
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;

  bool is_request() const { return kind == Kind::Request; }
  bool is_response() const { return kind == Kind::Response; }

  const std::string* header(std::string_view name) const;
  void set_header(std::string_view name, std::string value);
  void add_header(std::string_view name, std::string value);

  std::string call_id() const;

  struct CSeq {
    std::uint32_t number = 0;
    std::string method;
  };
  std::optional<CSeq> cseq() const;

  // Extracts ;tag= from From/To, empty if absent.
  std::string from_tag() const;
  std::string to_tag() const;

  static SipMessage request(SipMethod m, std::string uri);
  static SipMessage response_to(const SipMessage& req, int status);

  bool operator==(const SipMessage&) const = default;
};

const char* default_reason(int status);

enum class SipParseError {
  EmptyDatagram,
  MalformedStartLine,
  MalformedHeader,
  MissingMandatoryHeader,
  BodyLengthMismatch,
};

enum class SipSerializeError { InvariantViolation };

Result<SipMessage, SipParseError> parse_sip(std::string_view datagram);
Result<std::string, SipSerializeError> serialize_sip(const SipMessage& msg);

}  // namespace jcall
