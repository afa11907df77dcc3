#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "jcall/util/result.hpp"

namespace jcall {

// Pattern grammar for DTMF collection: literal digits plus '*' and '#',
// 'x' for any digit, '.' for zero-or-more of the preceding token, 'T' for
// an inter-digit timer placed at the end of an alternative, and '(a|b)'
// alternation.
struct DigitMapAtom {
  enum class Kind { Literal, Wildcard, Timer };
  Kind kind = Kind::Literal;
  char literal = 0;
  bool repeated = false;
  bool operator==(const DigitMapAtom&) const = default;
};

using DigitMapAlternative = std::vector<DigitMapAtom>;

struct DigitMap {
  std::vector<DigitMapAlternative> alternatives;
  bool parenthesized = false;
  bool operator==(const DigitMap&) const = default;
};

enum class DigitMapError { MalformedDigitMap };

Result<DigitMap, DigitMapError> parse_digitmap(std::string_view text);
std::string serialize_digitmap(const DigitMap& map);

enum class MatchKind { Full, Partial, None };

const char* to_string(MatchKind kind);

struct MatchResult {
  MatchKind kind = MatchKind::None;
  std::string matched;  // set when kind == Full
  bool operator==(const MatchResult&) const = default;
};

// Full: some alternative matches the whole string and none can consume more
// (by digit or timer). Partial: some alternative can still advance. None:
// the string matches nothing and extends nothing.
MatchResult digitmap_match(const DigitMap& map, std::string_view digits);

// Timer expiry resolution: accepted when the digits fully match some
// alternative or complete one whose last token is the timer.
bool digitmap_timer_accepts(const DigitMap& map, std::string_view digits);

}  // namespace jcall
