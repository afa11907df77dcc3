#include "jcall/media/digitmap.hpp"

#include <algorithm>
#include <cctype>

namespace jcall {

namespace {

bool is_digit_char(char c) { return c >= '0' && c <= '9'; }
bool is_dial_char(char c) { return is_digit_char(c) || c == '*' || c == '#'; }

bool atom_consumes(const DigitMapAtom& atom, char digit) {
  switch (atom.kind) {
    case DigitMapAtom::Kind::Literal: return atom.literal == digit;
    case DigitMapAtom::Kind::Wildcard: return is_digit_char(digit);
    case DigitMapAtom::Kind::Timer: return false;
  }
  return false;
}

// A match position: next atom to satisfy within one alternative.
struct Pos {
  std::size_t alt;
  std::size_t at;
  bool operator==(const Pos&) const = default;
};

void add_with_closure(const DigitMap& map, Pos p, std::vector<Pos>& out) {
  const DigitMapAlternative& alt = map.alternatives[p.alt];
  while (true) {
    if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
    if (p.at >= alt.size() || !alt[p.at].repeated) break;
    p.at += 1;  // a repeated token may be skipped outright
  }
}

std::vector<Pos> start_positions(const DigitMap& map) {
  std::vector<Pos> out;
  for (std::size_t a = 0; a < map.alternatives.size(); ++a)
    add_with_closure(map, {a, 0}, out);
  return out;
}

std::vector<Pos> advance(const DigitMap& map, const std::vector<Pos>& in,
                         char digit) {
  std::vector<Pos> out;
  for (const Pos& p : in) {
    const DigitMapAlternative& alt = map.alternatives[p.alt];
    if (p.at >= alt.size()) continue;
    const DigitMapAtom& atom = alt[p.at];
    if (!atom_consumes(atom, digit)) continue;
    add_with_closure(map, {p.alt, atom.repeated ? p.at : p.at + 1}, out);
  }
  return out;
}

struct Standing {
  bool digit_full = false;   // some alternative consumed exactly the input
  bool timer_full = false;   // some alternative needs only the timer
  bool extensible = false;   // some alternative can still advance somehow
};

Standing stand(const DigitMap& map, const std::vector<Pos>& positions) {
  Standing s;
  for (const Pos& p : positions) {
    const DigitMapAlternative& alt = map.alternatives[p.alt];
    if (p.at >= alt.size()) {
      s.digit_full = true;
      continue;
    }
    s.extensible = true;
    if (alt[p.at].kind == DigitMapAtom::Kind::Timer) s.timer_full = true;
  }
  return s;
}

// Empty result covers both a dead match and malformed input digits.
std::vector<Pos> consume_all(const DigitMap& map, std::string_view digits) {
  std::vector<Pos> out = start_positions(map);
  for (char d : digits) {
    if (!is_dial_char(d)) return {};
    out = advance(map, out, d);
    if (out.empty()) break;
  }
  return out;
}

}  // namespace

const char* to_string(MatchKind kind) {
  switch (kind) {
    case MatchKind::Full: return "full";
    case MatchKind::Partial: return "partial";
    case MatchKind::None: return "none";
  }
  return "?";
}

Result<DigitMap, DigitMapError> parse_digitmap(std::string_view text) {
  std::string compact;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) compact.push_back(c);
  }
  if (compact.empty()) return make_err(DigitMapError::MalformedDigitMap, "empty");

  DigitMap map;
  std::string_view body = compact;
  if (body.front() == '(') {
    if (body.back() != ')' || body.size() < 3)
      return make_err(DigitMapError::MalformedDigitMap, "unbalanced parens");
    map.parenthesized = true;
    body = body.substr(1, body.size() - 2);
  }

  DigitMapAlternative current;
  auto flush = [&]() -> bool {
    if (current.empty()) return false;
    map.alternatives.push_back(std::move(current));
    current.clear();
    return true;
  };
  for (char c : body) {
    if (c == '|') {
      if (!flush()) return make_err(DigitMapError::MalformedDigitMap,
                                    "empty alternative");
      continue;
    }
    if (c == '.') {
      if (current.empty() || current.back().repeated ||
          current.back().kind == DigitMapAtom::Kind::Timer)
        return make_err(DigitMapError::MalformedDigitMap,
                        "'.' needs a repeatable token before it");
      current.back().repeated = true;
      continue;
    }
    if (!current.empty() &&
        current.back().kind == DigitMapAtom::Kind::Timer)
      return make_err(DigitMapError::MalformedDigitMap,
                      "timer must end its alternative");
    DigitMapAtom atom;
    if (c == 'x' || c == 'X') {
      atom.kind = DigitMapAtom::Kind::Wildcard;
    } else if (c == 'T') {
      atom.kind = DigitMapAtom::Kind::Timer;
    } else if (is_dial_char(c)) {
      atom.kind = DigitMapAtom::Kind::Literal;
      atom.literal = c;
    } else {
      return make_err(DigitMapError::MalformedDigitMap,
                      std::string("bad character '") + c + "'");
    }
    current.push_back(atom);
  }
  if (!flush())
    return make_err(DigitMapError::MalformedDigitMap, "empty alternative");
  return map;
}

std::string serialize_digitmap(const DigitMap& map) {
  std::string out;
  if (map.parenthesized) out.push_back('(');
  bool first = true;
  for (const DigitMapAlternative& alt : map.alternatives) {
    if (!first) out.push_back('|');
    first = false;
    for (const DigitMapAtom& atom : alt) {
      switch (atom.kind) {
        case DigitMapAtom::Kind::Literal: out.push_back(atom.literal); break;
        case DigitMapAtom::Kind::Wildcard: out.push_back('x'); break;
        case DigitMapAtom::Kind::Timer: out.push_back('T'); break;
      }
      if (atom.repeated) out.push_back('.');
    }
  }
  if (map.parenthesized) out.push_back(')');
  return out;
}

MatchResult digitmap_match(const DigitMap& map, std::string_view digits) {
  std::vector<Pos> positions = consume_all(map, digits);
  if (positions.empty()) return {MatchKind::None, {}};
  Standing s = stand(map, positions);
  if (s.digit_full && !s.extensible)
    return {MatchKind::Full, std::string(digits)};
  if (s.extensible) return {MatchKind::Partial, {}};
  return {MatchKind::None, {}};
}

bool digitmap_timer_accepts(const DigitMap& map, std::string_view digits) {
  std::vector<Pos> positions = consume_all(map, digits);
  if (positions.empty()) return false;
  Standing s = stand(map, positions);
  return s.digit_full || s.timer_full;
}

}  // namespace jcall
