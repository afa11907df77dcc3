#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <string>

#include "jcall/media/digitmap.hpp"
#include "support/digitmap_oracle.hpp"

using namespace jcall;

namespace {

DigitMap must_parse(std::string_view text) {
  auto r = parse_digitmap(text);
  REQUIRE(r.ok());
  return r.take();
}

MatchKind kind_of(std::string_view map_text, std::string_view digits) {
  return digitmap_match(must_parse(map_text), digits).kind;
}

}  // namespace

TEST_CASE("maps round-trip through parse and serialize modulo whitespace") {
  CHECK(serialize_digitmap(must_parse("(xxxx#)")) == "(xxxx#)");
  CHECK(serialize_digitmap(must_parse("x.#")) == "x.#");
  CHECK(serialize_digitmap(must_parse("(xx|xxx)")) == "(xx|xxx)");
  CHECK(serialize_digitmap(must_parse("( xx | x. # )")) == "(xx|x.#)");
  CHECK(serialize_digitmap(must_parse("0T")) == "0T");
  CHECK(serialize_digitmap(must_parse("(*xx|#|9x.T)")) == "(*xx|#|9x.T)");
}

TEST_CASE("malformed maps are rejected") {
  for (const char* bad : {"", "(", "(x", "x)", "a", ".x", "x..", "T5", "()",
                          "(x||y)", "T.", "(|x)"}) {
    auto r = parse_digitmap(bad);
    CHECK_FALSE(r.ok());
    if (!r.ok()) CHECK(r.error() == DigitMapError::MalformedDigitMap);
  }
}

TEST_CASE("whole-string wildcard match is full") {
  auto result = digitmap_match(must_parse("xxxx"), "1234");
  CHECK(result.kind == MatchKind::Full);
  CHECK(result.matched == "1234");
}

TEST_CASE("a string that completes one alternative but extends another stays partial") {
  CHECK(kind_of("(xx|xxx)", "12") == MatchKind::Partial);
  CHECK(kind_of("(xx|xxx)", "123") == MatchKind::Full);
  CHECK(kind_of("(x|xx)", "1") == MatchKind::Partial);
  CHECK(kind_of("(x|xx)", "12") == MatchKind::Full);
}

TEST_CASE("repetition followed by a terminator matches greedily typed strings") {
  auto result = digitmap_match(must_parse("x.#"), "42#");
  CHECK(result.kind == MatchKind::Full);
  CHECK(result.matched == "42#");
  CHECK(kind_of("x.#", "42") == MatchKind::Partial);
  CHECK(kind_of("x.#", "") == MatchKind::Partial);
  CHECK(kind_of("x.#", "#") == MatchKind::Full);
  CHECK(kind_of("x.#", "42#1") == MatchKind::None);
}

TEST_CASE("dead strings report none") {
  CHECK(kind_of("5xxx", "1") == MatchKind::None);
  CHECK(kind_of("(123|456)", "7") == MatchKind::None);
  CHECK(kind_of("xxxx", "12345") == MatchKind::None);
  CHECK(kind_of("xx", "1*") == MatchKind::None);
}

TEST_CASE("timer tokens hold the match open until expiry") {
  DigitMap map = must_parse("xxxxT");
  CHECK(digitmap_match(map, "1234").kind == MatchKind::Partial);
  CHECK(digitmap_timer_accepts(map, "1234"));
  CHECK(digitmap_match(map, "123").kind == MatchKind::Partial);
  CHECK_FALSE(digitmap_timer_accepts(map, "123"));

  DigitMap open_ended = must_parse("x.T");
  CHECK(digitmap_match(open_ended, "907").kind == MatchKind::Partial);
  CHECK(digitmap_timer_accepts(open_ended, "907"));
  CHECK(digitmap_timer_accepts(open_ended, ""));
}

TEST_CASE("timer resolves longest-match ambiguity") {
  DigitMap map = must_parse("(xx|xxxx)");
  CHECK(digitmap_match(map, "12").kind == MatchKind::Partial);
  CHECK(digitmap_timer_accepts(map, "12"));
  CHECK_FALSE(digitmap_timer_accepts(map, "123"));
  CHECK(digitmap_match(map, "1234").kind == MatchKind::Full);
}

namespace {

std::string random_digits(std::mt19937& rng, std::size_t max_len) {
  static const char alphabet[] = "0123456789*#";
  std::uniform_int_distribution<std::size_t> len_dist(0, max_len);
  std::uniform_int_distribution<int> char_dist(0, 11);
  std::string out;
  std::size_t len = len_dist(rng);
  for (std::size_t i = 0; i < len; ++i)
    out.push_back(alphabet[char_dist(rng)]);
  return out;
}

DigitMap random_map(std::mt19937& rng) {
  std::uniform_int_distribution<int> alt_count_dist(1, 4);
  std::uniform_int_distribution<int> atom_count_dist(1, 5);
  std::uniform_int_distribution<int> pct(0, 99);
  std::uniform_int_distribution<int> digit_dist(0, 9);
  DigitMap map;
  int alts = alt_count_dist(rng);
  map.parenthesized = alts > 1 || pct(rng) < 50;
  for (int a = 0; a < alts; ++a) {
    DigitMapAlternative alt;
    int atoms = atom_count_dist(rng);
    for (int i = 0; i < atoms; ++i) {
      DigitMapAtom atom;
      int roll = pct(rng);
      if (roll < 40) {
        atom.kind = DigitMapAtom::Kind::Literal;
        atom.literal = static_cast<char>('0' + digit_dist(rng));
      } else if (roll < 75) {
        atom.kind = DigitMapAtom::Kind::Wildcard;
      } else if (roll < 85) {
        atom.kind = DigitMapAtom::Kind::Literal;
        atom.literal = '*';
      } else {
        atom.kind = DigitMapAtom::Kind::Literal;
        atom.literal = '#';
      }
      atom.repeated = pct(rng) < 25;
      alt.push_back(atom);
    }
    if (pct(rng) < 20) alt.push_back({DigitMapAtom::Kind::Timer, 0, false});
    map.alternatives.push_back(std::move(alt));
  }
  return map;
}

// Digits that walk one alternative of the map, possibly truncated or dirtied,
// so the sample is rich in near-matches rather than mostly dead strings.
std::string guided_digits(std::mt19937& rng, const DigitMap& map) {
  std::uniform_int_distribution<std::size_t> alt_dist(
      0, map.alternatives.size() - 1);
  std::uniform_int_distribution<int> digit_dist(0, 9);
  std::uniform_int_distribution<int> reps_dist(0, 3);
  std::uniform_int_distribution<int> pct(0, 99);
  const DigitMapAlternative& alt = map.alternatives[alt_dist(rng)];
  std::string out;
  for (const DigitMapAtom& atom : alt) {
    if (atom.kind == DigitMapAtom::Kind::Timer) break;
    int reps = atom.repeated ? reps_dist(rng) : 1;
    for (int i = 0; i < reps && out.size() < 8; ++i) {
      out.push_back(atom.kind == DigitMapAtom::Kind::Wildcard
                        ? static_cast<char>('0' + digit_dist(rng))
                        : atom.literal);
    }
  }
  if (!out.empty() && pct(rng) < 30) {
    std::uniform_int_distribution<std::size_t> cut(0, out.size() - 1);
    out.resize(cut(rng));
  }
  if (pct(rng) < 20 && out.size() < 8)
    out.push_back(static_cast<char>('0' + digit_dist(rng)));
  return out;
}

}  // namespace

TEST_CASE("position matcher agrees with the brute-force expansion oracle") {
  std::mt19937 rng(424243);
  std::uniform_int_distribution<int> pct(0, 99);
  for (int i = 0; i < 1000; ++i) {
    DigitMap map = random_map(rng);
    std::string digits =
        pct(rng) < 50 ? guided_digits(rng, map) : random_digits(rng, 8);
    CAPTURE(serialize_digitmap(map));
    CAPTURE(digits);
    MatchKind expected = oracle::match_kind(map, digits);
    MatchResult got = digitmap_match(map, digits);
    CHECK(got.kind == expected);
    if (got.kind == MatchKind::Full) CHECK(got.matched == digits);
    CHECK(digitmap_timer_accepts(map, digits) ==
          oracle::timer_accepts(map, digits));
  }
}
