#include <doctest.h>

#include "listrank/error.hpp"
#include "listrank/prompting.hpp"
#include "listrank/rank_parser.hpp"
#include "test_support.hpp"

using namespace listrank;
using listrank::prompting::render_completion;
using listrank::rank_parser::parse;

namespace {

std::string trim(const std::string &s) {
  auto b = s.find_first_not_of(" \t\n\r\v\f");
  if (b == std::string::npos)
    return "";
  auto e = s.find_last_not_of(" \t\n\r\v\f");
  return s.substr(b, e - b + 1);
}

Permutation random_permutation(SplitMix64 &rng, std::size_t n) {
  auto order = Permutation::identity(n).order();
  seeded_shuffle(order, rng);
  return Permutation(order);
}

} // namespace

TEST_CASE("permutation invariants") {
  CHECK(Permutation::is_valid(std::vector<int>{2, 1, 3}));
  CHECK_FALSE(Permutation::is_valid(std::vector<int>{2, 2, 1}));
  CHECK_FALSE(Permutation::is_valid(std::vector<int>{0, 1}));
  CHECK_FALSE(Permutation::is_valid(std::vector<int>{1, 3}));
  CHECK_THROWS_AS(Permutation({1, 1}), Error);
  CHECK(Permutation::identity(4).is_identity());
}

TEST_CASE("well-formed completion parses without repair") {
  auto r = parse("[4] > [5] > [2] > [3] > [1]", 5);
  CHECK(r.permutation.order() == std::vector<int>{4, 5, 2, 3, 1});
  CHECK_FALSE(r.repaired);
  CHECK(r.anomalies.total() == 0);
}

TEST_CASE("surrounding whitespace is not a repair") {
  auto r = parse("  \n[2] > [1]\n", 2);
  CHECK_FALSE(r.repaired);
  CHECK(r.permutation.order() == std::vector<int>{2, 1});
}

TEST_CASE("duplicates dropped and missing appended") {
  auto r = parse("[2] > [2] > [1]", 3);
  CHECK(r.permutation.order() == std::vector<int>{2, 1, 3});
  CHECK(r.anomalies.duplicate == 1);
  CHECK(r.anomalies.missing == 1);
  CHECK(r.anomalies.out_of_range == 0);
  CHECK(r.anomalies.garbage_text == 0);
  CHECK(r.repaired);
}

TEST_CASE("hand trace: chatter and out-of-range identifiers") {
  // Digits in order: 7, 1, 9. No repeats. 7 and 9 fall outside [1, 3],
  // leaving (1); 2 and 3 are appended. The "Sure! Ranking: " prefix is one
  // stretch of garbage.
  auto r = parse("Sure! Ranking: [7] > [1] > [9]", 3);
  CHECK(r.permutation.order() == std::vector<int>{1, 2, 3});
  CHECK(r.anomalies.out_of_range == 2);
  CHECK(r.anomalies.missing == 2);
  CHECK(r.anomalies.duplicate == 0);
  CHECK(r.anomalies.garbage_text == 1);
  CHECK(r.repaired);
}

TEST_CASE("bare digits and odd separators are garbage but still used") {
  auto r = parse("3 > 1 > 2", 3);
  CHECK(r.permutation.order() == std::vector<int>{3, 1, 2});
  CHECK(r.anomalies.garbage_text >= 1);
  CHECK(r.repaired);
  auto s = parse("[3][1] , [2]", 3);
  CHECK(s.permutation.order() == std::vector<int>{3, 1, 2});
  CHECK(s.anomalies.garbage_text == 2);
  auto z = parse("[01] > [2]", 2);
  CHECK(z.permutation.order() == std::vector<int>{1, 2});
  CHECK(z.repaired);
}

TEST_CASE("multi-digit identifiers parse greedily") {
  std::string text;
  for (int i = 100; i >= 1; --i)
    text += "[" + std::to_string(i) + "]" + (i > 1 ? " > " : "");
  auto r = parse(text, 100);
  CHECK_FALSE(r.repaired);
  CHECK(r.permutation.order().front() == 100);
  CHECK(r.permutation.order().back() == 1);
  auto big = parse("[99999999999999999999] > [1]", 2);
  CHECK(big.anomalies.out_of_range == 1);
  CHECK(big.permutation.order() == std::vector<int>{1, 2});
}

TEST_CASE("unusable completions are errors") {
  CHECK_THROWS_AS(parse("", 3), ParseError);
  CHECK_THROWS_AS(parse("I cannot rank these.", 3), ParseError);
  CHECK_THROWS_AS(parse("[4] > [5]", 3), ParseError);
  CHECK_THROWS_AS(parse("[1]", 0), Error);
}

TEST_CASE("to_ranked_list applies the permutation") {
  std::vector<std::string> window{"a", "b", "c"};
  CHECK(rank_parser::to_ranked_list(Permutation({3, 1, 2}), window) ==
        std::vector<std::string>{"c", "a", "b"});
  CHECK(rank_parser::to_ranked_list(Permutation::identity(3), window) ==
        window);
  std::vector<std::string> two{"a", "b"};
  CHECK_THROWS_AS(rank_parser::to_ranked_list(Permutation({3, 1, 2}), two),
                  Error);
}

TEST_CASE("property: a permutation followed by its inverse restores order") {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = 1 + rng.below(30);
    std::vector<std::string> window;
    for (std::size_t i = 0; i < n; ++i)
      window.push_back("p" + std::to_string(i));
    auto p = random_permutation(rng, n);
    auto moved = p.apply(std::span<const std::string>(window));
    auto back = p.inverse().apply(std::span<const std::string>(moved));
    CHECK(back == window);
  }
}

TEST_CASE("property: random bytes always yield a valid permutation") {
  SplitMix64 rng(99);
  for (int trial = 0; trial < 20000; ++trial) {
    const auto n = 1 + rng.below(20);
    std::string text;
    const auto len = rng.below(60);
    for (std::size_t i = 0; i < len; ++i)
      text += static_cast<char>(rng.below(256));
    const auto pos = rng.below(text.size() + 1);
    // Guarantee one in-range token with non-digit neighbours.
    text.insert(pos, " " + std::to_string(1 + rng.below(n)) + " ");
    auto r = parse(text, n);
    REQUIRE(r.permutation.size() == n);
    REQUIRE(Permutation::is_valid(r.permutation.order()));
    CHECK(r.repaired == (r.anomalies.total() > 0));
    CHECK(r.repaired == (trim(text) != render_completion(r.permutation)));
    // idempotent through render
    CHECK(parse(render_completion(r.permutation), n).permutation ==
          r.permutation);
  }
}

TEST_CASE("property: parse inverts render_completion") {
  SplitMix64 rng(123);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto n = 1 + rng.below(100);
    auto p = random_permutation(rng, n);
    auto r = parse(render_completion(p), n);
    CHECK(r.permutation == p);
    CHECK_FALSE(r.repaired);
  }
}
