#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <sstream>

#include <json.hpp>

#include "listrank/error.hpp"
#include "listrank/metrics.hpp"
#include "listrank/window_engine.hpp"
#include "test_support.hpp"

using namespace listrank;
using namespace listrank::window_engine;
using listrank::testing::make_list;

namespace {

using Starts = std::vector<std::size_t>;

class FailingBackend : public backends::ListwiseBackend {
public:
  backends::Capabilities capabilities() const override {
    return {"failing", 100};
  }
  std::string rank_window(const backends::WindowRequest &) const override {
    throw BackendError("unavailable");
  }
};

class GarbageBackend : public backends::ListwiseBackend {
public:
  backends::Capabilities capabilities() const override {
    return {"garbage", 100};
  }
  std::string rank_window(const backends::WindowRequest &) const override {
    return "I cannot rank these.";
  }
};

// Fails every other call, starting with the first.
class FlakyBackend : public backends::ListwiseBackend {
public:
  backends::Capabilities capabilities() const override {
    return {"flaky", 100};
  }
  std::string rank_window(const backends::WindowRequest &r) const override {
    if (calls_++ % 2 == 0)
      throw BackendError("blip");
    return backends::IdentityBackend().rank_window(r);
  }
  mutable std::atomic<int> calls_{0};
};

// Reverses every window and records the prompts it saw.
class ReverseBackend : public backends::ListwiseBackend {
public:
  backends::Capabilities capabilities() const override {
    return {"reverse", 100};
  }
  std::string rank_window(const backends::WindowRequest &r) const override {
    prompts.emplace_back(r.prompt);
    std::vector<int> order;
    for (std::size_t i = r.items.size(); i > 0; --i)
      order.push_back(static_cast<int>(i));
    return prompting::render_completion(Permutation(order));
  }
  mutable std::vector<std::string> prompts;
};

std::vector<std::string> ids_of(const RankedList &l) {
  std::vector<std::string> ids;
  for (const auto &e : l.entries)
    ids.push_back(e.passage_id);
  return ids;
}

// Stable grade sort of the first-stage order.
std::vector<std::string> ideal_order(const RankedList &l, const Qrels &q) {
  auto ids = ids_of(l);
  std::stable_sort(ids.begin(), ids.end(),
                   [&](const std::string &a, const std::string &b) {
                     return q.grade(l.query_id, a).value_or(0) >
                            q.grade(l.query_id, b).value_or(0);
                   });
  return ids;
}

RerankOptions options_for(std::size_t n, std::size_t m, std::size_t passes = 1) {
  RerankOptions o;
  o.window = {n, m, passes};
  return o;
}

} // namespace

TEST_CASE("window start schedule") {
  CHECK(window_starts(100, {20, 10, 1}) ==
        Starts{80, 70, 60, 50, 40, 30, 20, 10, 0});
  CHECK(window_starts(15, {20, 10, 1}) == Starts{0});
  CHECK(window_starts(20, {20, 10, 1}) == Starts{0});
  CHECK(window_starts(25, {20, 10, 1}) == Starts{5, 0});
  CHECK(window_starts(100, {20, 15, 1}) == Starts{80, 65, 50, 35, 20, 5, 0});
  CHECK(window_starts(1, {2, 1, 1}) == Starts{0});
  CHECK(window_starts(0, {20, 10, 1}).empty());
}

TEST_CASE("property: windows cover every position and stay in bounds") {
  for (std::size_t k = 1; k <= 120; ++k)
    for (std::size_t n = 2; n <= 25; ++n)
      for (std::size_t m = 1; m < n; ++m) {
        auto starts = window_starts(k, {n, m, 1});
        REQUIRE(!starts.empty());
        CHECK(starts.back() == 0);
        CHECK(starts.front() == (k > n ? k - n : 0));
        std::vector<int> covered(k, 0);
        for (std::size_t i = 0; i < starts.size(); ++i) {
          if (i > 0) {
            CHECK(starts[i] < starts[i - 1]);
            CHECK(starts[i - 1] - starts[i] <= m);
          }
          for (std::size_t p = starts[i]; p < std::min(starts[i] + n, k); ++p)
            covered[p] = 1;
        }
        CHECK(std::count(covered.begin(), covered.end(), 1) ==
              static_cast<std::ptrdiff_t>(k));
      }
}

TEST_CASE("window config validation") {
  CHECK_THROWS_AS(window_starts(10, {1, 1, 1}), Error);
  CHECK_THROWS_AS(window_starts(10, {20, 20, 1}), Error);
  CHECK_THROWS_AS(window_starts(10, {20, 0, 1}), Error);
  CHECK_THROWS_AS(window_starts(10, {20, 10, 0}), Error);
}

TEST_CASE("run tag names backend and config") {
  CHECK(run_tag(backends::IdentityBackend(), {20, 10, 1}) ==
        "identity.n20.m10.p1");
}

TEST_CASE("identity backend is a fixed point") {
  backends::IdentityBackend identity;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto s = make_list(seed, 1 + seed * 7);
    for (std::size_t passes = 1; passes <= 2; ++passes) {
      auto r = rerank(identity, s.list, options_for(7, 3, passes));
      CHECK(ids_of(r.list) == ids_of(s.list));
      CHECK(r.trace.fallback_count == 0);
      CHECK_FALSE(r.trace.failed);
      const auto k = s.list.entries.size();
      for (std::size_t i = 0; i < k; ++i) {
        CHECK(r.list.entries[i].rank == static_cast<int>(i + 1));
        CHECK(r.list.entries[i].score == static_cast<double>(k - i));
      }
      CHECK(r.list.tag == "identity.n7.m3.p" + std::to_string(passes));
    }
  }
}

TEST_CASE("property: reranking conserves the id multiset") {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto k = 1 + rng.below(150);
    const auto n = 2 + rng.below(30);
    const auto m = 1 + rng.below(n - 1);
    auto s = make_list(rng(), k, k / 3);
    backends::OracleBackend noisy(std::make_shared<const Qrels>(s.qrels),
                                  {0.5, rng()});
    auto r = rerank(noisy, s.list, options_for(n, m, 1 + rng.below(2)));
    auto before = ids_of(s.list), after = ids_of(r.list);
    std::sort(before.begin(), before.end());
    std::sort(after.begin(), after.end());
    CHECK(before == after);
    CHECK_NOTHROW(r.list.validate());
  }
}

TEST_CASE("perfect oracle recovers the top ten at the default config") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto s = make_list(seed, 100, 10 + seed % 20);
    backends::OracleBackend oracle(std::make_shared<const Qrels>(s.qrels), {});
    auto r = rerank(oracle, s.list, RerankOptions{});
    auto got = ids_of(r.list), want = ideal_order(s.list, s.qrels);
    got.resize(10);
    want.resize(10);
    CHECK(got == want);
  }
}

TEST_CASE("property: one perfect-oracle pass fixes the top n-m") {
  SplitMix64 rng(11);
  for (int trial = 0; trial < 400; ++trial) {
    const auto k = 1 + rng.below(200);
    const auto n = 2 + rng.below(25);
    const auto m = 1 + rng.below(n - 1);
    auto s = make_list(rng(), k, rng.below(k + 1));
    backends::OracleBackend oracle(std::make_shared<const Qrels>(s.qrels), {});
    auto r = rerank(oracle, s.list, options_for(n, m));
    const auto keep = std::min(n - m, k);
    auto got = ids_of(r.list), want = ideal_order(s.list, s.qrels);
    got.resize(keep);
    want.resize(keep);
    CHECK(got == want);
  }
}

TEST_CASE("adversarial input: relevant passages at the bottom rise to the top") {
  RankedList list{"q", {}, "first"};
  std::vector<Judgment> js;
  for (int i = 0; i < 100; ++i) {
    list.entries.push_back({"d" + std::to_string(i), i + 1, 100.0 - i});
    if (i >= 90)
      js.push_back({"q", "d" + std::to_string(i), 1});
  }
  backends::OracleBackend oracle(std::make_shared<const Qrels>(js), {});
  auto r = rerank(oracle, list, RerankOptions{});
  for (int i = 0; i < 10; ++i)
    CHECK(r.list.entries[i].passage_id == "d" + std::to_string(90 + i));
}

TEST_CASE("windows see the current working order") {
  RankedList list{"q", {}, "first"};
  for (int i = 0; i < 6; ++i)
    list.entries.push_back({"d" + std::to_string(i), i + 1, 6.0 - i});
  ReverseBackend reverse;
  auto r = rerank(reverse, list, options_for(4, 2));
  // windows [2,6) then [0,4): d0 d1 d5 d4 d3 d2 -> d4 d5 d1 d0 d3 d2
  CHECK(ids_of(r.list) ==
        std::vector<std::string>{"d4", "d5", "d1", "d0", "d3", "d2"});
  REQUIRE(r.trace.windows.size() == 2);
  CHECK(r.trace.windows[0].start == 2);
  CHECK(r.trace.windows[0].ids_before ==
        std::vector<std::string>{"d2", "d3", "d4", "d5"});
  CHECK(r.trace.windows[1].start == 0);
  CHECK(r.trace.windows[1].ids_before ==
        std::vector<std::string>{"d0", "d1", "d5", "d4"});
  CHECK(r.trace.windows[1].permutation == std::vector<int>{4, 3, 2, 1});
  CHECK(r.trace.original[0].score == 6.0);
}

TEST_CASE("prompts carry query and passage text when available") {
  Corpus corpus(std::vector<Passage>{{"a", "Alpha", "first body"}, {"b", "", "second body"}});
  QuerySet queries(std::vector<Query>{{"q", "what is alpha"}});
  RankedList list{"q", {{"a", 1, 2.0}, {"b", 2, 1.0}}, "first"};
  ReverseBackend reverse;
  auto r = rerank(reverse, list, options_for(20, 10), {&corpus, &queries});
  REQUIRE(reverse.prompts.size() == 1);
  const auto &prompt = reverse.prompts[0];
  CHECK(prompt.find("what is alpha") != std::string::npos);
  CHECK(prompt.find("[1] Alpha first body") != std::string::npos);
  CHECK(prompt.find("[2]  second body") != std::string::npos);

  RankedList stray{"q", {{"a", 1, 2.0}, {"zz", 2, 1.0}}, "first"};
  auto f = rerank(reverse, stray, options_for(20, 10), {&corpus, &queries});
  CHECK(f.trace.failed);
  CHECK(f.trace.windows[0].error.find("zz") != std::string::npos);
}

TEST_CASE("failing windows fall back to their current order") {
  auto s = make_list(3, 50);
  for (const backends::ListwiseBackend *b :
       std::initializer_list<const backends::ListwiseBackend *>{
           new FailingBackend, new GarbageBackend}) {
    std::unique_ptr<const backends::ListwiseBackend> owner(b);
    auto r = rerank(*b, s.list, RerankOptions{});
    CHECK(ids_of(r.list) == ids_of(s.list));
    CHECK(r.trace.fallback_count == 4);
    CHECK(r.trace.failed);
    for (const auto &w : r.trace.windows) {
      CHECK(w.fallback);
      CHECK_FALSE(w.error.empty());
      CHECK(w.permutation == Permutation::identity(w.ids_before.size()).order());
    }
  }
}

TEST_CASE("retry policy calls the backend again before falling back") {
  auto s = make_list(4, 30);
  FlakyBackend flaky;
  auto keep = rerank(flaky, s.list, options_for(20, 10));
  CHECK(keep.trace.fallback_count == 1); // calls: fail, ok
  FlakyBackend flaky2;
  auto options = options_for(20, 10);
  options.fallback = FallbackPolicy::retry_then_keep;
  auto retry = rerank(flaky2, s.list, options);
  CHECK(retry.trace.fallback_count == 0);
  CHECK(flaky2.calls_ == 4);
}

TEST_CASE("oversized windows fall back instead of calling the backend") {
  auto s = make_list(1, 150);
  auto r = rerank(backends::IdentityBackend(), s.list, options_for(120, 10));
  CHECK(r.trace.fallback_count == r.trace.windows.size());
}

TEST_CASE("rerank_run isolates failures per query") {
  auto a = make_list(1, 40, 10, "qa");
  auto b = make_list(2, 40, 10, "qb");
  Run run{a.list, b.list};

  auto ok = rerank_run(backends::IdentityBackend(), run, RerankOptions{}, {}, 2);
  REQUIRE(ok.run.size() == 2);
  CHECK(ok.run[0].query_id == "qa");
  CHECK(ids_of(ok.run[1]) == ids_of(b.list));
  CHECK(ok.run[1].tag == "identity.n20.m10.p1");
  CHECK(ok.failed_queries == 0);

  auto bad = rerank_run(FailingBackend(), run, RerankOptions{});
  CHECK(bad.failed_queries == 2);
  CHECK(ids_of(bad.run[0]) == ids_of(a.list));
  CHECK_THROWS_AS(rerank(FailingBackend(), RankedList{"q", {}, "t"},
                         RerankOptions{}),
                  Error);
}

TEST_CASE("rerank_run output does not depend on the worker count") {
  Run run;
  std::vector<Judgment> js;
  for (int q = 0; q < 12; ++q) {
    auto s = make_list(q, 100, 15, "q" + std::to_string(q));
    run.push_back(s.list);
    auto v = s.qrels.to_vector();
    js.insert(js.end(), v.begin(), v.end());
  }
  backends::OracleBackend noisy(std::make_shared<const Qrels>(js), {0.3, 9});
  auto one = rerank_run(noisy, run, RerankOptions{}, {}, 1);
  auto four = rerank_run(noisy, run, RerankOptions{}, {}, 4);
  CHECK(listrank::testing::run_to_string(one.run) ==
        listrank::testing::run_to_string(four.run));
  std::ostringstream t1, t4;
  write_trace(one, noisy, RerankOptions{}, t1);
  write_trace(four, noisy, RerankOptions{}, t4);
  CHECK(t1.str() == t4.str());
}

TEST_CASE("trace JSON lists windows with permutations") {
  auto s = make_list(8, 25);
  backends::OracleBackend oracle(std::make_shared<const Qrels>(s.qrels), {});
  auto r = rerank_run(oracle, Run{s.list}, RerankOptions{});
  std::ostringstream os;
  write_trace(r, oracle, RerankOptions{}, os);
  auto j = nlohmann::json::parse(os.str());
  CHECK(j["backend"] == "oracle");
  CHECK(j["window"]["size"] == 20);
  auto &q = j["queries"][0];
  CHECK(q["query_id"] == "q");
  CHECK(q["original"].size() == 25);
  REQUIRE(q["windows"].size() == 2);
  CHECK(q["windows"][0]["start"] == 5);
  CHECK(q["windows"][1]["start"] == 0);
  CHECK(q["windows"][0]["permutation"].size() == 20);
}

TEST_CASE("property: mean nDCG@10 does not rise with oracle noise") {
  const std::vector<double> noise{0.0, 0.1, 0.25, 0.5, 1.0};
  std::vector<double> means;
  for (double p : noise) {
    double total = 0.0;
    for (std::uint64_t seed = 0; seed < 150; ++seed) {
      auto s = make_list(1000 + seed, 100, 15);
      backends::OracleBackend oracle(std::make_shared<const Qrels>(s.qrels),
                                     {p, seed});
      auto r = rerank(oracle, s.list, RerankOptions{});
      total += metrics::ndcg_at_k(Run{r.list}, s.qrels, 10).mean;
    }
    means.push_back(total / 150.0);
  }
  CHECK(means[0] == doctest::Approx(1.0));
  for (std::size_t i = 1; i < means.size(); ++i)
    CHECK(means[i] <= means[i - 1] + 0.01);
  CHECK(means.back() < means.front());
}
