#include <doctest.h>

#include <sstream>

#include "listrank/corpus_io.hpp"
#include "listrank/error.hpp"
#include "test_support.hpp"

using namespace listrank;
using listrank::testing::TempDir;
using listrank::testing::write_text;

TEST_CASE("jsonl corpus maps fields directly") {
  std::istringstream in(R"({"id":"d1","title":"t","text":"hello world"})"
                        "\n");
  auto passages = read_corpus_jsonl(in);
  REQUIRE(passages.size() == 1);
  CHECK(passages[0] == Passage{"d1", "t", "hello world"});
}

TEST_CASE("jsonl corpus without title gets an empty title") {
  std::istringstream in(R"({"id":"d1","text":"body"})");
  auto passages = read_corpus_jsonl(in);
  REQUIRE(passages.size() == 1);
  CHECK(passages[0].title.empty());
}

TEST_CASE("duplicate passage ids are rejected with the id in the message") {
  std::istringstream in(R"({"id":"d1","text":"a"})"
                        "\n"
                        R"({"id":"d1","text":"b"})"
                        "\n");
  try {
    read_corpus_jsonl(in);
    FAIL("expected an error");
  } catch (const Error &e) {
    CHECK(std::string(e.what()).find("d1") != std::string::npos);
  }
}

TEST_CASE("empty corpus file gives an empty corpus") {
  TempDir dir;
  write_text(dir / "c.jsonl", "");
  CHECK(load_corpus(dir / "c.jsonl").empty());
}

TEST_CASE("malformed corpus line reports its line number") {
  std::istringstream in(R"({"id":"d1","text":"a"})"
                        "\n{not json\n");
  try {
    read_corpus_jsonl(in);
    FAIL("expected an error");
  } catch (const ParseError &e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("empty body is rejected") {
  std::istringstream in(R"({"id":"d1","text":"  "})");
  CHECK_THROWS_AS(read_corpus_jsonl(in), ParseError);
}

TEST_CASE("tsv corpus is chosen by extension") {
  TempDir dir;
  write_text(dir / "c.tsv", "d1\tTitle one\tbody one\nd2\tbody two\n");
  auto passages = load_corpus(dir / "c.tsv");
  REQUIRE(passages.size() == 2);
  CHECK(passages[0] == Passage{"d1", "Title one", "body one"});
  CHECK(passages[1] == Passage{"d2", "", "body two"});
}

TEST_CASE("corpus lookup returns the stored passage") {
  Corpus corpus({{"a", "ta", "body a"}, {"b", "", "body b"}});
  REQUIRE(corpus.find("b"));
  CHECK(*corpus.find("b") == Passage{"b", "", "body b"});
  CHECK(corpus.find("c") == nullptr);
  CHECK_THROWS_AS(Corpus({{"a", "", "x"}, {"a", "", "y"}}), Error);
}

TEST_CASE("queries load from tsv") {
  std::istringstream in("1\twhat is bm25\n2\tlistwise ranking\n");
  QuerySet queries(read_queries(in));
  REQUIRE(queries.find("2"));
  CHECK(queries.find("2")->text == "listwise ranking");
  std::istringstream bad("1 no tab here\n");
  CHECK_THROWS_AS(read_queries(bad), ParseError);
}

TEST_CASE("qrels parse, range and duplicate errors") {
  {
    std::istringstream in("19335 0 d7 2\n");
    auto qrels = read_qrels(in);
    CHECK(qrels.size() == 1);
    CHECK(qrels.grade("19335", "d7") == 2);
    CHECK_FALSE(qrels.grade("19335", "d8").has_value());
  }
  {
    std::istringstream in("19335 0 d7 5\n");
    CHECK_THROWS_AS(read_qrels(in), ParseError);
  }
  {
    std::istringstream in("19335 0 d7 x\n");
    CHECK_THROWS_AS(read_qrels(in), ParseError);
  }
  {
    std::istringstream in("1 0 d7 1\n1 0 d7 1\n");
    CHECK_THROWS_AS(read_qrels(in), ParseError);
  }
  {
    std::istringstream in("1 0 d7\n");
    CHECK_THROWS_AS(read_qrels(in), ParseError);
  }
}

TEST_CASE("run lines become ranked lists") {
  std::istringstream in("q1 Q0 d9 1 14.2 bm25\nq1 Q0 d3 2 11 bm25\n"
                        "q2 Q0 d1 1 3.5 bm25\n");
  auto run = read_run(in);
  REQUIRE(run.size() == 2);
  CHECK(run[0].query_id == "q1");
  CHECK(run[0].tag == "bm25");
  CHECK(run[0].entries[0] == RunEntry{"d9", 1, 14.2});
  CHECK(run[0].entries.size() == 2);
  CHECK(run[1].entries.size() == 1);
}

TEST_CASE("run rank gaps and duplicate ids are errors") {
  std::istringstream gap("q Q0 a 1 3 t\nq Q0 b 2 2 t\nq Q0 c 4 1 t\n");
  CHECK_THROWS_AS(read_run(gap), Error);
  std::istringstream dup("q Q0 a 1 3 t\nq Q0 a 2 2 t\n");
  CHECK_THROWS_AS(read_run(dup), Error);
  std::istringstream increasing("q Q0 a 1 1 t\nq Q0 b 2 2 t\n");
  CHECK_THROWS_AS(read_run(increasing), Error);
  std::istringstream bad_score("q Q0 a 1 nan t\n");
  CHECK_THROWS_AS(read_run(bad_score), ParseError);
}

TEST_CASE("run lines out of rank order are sorted") {
  std::istringstream in("q Q0 b 2 1 t\nq Q0 a 1 2 t\n");
  auto run = read_run(in);
  CHECK(run[0].entries[0].passage_id == "a");
}

TEST_CASE("saved runs use six decimals and normalized whitespace") {
  std::istringstream in("q1\tQ0  d9 1   14.2 bm25\nq1 Q0 d3 2 11 bm25\n");
  std::ostringstream out;
  write_run(read_run(in), out);
  CHECK(out.str() ==
        "q1 Q0 d9 1 14.200000 bm25\nq1 Q0 d3 2 11.000000 bm25\n");
}

TEST_CASE("property: save then load is the identity on valid runs") {
  SplitMix64 rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    Run run;
    const auto queries = 1 + rng.below(5);
    for (std::size_t q = 0; q < queries; ++q) {
      RankedList list{"q" + std::to_string(q), {}, "tag" + std::to_string(q)};
      double score = static_cast<double>(rng.below(100000)) / 1000.0;
      const auto n = 1 + rng.below(30);
      for (std::size_t i = 0; i < n; ++i) {
        list.entries.push_back(
            {"d" + std::to_string(rng.below(1000)) + "_" + std::to_string(i),
             static_cast<int>(i + 1), score});
        score -= static_cast<double>(rng.below(2000)) / 1000.0;
      }
      run.push_back(std::move(list));
    }
    TempDir dir;
    save_run(run, dir / "run.txt");
    const auto first = read_file(dir / "run.txt");
    auto loaded = load_run(dir / "run.txt");
    REQUIRE(loaded.size() == run.size());
    for (std::size_t q = 0; q < run.size(); ++q) {
      REQUIRE(loaded[q].entries.size() == run[q].entries.size());
      for (std::size_t i = 0; i < run[q].entries.size(); ++i) {
        CHECK(loaded[q].entries[i].passage_id == run[q].entries[i].passage_id);
        CHECK(loaded[q].entries[i].score ==
              doctest::Approx(run[q].entries[i].score).epsilon(1e-9));
      }
    }
    save_run(loaded, dir / "again.txt");
    CHECK(read_file(dir / "again.txt") == first);
  }
}

TEST_CASE("atomic writes leave no partial file behind") {
  TempDir dir;
  write_text(dir / "out.txt", "original");
  CHECK_THROWS(write_file_atomic(dir / "out.txt", [](std::ostream &os) {
    os << "partial";
    throw Error("boom");
  }));
  CHECK(read_file(dir / "out.txt") == "original");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto &e :
       std::filesystem::directory_iterator(dir.path()))
    ++files;
  CHECK(files == 1);
}
