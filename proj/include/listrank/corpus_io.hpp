#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace listrank {

struct Passage {
  std::string id;
  std::string title;
  std::string body;
  bool operator==(const Passage &) const = default;
};

struct Query {
  std::string id;
  std::string text;
  bool operator==(const Query &) const = default;
};

inline constexpr int kMinGrade = 0;
inline constexpr int kMaxGrade = 3;

struct Judgment {
  std::string query_id;
  std::string passage_id;
  int grade = 0;
  bool operator==(const Judgment &) const = default;
};

struct RunEntry {
  std::string passage_id;
  int rank = 0;
  double score = 0.0;
  bool operator==(const RunEntry &) const = default;
};

// Ordered scored passages for one query. Ranks are 1..size() without gaps,
// scores never increase with rank and passage ids are distinct.
struct RankedList {
  std::string query_id;
  std::vector<RunEntry> entries;
  std::string tag;

  void validate() const;
  std::size_t size() const { return entries.size(); }
  bool operator==(const RankedList &) const = default;
};

// A multi-query run in file order (first appearance of each query).
using Run = std::vector<RankedList>;

const RankedList *find_list(const Run &run, std::string_view query_id);

// Immutable passage collection with id lookup.
class Corpus {
public:
  Corpus() = default;
  explicit Corpus(std::vector<Passage> passages);

  const Passage *find(std::string_view id) const;
  const std::vector<Passage> &passages() const { return passages_; }
  std::size_t size() const { return passages_.size(); }
  bool empty() const { return passages_.empty(); }

private:
  std::vector<Passage> passages_;
  std::unordered_map<std::string, std::size_t> index_;
};

class QuerySet {
public:
  QuerySet() = default;
  explicit QuerySet(std::vector<Query> queries);

  const Query *find(std::string_view id) const;
  const std::vector<Query> &queries() const { return queries_; }
  std::size_t size() const { return queries_.size(); }

private:
  std::vector<Query> queries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Graded judgments keyed by query then passage. Ordered maps keep every
// iteration deterministic.
class Qrels {
public:
  using PassageGrades = std::map<std::string, int, std::less<>>;

  Qrels() = default;
  explicit Qrels(const std::vector<Judgment> &judgments);

  // Throws on an out-of-range grade or a repeated (query, passage) pair.
  void add(const Judgment &judgment);

  std::optional<int> grade(std::string_view query_id,
                           std::string_view passage_id) const;
  const PassageGrades *judgments(std::string_view query_id) const;
  bool has_query(std::string_view query_id) const;
  std::vector<Judgment> to_vector() const;
  std::size_t size() const { return size_; }
  const std::map<std::string, PassageGrades, std::less<>> &by_query() const {
    return by_query_;
  }

private:
  std::map<std::string, PassageGrades, std::less<>> by_query_;
  std::size_t size_ = 0;
};

// JSON-lines ({"id","title","text"}) for .jsonl/.json, otherwise TSV
// (id, title, body columns; two columns mean no title).
std::vector<Passage> load_corpus(const std::filesystem::path &path);
std::vector<Passage> read_corpus_jsonl(std::istream &in);
std::vector<Passage> read_corpus_tsv(std::istream &in);

// `qid<TAB>text` per line.
std::vector<Query> load_queries(const std::filesystem::path &path);
std::vector<Query> read_queries(std::istream &in);

// TREC qrels: `qid 0 docid grade`.
Qrels load_qrels(const std::filesystem::path &path);
Qrels read_qrels(std::istream &in);
void write_qrels(const Qrels &qrels, std::ostream &out);

// TREC run: `qid Q0 docid rank score tag`. Scores are written with six
// decimals.
Run load_run(const std::filesystem::path &path);
Run read_run(std::istream &in);
void write_run(const Run &run, std::ostream &out);
void save_run(const Run &run, const std::filesystem::path &path);

std::string format_score(double score);

} // namespace listrank
