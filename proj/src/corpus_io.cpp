#include "listrank/corpus_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "listrank/error.hpp"
#include "listrank/file_util.hpp"

namespace listrank {

namespace {

bool next_line(std::istream &in, std::string &line) {
  if (!std::getline(in, line))
    return false;
  if (!line.empty() && line.back() == '\r')
    line.pop_back();
  return true;
}

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' ||
           c == '\f';
  });
}

std::vector<std::string_view> split_whitespace(std::string_view s) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t'))
      ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t')
      ++j;
    if (j > i)
      fields.push_back(s.substr(i, j - i));
    i = j;
  }
  return fields;
}

std::vector<std::string_view> split_tabs(std::string_view s) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    auto tab = s.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(s.substr(start));
      return fields;
    }
    fields.push_back(s.substr(start, tab - start));
    start = tab + 1;
  }
}

bool parse_int(std::string_view s, int &value) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_double(std::string_view s, double &value) {
  // from_chars for double is unavailable on older libstdc++; strtod on a
  // bounded copy is equivalent here.
  std::string copy(s);
  char *end = nullptr;
  value = std::strtod(copy.c_str(), &end);
  return !copy.empty() && end == copy.c_str() + copy.size() &&
         std::isfinite(value);
}

void check_passage(const Passage &p, std::size_t line) {
  if (p.id.empty())
    throw ParseError("passage id is empty", line);
  if (is_blank(p.body))
    throw ParseError("passage '" + p.id + "' has an empty body", line);
}

template <typename Item, typename Id>
void reject_duplicates(const std::vector<Item> &items, Id id_of,
                       std::string_view what) {
  std::unordered_set<std::string_view> seen;
  for (const auto &item : items)
    if (!seen.insert(id_of(item)).second)
      throw Error("duplicate " + std::string(what) + " id '" +
                  std::string(id_of(item)) + "'");
}

} // namespace

void RankedList::validate() const {
  std::unordered_set<std::string_view> seen;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto &e = entries[i];
    if (e.rank != static_cast<int>(i + 1))
      throw Error("query " + query_id + ": expected rank " +
                  std::to_string(i + 1) + ", found " + std::to_string(e.rank));
    if (!seen.insert(e.passage_id).second)
      throw Error("query " + query_id + ": duplicate passage '" +
                  e.passage_id + "'");
    if (i > 0 && e.score > entries[i - 1].score)
      throw Error("query " + query_id + ": score increases at rank " +
                  std::to_string(e.rank));
  }
}

const RankedList *find_list(const Run &run, std::string_view query_id) {
  for (const auto &list : run)
    if (list.query_id == query_id)
      return &list;
  return nullptr;
}

Corpus::Corpus(std::vector<Passage> passages) : passages_(std::move(passages)) {
  index_.reserve(passages_.size());
  for (std::size_t i = 0; i < passages_.size(); ++i) {
    check_passage(passages_[i], 0);
    if (!index_.emplace(passages_[i].id, i).second)
      throw Error("duplicate passage id '" + passages_[i].id + "'");
  }
}

const Passage *Corpus::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &passages_[it->second];
}

QuerySet::QuerySet(std::vector<Query> queries) : queries_(std::move(queries)) {
  index_.reserve(queries_.size());
  for (std::size_t i = 0; i < queries_.size(); ++i) {
    if (queries_[i].id.empty())
      throw Error("query id is empty");
    if (is_blank(queries_[i].text))
      throw Error("query '" + queries_[i].id + "' has empty text");
    if (!index_.emplace(queries_[i].id, i).second)
      throw Error("duplicate query id '" + queries_[i].id + "'");
  }
}

const Query *QuerySet::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &queries_[it->second];
}

Qrels::Qrels(const std::vector<Judgment> &judgments) {
  for (const auto &j : judgments)
    add(j);
}

void Qrels::add(const Judgment &j) {
  if (j.grade < kMinGrade || j.grade > kMaxGrade)
    throw Error("grade " + std::to_string(j.grade) + " for (" + j.query_id +
                ", " + j.passage_id + ") outside [0, 3]");
  auto &grades = by_query_[j.query_id];
  if (!grades.emplace(j.passage_id, j.grade).second)
    throw Error("duplicate judgment for (" + j.query_id + ", " + j.passage_id +
                ")");
  ++size_;
}

std::optional<int> Qrels::grade(std::string_view query_id,
                                std::string_view passage_id) const {
  auto q = by_query_.find(query_id);
  if (q == by_query_.end())
    return std::nullopt;
  auto p = q->second.find(passage_id);
  if (p == q->second.end())
    return std::nullopt;
  return p->second;
}

const Qrels::PassageGrades *Qrels::judgments(std::string_view query_id) const {
  auto q = by_query_.find(query_id);
  return q == by_query_.end() ? nullptr : &q->second;
}

bool Qrels::has_query(std::string_view query_id) const {
  return by_query_.find(query_id) != by_query_.end();
}

std::vector<Judgment> Qrels::to_vector() const {
  std::vector<Judgment> out;
  out.reserve(size_);
  for (const auto &[qid, grades] : by_query_)
    for (const auto &[pid, grade] : grades)
      out.push_back({qid, pid, grade});
  return out;
}

std::vector<Passage> read_corpus_jsonl(std::istream &in) {
  std::vector<Passage> passages;
  std::string line;
  for (std::size_t lineno = 1; next_line(in, line); ++lineno) {
    if (is_blank(line))
      continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error &e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), lineno);
    }
    if (!record.is_object())
      throw ParseError("record is not a JSON object", lineno);
    auto string_field = [&](const char *name) -> std::optional<std::string> {
      auto it = record.find(name);
      if (it == record.end() || it->is_null())
        return std::nullopt;
      if (it->is_string())
        return it->get<std::string>();
      if (it->is_number_integer())
        return std::to_string(it->get<long long>());
      throw ParseError(std::string("field '") + name + "' is not a string",
                       lineno);
    };
    Passage p;
    auto id = string_field("id");
    if (!id)
      id = string_field("_id");
    if (!id)
      throw ParseError("missing 'id'", lineno);
    p.id = *id;
    p.title = string_field("title").value_or("");
    auto body = string_field("text");
    if (!body)
      body = string_field("body");
    if (!body)
      throw ParseError("missing 'text'", lineno);
    p.body = *body;
    check_passage(p, lineno);
    passages.push_back(std::move(p));
  }
  reject_duplicates(passages, [](const Passage &p) -> std::string_view {
    return p.id;
  }, "passage");
  return passages;
}

std::vector<Passage> read_corpus_tsv(std::istream &in) {
  std::vector<Passage> passages;
  std::string line;
  for (std::size_t lineno = 1; next_line(in, line); ++lineno) {
    if (is_blank(line))
      continue;
    auto fields = split_tabs(line);
    Passage p;
    if (fields.size() == 2) {
      p.id = fields[0];
      p.body = fields[1];
    } else if (fields.size() == 3) {
      p.id = fields[0];
      p.title = fields[1];
      p.body = fields[2];
    } else {
      throw ParseError("expected id<TAB>title<TAB>body", lineno);
    }
    check_passage(p, lineno);
    passages.push_back(std::move(p));
  }
  reject_duplicates(passages, [](const Passage &p) -> std::string_view {
    return p.id;
  }, "passage");
  return passages;
}

std::vector<Passage> load_corpus(const std::filesystem::path &path) {
  auto in = open_input(path);
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  try {
    if (ext == ".jsonl" || ext == ".json" || ext == ".ndjson")
      return read_corpus_jsonl(in);
    return read_corpus_tsv(in);
  } catch (const Error &e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::vector<Query> read_queries(std::istream &in) {
  std::vector<Query> queries;
  std::string line;
  for (std::size_t lineno = 1; next_line(in, line); ++lineno) {
    if (is_blank(line))
      continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError("expected qid<TAB>text", lineno);
    Query q{line.substr(0, tab), line.substr(tab + 1)};
    if (q.id.empty() || is_blank(q.text))
      throw ParseError("empty query id or text", lineno);
    queries.push_back(std::move(q));
  }
  reject_duplicates(queries, [](const Query &q) -> std::string_view {
    return q.id;
  }, "query");
  return queries;
}

std::vector<Query> load_queries(const std::filesystem::path &path) {
  auto in = open_input(path);
  try {
    return read_queries(in);
  } catch (const Error &e) {
    throw Error(path.string() + ": " + e.what());
  }
}

Qrels read_qrels(std::istream &in) {
  Qrels qrels;
  std::string line;
  for (std::size_t lineno = 1; next_line(in, line); ++lineno) {
    if (is_blank(line))
      continue;
    auto f = split_whitespace(line);
    if (f.size() != 4)
      throw ParseError("expected 'qid 0 docid grade'", lineno);
    int grade = 0;
    if (!parse_int(f[3], grade))
      throw ParseError("grade '" + std::string(f[3]) + "' is not an integer",
                       lineno);
    if (grade < kMinGrade || grade > kMaxGrade)
      throw ParseError("grade " + std::to_string(grade) + " outside [0, 3]",
                       lineno);
    Judgment j{std::string(f[0]), std::string(f[2]), grade};
    if (qrels.grade(j.query_id, j.passage_id))
      throw ParseError("duplicate judgment for (" + j.query_id + ", " +
                           j.passage_id + ")",
                       lineno);
    qrels.add(j);
  }
  return qrels;
}

Qrels load_qrels(const std::filesystem::path &path) {
  auto in = open_input(path);
  try {
    return read_qrels(in);
  } catch (const Error &e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_qrels(const Qrels &qrels, std::ostream &out) {
  for (const auto &j : qrels.to_vector())
    out << j.query_id << " 0 " << j.passage_id << ' ' << j.grade << '\n';
}

Run read_run(std::istream &in) {
  Run run;
  std::unordered_map<std::string, std::size_t> slot;
  std::string line;
  for (std::size_t lineno = 1; next_line(in, line); ++lineno) {
    if (is_blank(line))
      continue;
    auto f = split_whitespace(line);
    if (f.size() != 6)
      throw ParseError("expected 'qid Q0 docid rank score tag'", lineno);
    RunEntry e;
    e.passage_id = f[2];
    if (!parse_int(f[3], e.rank) || e.rank < 1)
      throw ParseError("invalid rank '" + std::string(f[3]) + "'", lineno);
    if (!parse_double(f[4], e.score))
      throw ParseError("invalid score '" + std::string(f[4]) + "'", lineno);
    std::string qid(f[0]);
    auto [it, inserted] = slot.emplace(qid, run.size());
    if (inserted)
      run.push_back(RankedList{qid, {}, std::string(f[5])});
    run[it->second].entries.push_back(std::move(e));
  }
  for (auto &list : run) {
    std::stable_sort(list.entries.begin(), list.entries.end(),
                     [](const RunEntry &a, const RunEntry &b) {
                       return a.rank < b.rank;
                     });
    for (std::size_t i = 0; i < list.entries.size(); ++i)
      if (list.entries[i].rank != static_cast<int>(i + 1))
        throw ParseError("query " + list.query_id + ": gap in ranks, rank " +
                         std::to_string(i + 1) + " missing");
    list.validate();
  }
  return run;
}

Run load_run(const std::filesystem::path &path) {
  auto in = open_input(path);
  try {
    return read_run(in);
  } catch (const Error &e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::string format_score(double score) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", score);
  return buf;
}

void write_run(const Run &run, std::ostream &out) {
  for (const auto &list : run) {
    const std::string &tag = list.tag.empty() ? std::string("listrank")
                                              : list.tag;
    for (const auto &e : list.entries)
      out << list.query_id << " Q0 " << e.passage_id << ' ' << e.rank << ' '
          << format_score(e.score) << ' ' << tag << '\n';
  }
}

void save_run(const Run &run, const std::filesystem::path &path) {
  for (const auto &list : run)
    list.validate();
  write_file_atomic(path, [&](std::ostream &out) { write_run(run, out); });
}

} // namespace listrank
