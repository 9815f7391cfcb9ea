#include "listrank/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "listrank/error.hpp"
#include "listrank/file_util.hpp"

namespace listrank::bm25 {

namespace {

constexpr const char *kFormatName = "listrank-bm25-index";

bool is_token_byte(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z');
}

double term_weight(double idf_value, double tf, double length, double avgdl,
                   const Params &p) {
  const double norm = p.k1 * (1.0 - p.b + p.b * length / avgdl);
  return idf_value * tf * (p.k1 + 1.0) / (tf + norm);
}

} // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (is_token_byte(c)) {
      current.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c + 32 : c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty())
    tokens.push_back(std::move(current));
  return tokens;
}

void Params::validate() const {
  if (!(k1 >= 0.0) || !std::isfinite(k1))
    throw Error("bm25 k1 must be >= 0");
  if (!(b >= 0.0 && b <= 1.0))
    throw Error("bm25 b must be in [0, 1]");
}

InvertedIndex InvertedIndex::build(const Corpus &corpus) {
  if (corpus.empty())
    throw Error("cannot index an empty corpus");
  InvertedIndex index;
  index.ids_.reserve(corpus.size());
  index.lengths_.reserve(corpus.size());
  std::unordered_map<std::string, std::uint32_t> counts;
  for (const auto &p : corpus.passages()) {
    const auto doc = static_cast<std::uint32_t>(index.ids_.size());
    counts.clear();
    std::uint32_t length = 0;
    for (const auto *field : {&p.title, &p.body})
      for (auto &token : tokenize(*field)) {
        ++counts[std::move(token)];
        ++length;
      }
    index.ids_.push_back(p.id);
    index.lengths_.push_back(length);
    for (const auto &[term, tf] : counts)
      index.postings_[term].push_back({doc, tf});
  }
  index.finalize();
  return index;
}

void InvertedIndex::finalize() {
  doc_index_.clear();
  doc_index_.reserve(ids_.size());
  for (std::uint32_t i = 0; i < ids_.size(); ++i)
    if (!doc_index_.emplace(ids_[i], i).second)
      throw Error("index holds duplicate passage id '" + ids_[i] + "'");
  double total = 0.0;
  for (auto len : lengths_)
    total += len;
  avgdl_ = ids_.empty() ? 0.0 : total / static_cast<double>(ids_.size());
  for (auto &[term, list] : postings_)
    std::sort(list.begin(), list.end(),
              [](const Posting &a, const Posting &b) { return a.doc < b.doc; });
}

std::span<const Posting> InvertedIndex::postings(std::string_view term) const {
  auto it = postings_.find(std::string(term));
  if (it == postings_.end())
    return {};
  return it->second;
}

std::int64_t InvertedIndex::doc_of(std::string_view passage_id) const {
  auto it = doc_index_.find(std::string(passage_id));
  return it == doc_index_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

std::uint32_t InvertedIndex::term_frequency(std::string_view term,
                                            std::uint32_t doc) const {
  auto list = postings(term);
  auto it = std::lower_bound(
      list.begin(), list.end(), doc,
      [](const Posting &p, std::uint32_t d) { return p.doc < d; });
  return it != list.end() && it->doc == doc ? it->term_frequency : 0;
}

void InvertedIndex::write(std::ostream &out) const {
  nlohmann::ordered_json j;
  j["format"] = kFormatName;
  j["version"] = kFormatVersion;
  auto &passages = j["passages"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < ids_.size(); ++i)
    passages.push_back({ids_[i], lengths_[i]});
  std::vector<const std::string *> terms;
  terms.reserve(postings_.size());
  for (const auto &[term, list] : postings_)
    terms.push_back(&term);
  std::sort(terms.begin(), terms.end(),
            [](const std::string *a, const std::string *b) { return *a < *b; });
  auto &postings = j["postings"] = nlohmann::ordered_json::object();
  for (const auto *term : terms) {
    auto flat = nlohmann::ordered_json::array();
    for (const auto &p : postings_.at(*term)) {
      flat.push_back(p.doc);
      flat.push_back(p.term_frequency);
    }
    postings[*term] = std::move(flat);
  }
  out << j.dump() << '\n';
}

void InvertedIndex::save(const std::filesystem::path &path) const {
  write_file_atomic(path, [&](std::ostream &out) { write(out); });
}

InvertedIndex InvertedIndex::read(std::istream &in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception &e) {
    throw ParseError(std::string("index is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != kFormatName)
    throw ParseError("not a listrank bm25 index");
  if (j.value("version", -1) != kFormatVersion)
    throw ParseError("unsupported index version " +
                     j.value("version", nlohmann::json(-1)).dump());
  InvertedIndex index;
  try {
    for (const auto &p : j.at("passages")) {
      index.ids_.push_back(p.at(0).get<std::string>());
      index.lengths_.push_back(p.at(1).get<std::uint32_t>());
    }
    const auto n = index.ids_.size();
    for (const auto &[term, flat] : j.at("postings").items()) {
      if (flat.size() % 2 != 0)
        throw ParseError("odd posting array for term '" + term + "'");
      std::vector<Posting> list;
      list.reserve(flat.size() / 2);
      for (std::size_t i = 0; i < flat.size(); i += 2) {
        Posting p{flat[i].get<std::uint32_t>(),
                  flat[i + 1].get<std::uint32_t>()};
        if (p.doc >= n || p.term_frequency == 0)
          throw ParseError("invalid posting for term '" + term + "'");
        list.push_back(p);
      }
      index.postings_.emplace(term, std::move(list));
    }
  } catch (const nlohmann::json::exception &e) {
    throw ParseError(std::string("malformed index: ") + e.what());
  }
  index.finalize();
  return index;
}

InvertedIndex InvertedIndex::load(const std::filesystem::path &path) {
  auto in = open_input(path);
  try {
    return read(in);
  } catch (const Error &e) {
    throw Error(path.string() + ": " + e.what());
  }
}

double idf(std::size_t num_docs, std::size_t df) {
  const double n = static_cast<double>(num_docs);
  const double d = static_cast<double>(df);
  return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

double score(const InvertedIndex &index, const Params &params,
             std::span<const std::string> query_tokens,
             std::string_view passage_id) {
  const auto doc = index.doc_of(passage_id);
  if (doc < 0)
    throw Error("passage '" + std::string(passage_id) + "' is not indexed");
  const auto d = static_cast<std::uint32_t>(doc);
  const double length = index.lengths()[d];
  double total = 0.0;
  for (const auto &term : query_tokens) {
    const auto tf = index.term_frequency(term, d);
    if (tf == 0)
      continue;
    total += term_weight(idf(index.num_docs(), index.document_frequency(term)),
                         tf, length, index.avgdl(), params);
  }
  return total;
}

RankedList retrieve(const InvertedIndex &index, const Params &params,
                    const Query &query, std::size_t k, std::string tag) {
  if (k == 0)
    throw Error("retrieve depth k must be >= 1");
  params.validate();
  const auto tokens = tokenize(query.text);
  std::vector<double> accumulator(index.num_docs(), 0.0);
  std::vector<std::uint32_t> touched;
  std::vector<char> seen(index.num_docs(), 0);
  // Term-at-a-time in query order, so each document's sum is formed in the
  // same order as score().
  for (const auto &term : tokens) {
    auto list = index.postings(term);
    if (list.empty())
      continue;
    const double w_idf = idf(index.num_docs(), list.size());
    for (const auto &p : list) {
      accumulator[p.doc] += term_weight(w_idf, p.term_frequency,
                                        index.lengths()[p.doc], index.avgdl(),
                                        params);
      if (!seen[p.doc]) {
        seen[p.doc] = 1;
        touched.push_back(p.doc);
      }
    }
  }
  std::vector<std::uint32_t> hits;
  hits.reserve(touched.size());
  for (auto doc : touched)
    if (accumulator[doc] > 0.0)
      hits.push_back(doc);
  const auto &ids = index.passage_ids();
  auto better = [&](std::uint32_t a, std::uint32_t b) {
    if (accumulator[a] != accumulator[b])
      return accumulator[a] > accumulator[b];
    return ids[a] < ids[b];
  };
  const std::size_t depth = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + depth, hits.end(), better);
  RankedList list{query.id, {}, std::move(tag)};
  list.entries.reserve(depth);
  for (std::size_t i = 0; i < depth; ++i)
    list.entries.push_back(
        {ids[hits[i]], static_cast<int>(i + 1), accumulator[hits[i]]});
  return list;
}

Run retrieve_all(const InvertedIndex &index, const Params &params,
                 const std::vector<Query> &queries, std::size_t k,
                 std::size_t workers, const std::string &tag) {
  Run run(queries.size());
  parallel_for(queries.size(), workers, [&](std::size_t i) {
    run[i] = retrieve(index, params, queries[i], k, tag);
  });
  return run;
}

} // namespace listrank::bm25
