#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "listrank/corpus_io.hpp"

namespace listrank::bm25 {

// Lowercases ASCII letters and splits on every byte that is not an ASCII
// letter or digit. Empty tokens are dropped.
std::vector<std::string> tokenize(std::string_view text);

struct Params {
  double k1 = 0.9;
  double b = 0.4;
  void validate() const;
};

struct Posting {
  std::uint32_t doc = 0; // dense index into InvertedIndex::passage_ids()
  std::uint32_t term_frequency = 0;
  bool operator==(const Posting &) const = default;
};

// Immutable after construction. Postings are sorted by doc.
class InvertedIndex {
public:
  static constexpr int kFormatVersion = 1;

  // Title and body are both indexed.
  static InvertedIndex build(const Corpus &corpus);
  static InvertedIndex load(const std::filesystem::path &path);
  static InvertedIndex read(std::istream &in);
  void write(std::ostream &out) const;
  void save(const std::filesystem::path &path) const;

  std::span<const Posting> postings(std::string_view term) const;
  std::size_t document_frequency(std::string_view term) const {
    return postings(term).size();
  }
  // Dense doc index for a passage id, or -1.
  std::int64_t doc_of(std::string_view passage_id) const;
  std::uint32_t term_frequency(std::string_view term, std::uint32_t doc) const;

  const std::vector<std::string> &passage_ids() const { return ids_; }
  const std::vector<std::uint32_t> &lengths() const { return lengths_; }
  std::size_t num_docs() const { return ids_.size(); }
  double avgdl() const { return avgdl_; }
  std::size_t num_terms() const { return postings_.size(); }

private:
  void finalize();

  std::vector<std::string> ids_;
  std::vector<std::uint32_t> lengths_;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  std::unordered_map<std::string, std::uint32_t> doc_index_;
  double avgdl_ = 0.0;
};

// ln(1 + (N - df + 0.5) / (df + 0.5)); never negative.
double idf(std::size_t num_docs, std::size_t document_frequency);

// Sum over query tokens of idf * tf (k1 + 1) / (tf + k1 (1 - b + b len/avgdl)).
// Repeated query tokens contribute once per occurrence.
double score(const InvertedIndex &index, const Params &params,
             std::span<const std::string> query_tokens,
             std::string_view passage_id);

// Top-k passages with positive score, descending, ties by passage id.
RankedList retrieve(const InvertedIndex &index, const Params &params,
                    const Query &query, std::size_t k,
                    std::string tag = "bm25");

Run retrieve_all(const InvertedIndex &index, const Params &params,
                 const std::vector<Query> &queries, std::size_t k,
                 std::size_t workers = 1, const std::string &tag = "bm25");

} // namespace listrank::bm25
