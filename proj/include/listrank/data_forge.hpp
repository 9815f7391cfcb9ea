#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "listrank/bm25.hpp"
#include "listrank/corpus_io.hpp"
#include "listrank/prompting.hpp"

namespace listrank::data_forge {

struct WindowPassage {
  std::string passage_id;
  std::string title;
  std::string body; // as rendered, after truncation
  bool operator==(const WindowPassage &) const = default;
};

struct TrainingExample {
  std::string query_id;
  std::vector<WindowPassage> window; // input order of the prompt
  std::string prompt;
  std::string gold;   // completion in window-local identifiers
  std::string source; // "pgt" or "silver:<tag>"
  bool operator==(const TrainingExample &) const = default;
};

struct ForgeConfig {
  std::size_t num_queries = 5000; // upper bound on examples produced
  std::size_t passages_per_query = 20;
  bool shuffle_input = false;
  std::uint64_t seed = 0;
  prompting::PromptTemplate prompt_template = prompting::PromptTemplate::standard();
  prompting::PromptBudget budget;
  void validate() const;
};

struct Dataset {
  std::vector<TrainingExample> examples; // sorted by query_id
  std::size_t skipped_no_relevant = 0;
  std::size_t skipped_short = 0;     // fewer than passages_per_query candidates
  std::size_t skipped_no_silver = 0; // query absent from the silver run
  std::vector<std::string> warnings;
};

// Gold ordering: judged-relevant passages (grade >= 1) by grade descending,
// ties by first-stage rank, then everything else in first-stage order.
Dataset forge_pgt(const QuerySet &queries, const Corpus &corpus,
                  const Qrels &qrels, const Run &candidates,
                  const ForgeConfig &config);

// Gold ordering: the silver run's order restricted to the window, then
// passages the silver run lacks, in first-stage order.
Dataset forge_silver(const QuerySet &queries, const Corpus &corpus,
                     const Run &silver, const Run &candidates,
                     const ForgeConfig &config);

// BM25 silver computed in process: a depth-`depth` retrieval for each query.
Run bm25_silver_run(const bm25::InvertedIndex &index, const bm25::Params &params,
                    const QuerySet &queries, std::size_t depth,
                    std::size_t workers = 1);

// One JSON object per line: {id, source, messages: [user prompt, assistant
// gold]}.
void write_jsonl(const Dataset &dataset, std::ostream &out);
void export_jsonl(const Dataset &dataset, const std::filesystem::path &path);

} // namespace listrank::data_forge
