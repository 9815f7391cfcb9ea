#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "listrank/backends.hpp"
#include "listrank/corpus_io.hpp"
#include "listrank/prompting.hpp"
#include "listrank/rank_parser.hpp"

namespace listrank::window_engine {

struct WindowConfig {
  std::size_t size = 20;  // n
  std::size_t stride = 10; // m
  std::size_t passes = 1;
  // Requires n >= 2, 1 <= m < n, passes >= 1.
  void validate() const;
};

// What to do when a window cannot be reranked (backend error, unusable
// completion, prompt over budget).
enum class FallbackPolicy {
  keep_order,       // leave the window as it is
  retry_then_keep,  // call the backend once more, then leave it
};

struct RerankOptions {
  WindowConfig window;
  prompting::PromptTemplate prompt_template = prompting::PromptTemplate::standard();
  prompting::PromptBudget budget;
  FallbackPolicy fallback = FallbackPolicy::keep_order;
};

// Where prompt text comes from. Either may be null; missing text renders as
// empty strings. With a corpus present, an id absent from it fails the
// window.
struct TextSource {
  const Corpus *corpus = nullptr;
  const QuerySet *queries = nullptr;
};

struct WindowRecord {
  std::size_t pass = 0; // 1-based
  std::size_t start = 0; // 0-based offset into the working list
  std::vector<std::string> ids_before;
  std::vector<int> permutation; // identity when the window fell back
  bool repaired = false;
  bool fallback = false;
  ParseAnomalies anomalies;
  std::string error; // cause of the fallback, if any
};

// Window records appear pass by pass, start indices decreasing within a pass.
struct RerankTrace {
  std::string query_id;
  std::vector<RunEntry> original;
  std::vector<WindowRecord> windows;
  std::size_t fallback_count = 0;
  bool failed = false; // every window fell back
};

struct RerankResult {
  RankedList list;
  RerankTrace trace;
};

// Start offsets of the windows of one pass over k items: max(k - n, 0), then
// stepping back by m, clamped to 0, ending with 0.
std::vector<std::size_t> window_starts(std::size_t k, const WindowConfig &config);

std::string run_tag(const backends::ListwiseBackend &backend,
                    const WindowConfig &config);

// Back-to-front sliding-window rerank of one query's list. The output holds
// the same ids with scores k, k-1, ..., 1.
RerankResult rerank(const backends::ListwiseBackend &backend,
                    const RankedList &input, const RerankOptions &options,
                    const TextSource &text = {});

struct RerankRunResult {
  Run run;
  std::vector<RerankTrace> traces;
  std::size_t failed_queries = 0;
};

// Queries run independently on up to `workers` threads; output order follows
// the input run.
RerankRunResult rerank_run(const backends::ListwiseBackend &backend,
                           const Run &input, const RerankOptions &options,
                           const TextSource &text = {},
                           std::size_t workers = 1);

void write_trace(const RerankRunResult &result,
                 const backends::ListwiseBackend &backend,
                 const RerankOptions &options, std::ostream &out);

} // namespace listrank::window_engine
