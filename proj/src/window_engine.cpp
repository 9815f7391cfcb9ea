#include "listrank/window_engine.hpp"

#include <algorithm>
#include <optional>
#include <ostream>

#include <json.hpp>

#include "listrank/error.hpp"
#include "listrank/file_util.hpp"

namespace listrank::window_engine {

void WindowConfig::validate() const {
  if (size < 2)
    throw Error("window size must be >= 2");
  if (stride < 1 || stride >= size)
    throw Error("stride must satisfy 1 <= stride < window size");
  if (passes < 1)
    throw Error("passes must be >= 1");
}

std::vector<std::size_t> window_starts(std::size_t k,
                                       const WindowConfig &config) {
  config.validate();
  std::vector<std::size_t> starts;
  if (k == 0)
    return starts;
  std::size_t start = k > config.size ? k - config.size : 0;
  for (;;) {
    starts.push_back(start);
    if (start == 0)
      break;
    start = start > config.stride ? start - config.stride : 0;
  }
  return starts;
}

std::string run_tag(const backends::ListwiseBackend &backend,
                    const WindowConfig &config) {
  std::string tag = backend.capabilities().name + ".n" +
                    std::to_string(config.size) + ".m" +
                    std::to_string(config.stride) + ".p" +
                    std::to_string(config.passes);
  for (auto &c : tag)
    if (c == ' ' || c == '\t')
      c = '_';
  return tag;
}

namespace {

struct Slot {
  std::string id;
  int first_stage_rank;
};

// One backend call plus parse. Throws on any failure.
ParseReport rank_once(const backends::ListwiseBackend &backend,
                      const backends::WindowRequest &request) {
  const auto completion = backend.rank_window(request);
  return rank_parser::parse(completion, request.items.size());
}

} // namespace

RerankResult rerank(const backends::ListwiseBackend &backend,
                    const RankedList &input, const RerankOptions &options,
                    const TextSource &text) {
  options.window.validate();
  options.budget.validate();
  const std::size_t k = input.entries.size();
  if (k == 0)
    throw Error("query " + input.query_id + ": nothing to rerank");

  RerankTrace trace;
  trace.query_id = input.query_id;
  trace.original = input.entries;

  std::string_view query_text;
  if (text.queries)
    if (const auto *q = text.queries->find(input.query_id))
      query_text = q->text;

  std::vector<Slot> working;
  working.reserve(k);
  for (const auto &e : input.entries)
    working.push_back({e.passage_id, e.rank});

  const auto starts = window_starts(k, options.window);
  const std::size_t max_window =
      std::min(backend.capabilities().max_window, prompting::kMaxWindow);

  for (std::size_t pass = 1; pass <= options.window.passes; ++pass) {
    for (auto start : starts) {
      const std::size_t end = std::min(start + options.window.size, k);
      const std::size_t width = end - start;
      WindowRecord record;
      record.pass = pass;
      record.start = start;
      record.ids_before.reserve(width);
      for (std::size_t i = start; i < end; ++i)
        record.ids_before.push_back(working[i].id);

      std::optional<ParseReport> report;
      try {
        if (width > max_window)
          throw BackendError("window of " + std::to_string(width) +
                             " exceeds backend max " +
                             std::to_string(max_window));
        std::vector<backends::WindowItem> items;
        std::vector<prompting::PromptPassage> passages;
        items.reserve(width);
        passages.reserve(width);
        for (std::size_t i = start; i < end; ++i) {
          std::string_view title, body;
          if (text.corpus) {
            const auto *p = text.corpus->find(working[i].id);
            if (!p)
              throw Error("passage '" + working[i].id + "' not in corpus");
            title = p->title;
            body = p->body;
          }
          items.push_back({working[i].id, title, body,
                           working[i].first_stage_rank});
          passages.push_back({title, body});
        }
        const auto prompt = prompting::render(options.prompt_template,
                                              query_text, passages,
                                              options.budget);
        const backends::WindowRequest request{input.query_id, query_text,
                                              items, prompt.text};
        try {
          report = rank_once(backend, request);
        } catch (const Error &) {
          if (options.fallback != FallbackPolicy::retry_then_keep)
            throw;
          report = rank_once(backend, request);
        }
      } catch (const Error &e) {
        record.error = e.what();
      }

      if (report) {
        record.permutation = report->permutation.order();
        record.repaired = report->repaired;
        record.anomalies = report->anomalies;
        auto reordered = report->permutation.apply(
            std::span<const Slot>(working.data() + start, width));
        std::move(reordered.begin(), reordered.end(),
                  working.begin() + static_cast<std::ptrdiff_t>(start));
      } else {
        record.fallback = true;
        record.permutation = Permutation::identity(width).order();
        ++trace.fallback_count;
      }
      trace.windows.push_back(std::move(record));
    }
  }
  trace.failed = trace.fallback_count == trace.windows.size();

  RankedList out{input.query_id, {}, run_tag(backend, options.window)};
  out.entries.reserve(k);
  for (std::size_t i = 0; i < k; ++i)
    out.entries.push_back({working[i].id, static_cast<int>(i + 1),
                           static_cast<double>(k - i)});
  return {std::move(out), std::move(trace)};
}

RerankRunResult rerank_run(const backends::ListwiseBackend &backend,
                           const Run &input, const RerankOptions &options,
                           const TextSource &text, std::size_t workers) {
  options.window.validate();
  RerankRunResult result;
  result.run.resize(input.size());
  result.traces.resize(input.size());
  const std::string tag = run_tag(backend, options.window);
  parallel_for(input.size(), workers, [&](std::size_t i) {
    const auto &list = input[i];
    if (list.entries.empty()) {
      result.run[i] = RankedList{list.query_id, {}, tag};
      result.traces[i].query_id = list.query_id;
      return;
    }
    auto r = rerank(backend, list, options, text);
    result.run[i] = std::move(r.list);
    result.traces[i] = std::move(r.trace);
  });
  for (const auto &t : result.traces)
    if (t.failed)
      ++result.failed_queries;
  return result;
}

namespace {

nlohmann::ordered_json anomalies_json(const ParseAnomalies &a) {
  return {{"duplicate", a.duplicate},
          {"out_of_range", a.out_of_range},
          {"missing", a.missing},
          {"garbage_text", a.garbage_text}};
}

} // namespace

void write_trace(const RerankRunResult &result,
                 const backends::ListwiseBackend &backend,
                 const RerankOptions &options, std::ostream &out) {
  nlohmann::ordered_json j;
  j["backend"] = backend.capabilities().name;
  j["window"] = {{"size", options.window.size},
                 {"stride", options.window.stride},
                 {"passes", options.window.passes}};
  j["failed_queries"] = result.failed_queries;
  auto &queries = j["queries"] = nlohmann::ordered_json::array();
  for (const auto &t : result.traces) {
    nlohmann::ordered_json q;
    q["query_id"] = t.query_id;
    q["fallback_count"] = t.fallback_count;
    q["failed"] = t.failed;
    auto &original = q["original"] = nlohmann::ordered_json::array();
    for (const auto &e : t.original)
      original.push_back(
          {{"id", e.passage_id}, {"rank", e.rank}, {"score", e.score}});
    auto &windows = q["windows"] = nlohmann::ordered_json::array();
    for (const auto &w : t.windows) {
      nlohmann::ordered_json wj;
      wj["pass"] = w.pass;
      wj["start"] = w.start;
      wj["ids_before"] = w.ids_before;
      wj["permutation"] = w.permutation;
      wj["repaired"] = w.repaired;
      wj["fallback"] = w.fallback;
      wj["anomalies"] = anomalies_json(w.anomalies);
      if (!w.error.empty())
        wj["error"] = w.error;
      windows.push_back(std::move(wj));
    }
    queries.push_back(std::move(q));
  }
  out << j.dump(1, ' ', false, nlohmann::json::error_handler_t::replace)
      << '\n';
}

} // namespace listrank::window_engine
