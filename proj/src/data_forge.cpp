#include "listrank/data_forge.hpp"

#include <algorithm>
#include <functional>
#include <optional>
#include <ostream>
#include <unordered_map>

#include <json.hpp>

#include "listrank/error.hpp"
#include "listrank/file_util.hpp"
#include "listrank/rank_parser.hpp"

namespace listrank::data_forge {

void ForgeConfig::validate() const {
  if (num_queries < 1)
    throw Error("num_queries must be >= 1");
  if (passages_per_query < 2)
    throw Error("passages_per_query must be >= 2");
  if (passages_per_query > prompting::kMaxWindow)
    throw Error("passages_per_query exceeds the maximum window of " +
                std::to_string(prompting::kMaxWindow));
  budget.validate();
}

namespace {

enum class Outcome { ok, no_relevant, no_silver };

// Receives the first-stage window (ids in rank order) and writes the gold
// ordering of those ids.
using GoldRule = std::function<Outcome(const RankedList &candidates,
                                       const std::vector<std::string> &window,
                                       std::vector<std::string> &gold)>;

// Maps a gold id ordering onto 1-based slots of the input window.
Permutation gold_permutation(const std::vector<std::string> &input,
                             const std::vector<std::string> &gold) {
  std::unordered_map<std::string_view, int> slot;
  for (std::size_t i = 0; i < input.size(); ++i)
    slot.emplace(input[i], static_cast<int>(i + 1));
  std::vector<int> order;
  order.reserve(gold.size());
  for (const auto &id : gold)
    order.push_back(slot.at(id));
  return Permutation(std::move(order));
}

Dataset forge(const QuerySet &queries, const Corpus &corpus,
              const Run &candidates, const ForgeConfig &config,
              const GoldRule &rule,
              const std::function<std::string(const std::string &)> &source) {
  config.validate();
  std::vector<const RankedList *> pool;
  for (const auto &list : candidates)
    if (queries.find(list.query_id))
      pool.push_back(&list);
  std::sort(pool.begin(), pool.end(),
            [](const RankedList *a, const RankedList *b) {
              return a->query_id < b->query_id;
            });
  SplitMix64 sampler(StableHash().add("sample").add(config.seed).value());
  seeded_shuffle(pool, sampler);

  Dataset dataset;
  const std::size_t width = config.passages_per_query;
  for (const auto *list : pool) {
    if (dataset.examples.size() >= config.num_queries)
      break;
    const auto &qid = list->query_id;
    if (list->entries.size() < width) {
      ++dataset.skipped_short;
      dataset.warnings.push_back("query " + qid + ": only " +
                                 std::to_string(list->entries.size()) +
                                 " candidates");
      continue;
    }
    std::vector<std::string> window;
    window.reserve(width);
    for (std::size_t i = 0; i < width; ++i)
      window.push_back(list->entries[i].passage_id);

    std::vector<std::string> gold;
    switch (rule(*list, window, gold)) {
    case Outcome::no_relevant:
      ++dataset.skipped_no_relevant;
      dataset.warnings.push_back("query " + qid +
                                 ": no judged-relevant candidate");
      continue;
    case Outcome::no_silver:
      ++dataset.skipped_no_silver;
      dataset.warnings.push_back("query " + qid + ": absent from silver run");
      continue;
    case Outcome::ok:
      break;
    }

    std::vector<std::string> input = window;
    if (config.shuffle_input) {
      SplitMix64 rng(StableHash().add("shuffle").add(config.seed).add(qid)
                         .value());
      seeded_shuffle(input, rng);
    }

    std::vector<const Passage *> passages;
    std::vector<prompting::PromptPassage> views;
    for (const auto &id : input) {
      const auto *p = corpus.find(id);
      if (!p)
        throw Error("query " + qid + ": passage '" + id + "' not in corpus");
      passages.push_back(p);
      views.push_back({p->title, p->body});
    }
    const auto &query = *queries.find(qid);
    auto prompt = prompting::render(config.prompt_template, query.text, views,
                                    config.budget);

    TrainingExample ex;
    ex.query_id = qid;
    ex.source = source(qid);
    for (const auto *p : passages)
      ex.window.push_back(
          {p->id, prompting::truncate_words(p->title, std::size_t(-1)),
           prompting::truncate_words(p->body, prompt.passage_cap)});
    ex.prompt = std::move(prompt.text);
    ex.gold = prompting::render_completion(gold_permutation(input, gold));
    dataset.examples.push_back(std::move(ex));
  }
  std::sort(dataset.examples.begin(), dataset.examples.end(),
            [](const TrainingExample &a, const TrainingExample &b) {
              return a.query_id < b.query_id;
            });
  return dataset;
}

} // namespace

Dataset forge_pgt(const QuerySet &queries, const Corpus &corpus,
                  const Qrels &qrels, const Run &candidates,
                  const ForgeConfig &config) {
  auto rule = [&](const RankedList &list,
                  const std::vector<std::string> &window,
                  std::vector<std::string> &gold) {
    std::vector<std::pair<int, std::size_t>> relevant; // (grade, rank index)
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < window.size(); ++i) {
      const int g = qrels.grade(list.query_id, window[i]).value_or(0);
      if (g >= 1)
        relevant.emplace_back(g, i);
      else
        rest.push_back(i);
    }
    if (relevant.empty())
      return Outcome::no_relevant;
    std::stable_sort(relevant.begin(), relevant.end(),
                     [](const auto &a, const auto &b) {
                       return a.first > b.first;
                     });
    for (const auto &[g, i] : relevant)
      gold.push_back(window[i]);
    for (auto i : rest)
      gold.push_back(window[i]);
    return Outcome::ok;
  };
  return forge(queries, corpus, candidates, config, rule,
               [](const std::string &) { return std::string("pgt"); });
}

Dataset forge_silver(const QuerySet &queries, const Corpus &corpus,
                     const Run &silver, const Run &candidates,
                     const ForgeConfig &config) {
  std::unordered_map<std::string_view, const RankedList *> by_query;
  for (const auto &list : silver)
    by_query.emplace(list.query_id, &list);
  auto rule = [&](const RankedList &list,
                  const std::vector<std::string> &window,
                  std::vector<std::string> &gold) {
    auto it = by_query.find(list.query_id);
    if (it == by_query.end())
      return Outcome::no_silver;
    std::unordered_map<std::string_view, std::size_t> in_window;
    for (std::size_t i = 0; i < window.size(); ++i)
      in_window.emplace(window[i], i);
    std::vector<char> placed(window.size(), 0);
    for (const auto &e : it->second->entries) {
      auto w = in_window.find(e.passage_id);
      if (w == in_window.end() || placed[w->second])
        continue;
      placed[w->second] = 1;
      gold.push_back(window[w->second]);
    }
    for (std::size_t i = 0; i < window.size(); ++i)
      if (!placed[i])
        gold.push_back(window[i]);
    return Outcome::ok;
  };
  auto source = [&](const std::string &qid) {
    const auto *list = by_query.at(qid);
    return "silver:" + (list->tag.empty() ? std::string("run") : list->tag);
  };
  return forge(queries, corpus, candidates, config, rule, source);
}

Run bm25_silver_run(const bm25::InvertedIndex &index,
                    const bm25::Params &params, const QuerySet &queries,
                    std::size_t depth, std::size_t workers) {
  return bm25::retrieve_all(index, params, queries.queries(), depth, workers,
                            "bm25");
}

void write_jsonl(const Dataset &dataset, std::ostream &out) {
  for (const auto &ex : dataset.examples) {
    nlohmann::ordered_json line;
    line["id"] = ex.query_id;
    line["source"] = ex.source;
    line["messages"] = nlohmann::ordered_json::array(
        {{{"role", "user"}, {"content", ex.prompt}},
         {{"role", "assistant"}, {"content", ex.gold}}});
    out << line.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace)
        << '\n';
  }
}

void export_jsonl(const Dataset &dataset, const std::filesystem::path &path) {
  write_file_atomic(path, [&](std::ostream &out) { write_jsonl(dataset, out); });
}

} // namespace listrank::data_forge
