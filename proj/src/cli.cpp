#include "listrank/cli.hpp"

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "listrank/analysis.hpp"
#include "listrank/backends.hpp"
#include "listrank/bm25.hpp"
#include "listrank/corpus_io.hpp"
#include "listrank/data_forge.hpp"
#include "listrank/error.hpp"
#include "listrank/file_util.hpp"
#include "listrank/metrics.hpp"
#include "listrank/window_engine.hpp"

namespace listrank::cli {

namespace fs = std::filesystem;

namespace {

enum class LogLevel { error, warn, info, debug };

class Logger {
public:
  explicit Logger(std::ostream &sink) : sink_(sink) {}
  void set_level(LogLevel level) { level_ = level; }
  void log(LogLevel level, const std::string &message) const {
    if (level > level_)
      return;
    static const char *names[] = {"error", "warn", "info", "debug"};
    sink_ << "[" << names[static_cast<int>(level)] << "] " << message << '\n';
  }
  void info(const std::string &m) const { log(LogLevel::info, m); }
  void warn(const std::string &m) const { log(LogLevel::warn, m); }

private:
  std::ostream &sink_;
  LogLevel level_ = LogLevel::info;
};

struct Globals {
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string log_level = "info";
  std::string out_dir;
};

fs::path resolve_out(const Globals &g, const std::string &path) {
  fs::path p(path);
  if (g.out_dir.empty() || p.is_absolute())
    return p;
  return fs::path(g.out_dir) / p;
}

// Records every option of the subcommand chain with its resolved value.
nlohmann::ordered_json describe(const CLI::App &app) {
  nlohmann::ordered_json options = nlohmann::ordered_json::object();
  for (const auto *opt : app.get_options()) {
    if (opt->get_lnames().empty())
      continue;
    const auto &name = opt->get_lnames().front();
    if (name == "help")
      continue;
    if (opt->get_expected_max() == 0) {
      options[name] = opt->count() > 0;
      continue;
    }
    if (opt->count()) {
      auto results = opt->results();
      if (results.size() == 1)
        options[name] = results.front();
      else
        options[name] = results;
    } else if (!opt->get_default_str().empty()) {
      options[name] = opt->get_default_str();
    }
  }
  return options;
}

void write_config_echo(const fs::path &out, const std::string &command,
                       const CLI::App &root, const CLI::App &sub,
                       const nlohmann::ordered_json &extra = {}) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["global"] = describe(root);
  j["options"] = describe(sub);
  if (!extra.is_null())
    j["summary"] = extra;
  fs::path echo = out;
  echo += ".config.json";
  write_file_atomic(echo, [&](std::ostream &os) { os << j.dump(2) << '\n'; });
}

prompting::PromptTemplate load_template(const std::string &path) {
  return path.empty() ? prompting::PromptTemplate::standard()
                      : prompting::PromptTemplate::load(path);
}

std::vector<std::string> split_list(const std::string &text) {
  std::vector<std::string> items;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty())
      items.push_back(item);
  return items;
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out,
        std::ostream &err) {
  Logger logger(err);
  Globals g;
  CLI::App app{"Listwise passage reranking toolkit: BM25 retrieval, "
               "sliding-window reranking, training data, evaluation"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.add_option("--seed", g.seed, "Seed for every random choice");
  app.add_option("--workers", g.workers, "Parallel query workers")
      ->check(CLI::PositiveNumber);
  app.add_option("--log-level", g.log_level, "error, warn, info or debug")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}));
  app.add_option("--out-dir", g.out_dir,
                 "Directory for relative output paths");

  // index
  struct {
    std::string corpus, out;
  } index_opts;
  auto *index_cmd = app.add_subcommand("index", "Build a BM25 index");
  index_cmd->add_option("--corpus", index_opts.corpus, "JSONL or TSV corpus")
      ->required();
  index_cmd->add_option("--out", index_opts.out, "Index file")->required();

  // retrieve
  struct {
    std::string index, queries, out, tag = "bm25";
    std::size_t k = 100;
    double k1 = 0.9, b = 0.4;
  } retrieve_opts;
  auto *retrieve_cmd = app.add_subcommand("retrieve", "BM25 top-k retrieval");
  retrieve_cmd->add_option("--index", retrieve_opts.index)->required();
  retrieve_cmd->add_option("--queries", retrieve_opts.queries, "qid<TAB>text")
      ->required();
  retrieve_cmd->add_option("--k", retrieve_opts.k)->check(CLI::PositiveNumber);
  retrieve_cmd->add_option("--k1", retrieve_opts.k1);
  retrieve_cmd->add_option("--b", retrieve_opts.b);
  retrieve_cmd->add_option("--tag", retrieve_opts.tag);
  retrieve_cmd->add_option("--out", retrieve_opts.out)->required();

  // rerank
  struct {
    std::string run, backend, out, trace, corpus, queries, qrels, tmpl;
    std::string fallback = "keep";
    window_engine::WindowConfig window;
    prompting::PromptBudget budget;
    backends::HttpBackendConfig http;
    long timeout_ms = 60000;
    long backoff_ms = 500;
  } rerank_opts;
  auto *rerank_cmd =
      app.add_subcommand("rerank", "Sliding-window listwise reranking");
  rerank_cmd->add_option("--run", rerank_opts.run, "First-stage run")
      ->required();
  rerank_cmd
      ->add_option("--backend", rerank_opts.backend,
                   "identity | oracle[:noise=P,seed=S] | http:<url>#<model>")
      ->required();
  rerank_cmd->add_option("--window", rerank_opts.window.size);
  rerank_cmd->add_option("--stride", rerank_opts.window.stride);
  rerank_cmd->add_option("--passes", rerank_opts.window.passes);
  rerank_cmd->add_option("--out", rerank_opts.out)->required();
  rerank_cmd->add_option("--trace", rerank_opts.trace, "Trace JSON output");
  rerank_cmd->add_option("--corpus", rerank_opts.corpus, "Passage text");
  rerank_cmd->add_option("--queries", rerank_opts.queries, "Query text");
  rerank_cmd->add_option("--qrels", rerank_opts.qrels, "Judgments (oracle)");
  rerank_cmd->add_option("--template", rerank_opts.tmpl, "Prompt template");
  rerank_cmd->add_option("--max-units", rerank_opts.budget.max_units);
  rerank_cmd->add_option("--passage-cap", rerank_opts.budget.per_passage_cap);
  rerank_cmd->add_option("--fallback", rerank_opts.fallback)
      ->check(CLI::IsMember({"keep", "retry"}));
  rerank_cmd->add_option("--temperature", rerank_opts.http.temperature);
  rerank_cmd->add_option("--timeout-ms", rerank_opts.timeout_ms);
  rerank_cmd->add_option("--retries", rerank_opts.http.max_retries);
  rerank_cmd->add_option("--backoff-ms", rerank_opts.backoff_ms);
  rerank_cmd->add_option("--auth-env", rerank_opts.http.auth_env,
                         "Environment variable holding the bearer token");
  rerank_cmd->add_option("--max-window", rerank_opts.http.max_window);

  // makedata
  struct {
    std::string mode, candidates, silver, queries, qrels, corpus, index, out,
        tmpl;
    std::size_t n = 5000, per_query = 20, silver_depth = 1000;
    bool shuffle = false;
    double k1 = 0.9, b = 0.4;
    prompting::PromptBudget budget;
  } data_opts;
  auto *data_cmd =
      app.add_subcommand("makedata", "Forge listwise fine-tuning data");
  data_cmd->add_option("--mode", data_opts.mode)
      ->required()
      ->check(CLI::IsMember({"pgt", "silver"}));
  data_cmd->add_option("--candidates", data_opts.candidates)->required();
  data_cmd->add_option("--silver", data_opts.silver,
                       "Silver run; omit to compute BM25 silver from --index");
  data_cmd->add_option("--index", data_opts.index, "BM25 index for silver");
  data_cmd->add_option("--silver-depth", data_opts.silver_depth);
  data_cmd->add_option("--k1", data_opts.k1);
  data_cmd->add_option("--b", data_opts.b);
  data_cmd->add_option("--queries", data_opts.queries)->required();
  data_cmd->add_option("--qrels", data_opts.qrels);
  data_cmd->add_option("--corpus", data_opts.corpus)->required();
  data_cmd->add_option("--n", data_opts.n, "Number of queries")
      ->check(CLI::PositiveNumber);
  data_cmd->add_option("--per-query", data_opts.per_query);
  data_cmd->add_flag("--shuffle", data_opts.shuffle,
                     "Shuffle each input window");
  data_cmd->add_option("--template", data_opts.tmpl);
  data_cmd->add_option("--max-units", data_opts.budget.max_units);
  data_cmd->add_option("--passage-cap", data_opts.budget.per_passage_cap);
  data_cmd->add_option("--out", data_opts.out)->required();

  // eval
  struct {
    std::string run, qrels, add_qrels, compare, json;
    std::string metrics = "ndcg@10,judged@10";
  } eval_opts;
  auto *eval_cmd = app.add_subcommand("eval", "Evaluate a run");
  eval_cmd->add_option("--run", eval_opts.run)->required();
  eval_cmd->add_option("--qrels", eval_opts.qrels)->required();
  eval_cmd->add_option("--add-qrels", eval_opts.add_qrels,
                       "Extra judgments merged before evaluation");
  eval_cmd->add_option("--metrics", eval_opts.metrics);
  eval_cmd->add_option("--compare", eval_opts.compare,
                       "Second run for a paired t-test");
  eval_cmd->add_option("--json", eval_opts.json, "Write results as JSON");

  // analyze movement
  struct {
    std::string before, after, qrels, out, json, grade = "min:1";
    std::size_t k = 100, block_n = 20, block_m = 10;
  } move_opts;
  auto *analyze_cmd = app.add_subcommand("analyze", "Reranking analyses");
  analyze_cmd->require_subcommand(1);
  auto *move_cmd = analyze_cmd->add_subcommand(
      "movement", "Position movement of relevant passages");
  move_cmd->add_option("--before", move_opts.before)->required();
  move_cmd->add_option("--after", move_opts.after)->required();
  move_cmd->add_option("--qrels", move_opts.qrels)->required();
  move_cmd->add_option("--k", move_opts.k)->check(CLI::PositiveNumber);
  move_cmd->add_option("--grade", move_opts.grade, "1|2|3|min:N");
  move_cmd->add_option("--block-n", move_opts.block_n);
  move_cmd->add_option("--block-m", move_opts.block_m);
  move_cmd->add_option("--out", move_opts.out, "Matrix CSV")->required();
  move_cmd->add_option("--json", move_opts.json, "Block statistics JSON");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp &) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp &) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError &e) {
    err << "listrank: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  logger.set_level(g.log_level == "error"  ? LogLevel::error
                   : g.log_level == "warn" ? LogLevel::warn
                   : g.log_level == "debug" ? LogLevel::debug
                                            : LogLevel::info);
  try {
    if (index_cmd->parsed()) {
      Corpus corpus(load_corpus(index_opts.corpus));
      auto index = bm25::InvertedIndex::build(corpus);
      const auto path = resolve_out(g, index_opts.out);
      index.save(path);
      write_config_echo(path, "index", app, *index_cmd,
                        {{"passages", index.num_docs()},
                         {"terms", index.num_terms()}});
      logger.info("indexed " + std::to_string(index.num_docs()) +
                  " passages, " + std::to_string(index.num_terms()) +
                  " terms");
      return 0;
    }

    if (retrieve_cmd->parsed()) {
      auto index = bm25::InvertedIndex::load(retrieve_opts.index);
      QuerySet queries(load_queries(retrieve_opts.queries));
      bm25::Params params{retrieve_opts.k1, retrieve_opts.b};
      params.validate();
      auto run = bm25::retrieve_all(index, params, queries.queries(),
                                    retrieve_opts.k, g.workers,
                                    retrieve_opts.tag);
      const auto path = resolve_out(g, retrieve_opts.out);
      save_run(run, path);
      write_config_echo(path, "retrieve", app, *retrieve_cmd);
      logger.info("retrieved " + std::to_string(run.size()) + " queries");
      return 0;
    }

    if (rerank_cmd->parsed()) {
      auto &o = rerank_opts;
      Run input = load_run(o.run);
      std::optional<Corpus> corpus;
      std::optional<QuerySet> queries;
      if (!o.corpus.empty())
        corpus.emplace(load_corpus(o.corpus));
      if (!o.queries.empty())
        queries.emplace(load_queries(o.queries));
      backends::BackendContext context;
      if (!o.qrels.empty())
        context.qrels = std::make_shared<const Qrels>(load_qrels(o.qrels));
      context.default_seed = g.seed;
      context.http = o.http;
      context.http.timeout = std::chrono::milliseconds(o.timeout_ms);
      context.http.retry_backoff = std::chrono::milliseconds(o.backoff_ms);
      if (o.backend.starts_with("http:") && (!corpus || !queries))
        throw Error("http backends need --corpus and --queries for prompts");
      auto backend = backends::make_backend(o.backend, context);

      window_engine::RerankOptions options;
      options.window = o.window;
      options.budget = o.budget;
      options.prompt_template = load_template(o.tmpl);
      options.fallback = o.fallback == "retry"
                             ? window_engine::FallbackPolicy::retry_then_keep
                             : window_engine::FallbackPolicy::keep_order;
      window_engine::TextSource text{corpus ? &*corpus : nullptr,
                                     queries ? &*queries : nullptr};
      auto result =
          window_engine::rerank_run(*backend, input, options, text, g.workers);

      std::size_t windows = 0, repaired = 0, fallbacks = 0;
      ParseAnomalies anomalies;
      for (const auto &t : result.traces) {
        windows += t.windows.size();
        fallbacks += t.fallback_count;
        for (const auto &w : t.windows) {
          repaired += w.repaired;
          anomalies.duplicate += w.anomalies.duplicate;
          anomalies.out_of_range += w.anomalies.out_of_range;
          anomalies.missing += w.anomalies.missing;
          anomalies.garbage_text += w.anomalies.garbage_text;
          if (w.fallback)
            logger.log(LogLevel::debug, "query " + t.query_id + " window@" +
                                            std::to_string(w.start) +
                                            " fell back: " + w.error);
        }
        if (t.failed)
          logger.warn("query " + t.query_id +
                      ": every window fell back, first-stage order kept");
      }
      const auto path = resolve_out(g, o.out);
      save_run(result.run, path);
      if (!o.trace.empty()) {
        write_file_atomic(resolve_out(g, o.trace), [&](std::ostream &os) {
          window_engine::write_trace(result, *backend, options, os);
        });
      }
      nlohmann::ordered_json summary{
          {"queries", result.run.size()},
          {"windows", windows},
          {"repaired_windows", repaired},
          {"fallback_windows", fallbacks},
          {"failed_queries", result.failed_queries},
          {"anomalies",
           {{"duplicate", anomalies.duplicate},
            {"out_of_range", anomalies.out_of_range},
            {"missing", anomalies.missing},
            {"garbage_text", anomalies.garbage_text}}}};
      write_config_echo(path, "rerank", app, *rerank_cmd, summary);
      out << "queries " << result.run.size() << ", windows " << windows
          << ", repaired " << repaired << ", fallbacks " << fallbacks
          << ", failed queries " << result.failed_queries << '\n';
      if (result.failed_queries) {
        err << "listrank: " << result.failed_queries
            << " query(ies) could not be reranked\n";
        return 1;
      }
      return 0;
    }

    if (data_cmd->parsed()) {
      auto &o = data_opts;
      QuerySet queries(load_queries(o.queries));
      Corpus corpus(load_corpus(o.corpus));
      Run candidates = load_run(o.candidates);
      data_forge::ForgeConfig config;
      config.num_queries = o.n;
      config.passages_per_query = o.per_query;
      config.shuffle_input = o.shuffle;
      config.seed = g.seed;
      config.budget = o.budget;
      config.prompt_template = load_template(o.tmpl);
      data_forge::Dataset dataset;
      if (o.mode == "pgt") {
        if (o.qrels.empty())
          throw Error("--mode pgt needs --qrels");
        dataset = data_forge::forge_pgt(queries, corpus, load_qrels(o.qrels),
                                        candidates, config);
      } else {
        Run silver;
        if (!o.silver.empty()) {
          silver = load_run(o.silver);
        } else {
          if (o.index.empty())
            throw Error("--mode silver needs --silver or --index");
          auto index = bm25::InvertedIndex::load(o.index);
          bm25::Params params{o.k1, o.b};
          params.validate();
          silver = data_forge::bm25_silver_run(index, params, queries,
                                               o.silver_depth, g.workers);
        }
        dataset = data_forge::forge_silver(queries, corpus, silver,
                                           candidates, config);
      }
      for (const auto &w : dataset.warnings)
        logger.warn(w);
      const auto path = resolve_out(g, o.out);
      data_forge::export_jsonl(dataset, path);
      write_config_echo(path, "makedata", app, *data_cmd,
                        {{"examples", dataset.examples.size()},
                         {"skipped_no_relevant", dataset.skipped_no_relevant},
                         {"skipped_short", dataset.skipped_short},
                         {"skipped_no_silver", dataset.skipped_no_silver}});
      out << "examples " << dataset.examples.size() << ", skipped "
          << dataset.skipped_no_relevant + dataset.skipped_short +
                 dataset.skipped_no_silver
          << '\n';
      return 0;
    }

    if (eval_cmd->parsed()) {
      auto &o = eval_opts;
      Run run = load_run(o.run);
      Qrels qrels = load_qrels(o.qrels);
      if (!o.add_qrels.empty())
        qrels = metrics::merge_qrels(qrels, load_qrels(o.add_qrels));
      std::optional<Run> other;
      if (!o.compare.empty())
        other = load_run(o.compare);
      const auto names = split_list(o.metrics);
      if (names.empty())
        throw Error("no metrics requested");

      nlohmann::ordered_json json;
      json["run"] = o.run;
      auto &rows = json["metrics"] = nlohmann::ordered_json::array();
      std::ostringstream table;
      table << std::left << std::setw(14) << "metric" << std::right
            << std::setw(10) << "mean" << std::setw(9) << "queries";
      if (other)
        table << std::setw(10) << "compare" << std::setw(10) << "t"
              << std::setw(12) << "p";
      table << '\n';
      for (const auto &name : names) {
        auto report = metrics::evaluate(name, run, qrels);
        nlohmann::ordered_json row{{"metric", report.name},
                                   {"mean", report.mean},
                                   {"queries", report.per_query.size()},
                                   {"excluded", report.excluded},
                                   {"per_query", report.per_query}};
        table << std::left << std::setw(14) << report.name << std::right
              << std::setw(10) << fixed(report.mean) << std::setw(9)
              << report.per_query.size();
        if (other) {
          auto other_report = metrics::evaluate(name, *other, qrels);
          auto test = metrics::paired_ttest(report, other_report);
          std::ostringstream p;
          p << std::setprecision(3) << test.p_value;
          table << std::setw(10) << fixed(other_report.mean) << std::setw(10)
                << fixed(test.t, 3) << std::setw(12) << p.str();
          row["compare"] = {{"run", o.compare},
                            {"mean", other_report.mean},
                            {"t", std::isfinite(test.t)
                                      ? nlohmann::ordered_json(test.t)
                                      : nlohmann::ordered_json(
                                            test.t > 0 ? "inf" : "-inf")},
                            {"p", test.p_value},
                            {"n", test.n}};
        }
        table << '\n';
        rows.push_back(std::move(row));
      }
      out << table.str();
      if (!o.json.empty())
        write_file_atomic(resolve_out(g, o.json), [&](std::ostream &os) {
          os << json.dump(2) << '\n';
        });
      return 0;
    }

    if (move_cmd->parsed()) {
      auto &o = move_opts;
      auto filter = analysis::GradeFilter::parse(o.grade);
      auto matrix = analysis::movement_matrix(load_run(o.before),
                                              load_run(o.after),
                                              load_qrels(o.qrels), o.k, filter);
      auto stats = analysis::block_stats(matrix, o.block_n, o.block_m);
      const auto path = resolve_out(g, o.out);
      analysis::export_matrix(matrix, path);
      nlohmann::ordered_json summary{
          {"k", matrix.k()},
          {"grade", filter.to_string()},
          {"pairs", matrix.total()},
          {"left_top_k", matrix.left_top_k},
          {"entered_top_k", matrix.entered_top_k},
          {"block_n", stats.block_size},
          {"block_m", stats.stride},
          {"diagonal_block_mass", stats.diagonal_block_mass},
          {"long_promotion_mass", stats.long_promotion_mass}};
      if (!o.json.empty())
        write_file_atomic(resolve_out(g, o.json), [&](std::ostream &os) {
          os << summary.dump(2) << '\n';
        });
      write_config_echo(path, "analyze movement", app, *move_cmd, summary);
      out << "pairs " << matrix.total() << ", diagonal_block_mass "
          << fixed(stats.diagonal_block_mass) << ", long_promotion_mass "
          << fixed(stats.long_promotion_mass) << '\n';
      return 0;
    }
  } catch (const std::exception &e) {
    err << "listrank: error: " << e.what() << '\n';
    return 1;
  }
  err << app.help();
  return 2;
}

int run(int argc, char **argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i)
    args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

} // namespace listrank::cli
