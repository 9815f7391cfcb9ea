#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "listrank/corpus_io.hpp"

namespace listrank::backends {

// One passage as presented to a backend. first_stage_rank is the 1-based
// rank in the list handed to the reranker, not the current window order.
struct WindowItem {
  std::string_view passage_id;
  std::string_view title;
  std::string_view body;
  int first_stage_rank = 0;
};

struct WindowRequest {
  std::string_view query_id;
  std::string_view query_text;
  std::span<const WindowItem> items;
  std::string_view prompt; // rendered listwise prompt for this window
};

struct Capabilities {
  std::string name;
  std::size_t max_window = 100;
};

// A listwise ranker. Implementations are shared across per-query workers,
// so rank_window must be safe to call concurrently. It returns the raw
// completion text; parsing belongs to the caller. Failures are reported as
// BackendError.
class ListwiseBackend {
public:
  virtual ~ListwiseBackend() = default;
  virtual Capabilities capabilities() const = 0;
  virtual std::string rank_window(const WindowRequest &request) const = 0;
};

// Returns "[1] > [2] > ... > [n]".
class IdentityBackend final : public ListwiseBackend {
public:
  Capabilities capabilities() const override { return {"identity", 100}; }
  std::string rank_window(const WindowRequest &request) const override;
};

struct OracleConfig {
  double noise = 0.0; // adjacent-transposition rate p in [0, 1]
  std::uint64_t seed = 0;
  void validate() const;
};

// Sorts the window by (grade desc, first-stage rank asc) using judgments,
// then applies floor(p * n) random adjacent transpositions. The random
// stream is derived from the seed, the query id and the window's passage
// ids, so identical calls give identical output on any thread.
class OracleBackend final : public ListwiseBackend {
public:
  OracleBackend(std::shared_ptr<const Qrels> qrels, OracleConfig config);
  Capabilities capabilities() const override;
  std::string rank_window(const WindowRequest &request) const override;
  const OracleConfig &config() const { return config_; }

private:
  std::shared_ptr<const Qrels> qrels_;
  OracleConfig config_;
};

struct HttpBackendConfig {
  std::string endpoint; // e.g. http://localhost:8000/v1/chat/completions
  std::string model;
  double temperature = 0.0;
  std::chrono::milliseconds timeout{60000};
  int max_retries = 2;
  std::chrono::milliseconds retry_backoff{500}; // doubled on each retry
  std::string auth_env = "OPENAI_API_KEY";      // empty: no Authorization
  std::size_t max_window = 100;
  // Extra top-level request fields, merged verbatim (JSON values as text).
  std::map<std::string, std::string> extra_fields;
  void validate() const;
};

// Chat-completions client: POSTs {model, messages: [{role: user, content:
// prompt}], temperature} and returns choices[0].message.content.
class HttpBackend final : public ListwiseBackend {
public:
  explicit HttpBackend(HttpBackendConfig config);
  Capabilities capabilities() const override;
  std::string rank_window(const WindowRequest &request) const override;
  const HttpBackendConfig &config() const { return config_; }

  // Request body for a prompt, exposed for inspection and tests.
  std::string request_body(std::string_view prompt) const;

private:
  struct Endpoint {
    std::string scheme_host_port;
    std::string path;
  };
  HttpBackendConfig config_;
  Endpoint endpoint_;
};

// Everything a selector string may need besides its own parameters.
struct BackendContext {
  std::shared_ptr<const Qrels> qrels; // required by oracle selectors
  HttpBackendConfig http;             // defaults for http selectors
  std::uint64_t default_seed = 0;     // oracle seed when none is given
};

// Selector grammar: `identity`, `oracle`, `oracle:noise=0.3,seed=7`,
// `http:<url>#<model>`.
std::unique_ptr<ListwiseBackend> make_backend(std::string_view selector,
                                              const BackendContext &context);

} // namespace listrank::backends
