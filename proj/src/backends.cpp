#include "listrank/backends.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <vector>

#include "listrank/error.hpp"
#include "listrank/file_util.hpp"
#include "listrank/prompting.hpp"
#include "listrank/rank_parser.hpp"

namespace listrank::backends {

std::string IdentityBackend::rank_window(const WindowRequest &request) const {
  if (request.items.empty())
    throw BackendError("identity backend received an empty window");
  return prompting::render_completion(
      Permutation::identity(request.items.size()));
}

void OracleConfig::validate() const {
  if (!(noise >= 0.0 && noise <= 1.0))
    throw Error("oracle noise must be in [0, 1]");
}

OracleBackend::OracleBackend(std::shared_ptr<const Qrels> qrels,
                             OracleConfig config)
    : qrels_(std::move(qrels)), config_(config) {
  if (!qrels_)
    throw Error("oracle backend requires relevance judgments");
  config_.validate();
}

Capabilities OracleBackend::capabilities() const {
  return {config_.noise > 0.0 ? "oracle-noisy" : "oracle", 100};
}

std::string OracleBackend::rank_window(const WindowRequest &request) const {
  const auto n = request.items.size();
  if (n == 0)
    throw BackendError("oracle backend received an empty window");
  std::vector<int> grade(n);
  for (std::size_t i = 0; i < n; ++i)
    grade[i] = qrels_->grade(request.query_id, request.items[i].passage_id)
                   .value_or(0);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 1);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const auto &ia = request.items[a - 1];
    const auto &ib = request.items[b - 1];
    if (grade[a - 1] != grade[b - 1])
      return grade[a - 1] > grade[b - 1];
    return ia.first_stage_rank < ib.first_stage_rank;
  });
  const auto swaps = static_cast<std::size_t>(
      std::floor(config_.noise * static_cast<double>(n)));
  if (swaps > 0 && n > 1) {
    StableHash h;
    h.add(config_.seed).add(request.query_id);
    for (const auto &item : request.items)
      h.add(item.passage_id);
    SplitMix64 rng(h.value());
    for (std::size_t s = 0; s < swaps; ++s) {
      const auto i = static_cast<std::size_t>(rng.below(n - 1));
      std::swap(order[i], order[i + 1]);
    }
  }
  return prompting::render_completion(Permutation(std::move(order)));
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && s.front() == ' ')
    s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ')
    s.remove_suffix(1);
  return s;
}

OracleConfig parse_oracle_options(std::string_view options,
                                  std::uint64_t default_seed) {
  OracleConfig config;
  config.seed = default_seed;
  while (!options.empty()) {
    auto comma = options.find(',');
    auto item = trim(options.substr(0, comma));
    options = comma == std::string_view::npos ? std::string_view{}
                                              : options.substr(comma + 1);
    if (item.empty())
      continue;
    auto eq = item.find('=');
    if (eq == std::string_view::npos)
      throw Error("oracle option '" + std::string(item) + "' is not key=value");
    auto key = trim(item.substr(0, eq));
    std::string value(trim(item.substr(eq + 1)));
    if (key == "noise" || key == "p") {
      char *end = nullptr;
      config.noise = std::strtod(value.c_str(), &end);
      if (value.empty() || end != value.c_str() + value.size())
        throw Error("oracle noise '" + value + "' is not a number");
    } else if (key == "seed") {
      auto [ptr, ec] = std::from_chars(value.data(),
                                       value.data() + value.size(),
                                       config.seed);
      if (ec != std::errc() || ptr != value.data() + value.size())
        throw Error("oracle seed '" + value + "' is not an integer");
    } else {
      throw Error("unknown oracle option '" + std::string(key) + "'");
    }
  }
  config.validate();
  return config;
}

} // namespace

std::unique_ptr<ListwiseBackend> make_backend(std::string_view selector,
                                              const BackendContext &context) {
  if (selector == "identity")
    return std::make_unique<IdentityBackend>();
  if (selector == "oracle" || selector.starts_with("oracle:")) {
    auto options = selector == "oracle" ? std::string_view{}
                                        : selector.substr(7);
    if (!context.qrels)
      throw Error("oracle backend requires --qrels");
    return std::make_unique<OracleBackend>(
        context.qrels, parse_oracle_options(options, context.default_seed));
  }
  if (selector.starts_with("http:")) {
    auto rest = selector.substr(5);
    auto hash = rest.rfind('#');
    if (hash == std::string_view::npos || hash + 1 == rest.size())
      throw Error("http backend selector must be http:<url>#<model>");
    auto config = context.http;
    config.endpoint = std::string(rest.substr(0, hash));
    config.model = std::string(rest.substr(hash + 1));
    return std::make_unique<HttpBackend>(std::move(config));
  }
  throw Error("unknown backend '" + std::string(selector) +
              "' (expected identity, oracle[:noise=..,seed=..] or "
              "http:<url>#<model>)");
}

} // namespace listrank::backends
