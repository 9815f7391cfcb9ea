#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "listrank/backends.hpp"
#include "listrank/error.hpp"

namespace listrank::backends {

namespace {

bool retryable_status(int status) {
  return status == 408 || status == 429 || status >= 500;
}

} // namespace

void HttpBackendConfig::validate() const {
  if (endpoint.empty())
    throw Error("http backend needs an endpoint URL");
  if (model.empty())
    throw Error("http backend needs a model name");
  if (!(temperature >= 0.0))
    throw Error("temperature must be >= 0");
  if (max_retries < 0)
    throw Error("max retries must be >= 0");
  if (timeout.count() <= 0)
    throw Error("timeout must be positive");
  if (max_window == 0)
    throw Error("max window must be positive");
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  config_.validate();
  std::string_view url = config_.endpoint;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos)
    throw Error("endpoint '" + config_.endpoint + "' lacks a scheme");
  auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https")
    throw Error("unsupported scheme in '" + config_.endpoint + "'");
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (scheme == "https")
    throw Error("this build has no TLS support; use an http:// endpoint");
#endif
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string_view::npos) {
    endpoint_.scheme_host_port = std::string(url);
    endpoint_.path = "/v1/chat/completions";
  } else {
    endpoint_.scheme_host_port = std::string(url.substr(0, path_start));
    endpoint_.path = std::string(url.substr(path_start));
  }
  if (endpoint_.scheme_host_port.size() <= scheme_end + 3)
    throw Error("endpoint '" + config_.endpoint + "' has no host");
}

Capabilities HttpBackend::capabilities() const {
  return {"http-" + config_.model, config_.max_window};
}

std::string HttpBackend::request_body(std::string_view prompt) const {
  nlohmann::ordered_json body;
  body["model"] = config_.model;
  body["messages"] = nlohmann::ordered_json::array(
      {{{"role", "user"}, {"content", std::string(prompt)}}});
  body["temperature"] = config_.temperature;
  for (const auto &[key, raw] : config_.extra_fields) {
    auto value = nlohmann::ordered_json::parse(raw, nullptr, false);
    body[key] = value.is_discarded() ? nlohmann::ordered_json(raw) : value;
  }
  return body.dump();
}

std::string HttpBackend::rank_window(const WindowRequest &request) const {
  if (request.items.size() > config_.max_window)
    throw BackendError("window of " + std::to_string(request.items.size()) +
                       " exceeds backend max " +
                       std::to_string(config_.max_window));
  const std::string body = request_body(request.prompt);
  httplib::Headers headers;
  if (!config_.auth_env.empty())
    if (const char *token = std::getenv(config_.auth_env.c_str());
        token && *token)
      headers.emplace("Authorization", std::string("Bearer ") + token);

  httplib::Client client(endpoint_.scheme_host_port);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);

  std::string last_error;
  auto backoff = config_.retry_backoff;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0 && backoff.count() > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    auto result = client.Post(endpoint_.path, headers, body,
                              "application/json");
    if (!result) {
      last_error = "request failed: " + httplib::to_string(result.error());
      continue;
    }
    if (result->status < 200 || result->status >= 300) {
      last_error = "HTTP " + std::to_string(result->status);
      if (!result->body.empty())
        last_error += ": " + result->body.substr(0, 200);
      if (retryable_status(result->status))
        continue;
      break;
    }
    auto reply = nlohmann::json::parse(result->body, nullptr, false);
    if (reply.is_discarded())
      throw BackendError("response is not JSON");
    try {
      return reply.at("choices").at(0).at("message").at("content")
          .get<std::string>();
    } catch (const nlohmann::json::exception &) {
      throw BackendError("response lacks choices[0].message.content");
    }
  }
  throw BackendError(config_.endpoint + ": " + last_error);
}

} // namespace listrank::backends
