#include "rerank/http_backend.hpp"

#include <cstdlib>
#include <regex>

#include <httplib.h>
#include <json.hpp>

namespace rerank {

using nlohmann::json;

EndpointUrl parse_endpoint(const std::string& url) {
  static const std::regex pattern(R"(^(https?)://([^/:]+)(?::(\d+))?(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, pattern)) throw std::invalid_argument("invalid endpoint URL: " + url);
  EndpointUrl out;
  out.scheme = m[1].str();
  out.host = m[2].str();
  out.port = m[3].matched ? std::stoi(m[3].str()) : (out.scheme == "https" ? 443 : 80);
  out.path = m[4].matched ? m[4].str() : "/";
  if (out.port <= 0 || out.port > 65535) throw std::invalid_argument("invalid endpoint port: " + url);
  return out;
}

std::string build_request_body(const BackendConfig& config, const ChatRequest& request) {
  auto messages = nlohmann::ordered_json::array();
  for (const auto& m : request.messages) {
    nlohmann::ordered_json message;
    message["role"] = m.role;
    message["content"] = m.content;
    messages.push_back(std::move(message));
  }
  nlohmann::ordered_json body;
  body["model"] = config.model;
  body["messages"] = std::move(messages);
  body["temperature"] = config.temperature;
  body["max_tokens"] = config.max_tokens;
  body["stream"] = false;
  return body.dump();
}

ChatResponse parse_response_body(const std::string& body) {
  const auto doc = json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object()) throw AttemptError("response body is not a JSON object", -1);
  const auto choices = doc.find("choices");
  if (choices == doc.end() || !choices->is_array() || choices->empty()) {
    throw AttemptError("response has no choices", -1);
  }
  ChatResponse out;
  try {
    const auto& message = (*choices)[0].at("message");
    if (!message.is_object()) throw AttemptError("response message is not an object", -1);
    const auto content = message.find("content");
    if (content != message.end() && content->is_string()) out.text = content->get<std::string>();
    const auto reasoning = message.find("reasoning_content");
    if (reasoning != message.end() && reasoning->is_string()) out.reasoning = reasoning->get<std::string>();
    if (const auto usage = doc.find("usage"); usage != doc.end() && usage->is_object()) {
      TokenUsage u;
      u.prompt_tokens = usage->value("prompt_tokens", std::int64_t{0});
      u.completion_tokens = usage->value("completion_tokens", std::int64_t{0});
      out.usage = u;
    }
  } catch (const json::exception& e) {
    throw AttemptError(std::string("unexpected response shape: ") + e.what(), -1);
  }
  return out;
}

HttpBackend::HttpBackend(BackendConfig config, std::optional<std::string> api_key)
    : config_(std::move(config)), url_(parse_endpoint(config_.endpoint)) {
  config_.validate();
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (url_.scheme == "https") throw std::invalid_argument("built without TLS support; https endpoints unavailable");
#endif
  if (api_key) {
    api_key_ = std::move(*api_key);
  } else if (const char* env = std::getenv(kApiKeyEnv)) {
    api_key_ = env;
  }
}

ChatResponse HttpBackend::complete(const ChatRequest& request) {
  const auto base = url_.scheme + "://" + url_.host + ":" + std::to_string(url_.port);
  httplib::Client client(base);
  const auto secs = static_cast<time_t>(config_.timeout_seconds);
  const auto usecs = static_cast<time_t>((config_.timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers headers{{"Accept", "application/json"}};
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  if (!request.request_id.empty()) headers.emplace("X-Request-Id", request.request_id);

  auto result = client.Post(url_.path, headers, build_request_body(config_, request), "application/json");
  if (!result) throw AttemptError("transport failure: " + httplib::to_string(result.error()), 0);
  if (result->status != 200) {
    throw AttemptError("HTTP status " + std::to_string(result->status), result->status);
  }
  return parse_response_body(result->body);
}

}  // namespace rerank
