#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <vector>

namespace rerank {

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;
};

enum class RequestPurpose { Rerank, SelectPositives, SelectHardNegatives, ListwiseLabel };

[[nodiscard]] std::string_view to_string(RequestPurpose purpose);

struct ChatRequest {
  std::string request_id;
  RequestPurpose purpose = RequestPurpose::Rerank;
  std::vector<ChatMessage> messages;

  // Context for local test doubles and logging; never serialized to the wire.
  // item_ids[k-1] is the passage shown to the model as [k].
  std::string qid;
  std::vector<std::string> item_ids;
};

struct TokenUsage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

struct ChatResponse {
  std::string text;
  std::optional<std::string> reasoning;  // separate reasoning channel, when the backend exposes one
  std::optional<TokenUsage> usage;
  double latency_seconds = 0.0;  // wall clock across all attempts
  int attempts = 1;
};

// Raised by a single attempt.
class AttemptError : public std::runtime_error {
 public:
  AttemptError(const std::string& what, int http_status)
      : std::runtime_error(what), http_status_(http_status) {}
  /// 0 for transport-level failures (connect, timeout, reset).
  [[nodiscard]] int http_status() const { return http_status_; }
  [[nodiscard]] bool retryable() const;

 private:
  int http_status_;
};

// Raised by the gateway once a request is abandoned.
class BackendError : public std::runtime_error {
 public:
  BackendError(const std::string& what, std::string request_id, int attempts)
      : std::runtime_error(what), request_id_(std::move(request_id)), attempts_(attempts) {}
  [[nodiscard]] const std::string& request_id() const { return request_id_; }
  [[nodiscard]] int attempts() const { return attempts_; }

 private:
  std::string request_id_;
  int attempts_;
};

/// Retries exhausted on transport failures or retryable statuses (429, 5xx).
class TransportError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// Terminal non-retryable status or an unreadable response body.
class ProtocolError : public BackendError {
 public:
  ProtocolError(const std::string& what, std::string request_id, int attempts, int http_status)
      : BackendError(what, std::move(request_id), attempts), http_status_(http_status) {}
  [[nodiscard]] int http_status() const { return http_status_; }

 private:
  int http_status_;
};

struct BackendConfig {
  std::string endpoint;  // full URL of the chat-completions resource
  std::string model;
  double temperature = 0.6;
  int max_tokens = 4096;
  double timeout_seconds = 300.0;
  int retries = 2;  // extra attempts after the first
  int backoff_base_ms = 500;
  int backoff_max_ms = 30000;
  int concurrency = 4;

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;
};

/// Name of the environment variable holding the bearer token for remote endpoints.
inline constexpr const char* kApiKeyEnv = "RERANK_API_KEY";

/// A chat-completion endpoint. `complete` performs exactly one attempt and reports
/// failures as AttemptError.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  [[nodiscard]] virtual std::string name() const = 0;
};

/// Delay before retry number `retry` (1-based): base * 2^(retry-1), capped.
[[nodiscard]] std::chrono::milliseconds backoff_delay(const BackendConfig& config, int retry);

/// Shared front door to a backend: bounded concurrency, retry with exponential
/// backoff, latency accounting. Safe to share across threads.
class Gateway {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  Gateway(std::shared_ptr<ChatBackend> backend, BackendConfig config, Sleeper sleeper = {});

  /// Throws TransportError or ProtocolError; both carry the request id.
  ChatResponse complete(const ChatRequest& request);

  [[nodiscard]] const BackendConfig& config() const { return config_; }
  [[nodiscard]] const ChatBackend& backend() const { return *backend_; }

 private:
  std::shared_ptr<ChatBackend> backend_;
  BackendConfig config_;
  Sleeper sleeper_;
  std::counting_semaphore<> permits_;
};

}  // namespace rerank
