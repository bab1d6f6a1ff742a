#include "rerank/backend.hpp"

#include <algorithm>
#include <thread>

#include <fmt/format.h>

namespace rerank {

std::string_view to_string(RequestPurpose purpose) {
  switch (purpose) {
    case RequestPurpose::Rerank:
      return "rerank";
    case RequestPurpose::SelectPositives:
      return "select-positives";
    case RequestPurpose::SelectHardNegatives:
      return "select-hard-negatives";
    case RequestPurpose::ListwiseLabel:
      return "listwise-label";
  }
  return "rerank";
}

bool AttemptError::retryable() const {
  return http_status_ == 0 || http_status_ == 429 || (http_status_ >= 500 && http_status_ <= 599);
}

void BackendConfig::validate() const {
  if (!(timeout_seconds > 0.0)) throw std::invalid_argument("backend timeout must be > 0");
  if (retries < 0) throw std::invalid_argument("backend retries must be >= 0");
  if (concurrency < 1) throw std::invalid_argument("backend concurrency must be >= 1");
  if (backoff_base_ms < 0 || backoff_max_ms < 0) throw std::invalid_argument("backoff must be >= 0");
  if (max_tokens < 1) throw std::invalid_argument("max tokens must be >= 1");
}

std::chrono::milliseconds backoff_delay(const BackendConfig& config, int retry) {
  const auto cap = static_cast<std::int64_t>(config.backoff_max_ms);
  std::int64_t delay = config.backoff_base_ms;
  for (int i = 1; i < retry && delay < cap; ++i) delay *= 2;
  return std::chrono::milliseconds(std::min(delay, cap));
}

Gateway::Gateway(std::shared_ptr<ChatBackend> backend, BackendConfig config, Sleeper sleeper)
    : backend_(std::move(backend)),
      config_(std::move(config)),
      sleeper_(std::move(sleeper)),
      permits_((config_.validate(), config_.concurrency)) {
  if (!backend_) throw std::invalid_argument("gateway requires a backend");
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

ChatResponse Gateway::complete(const ChatRequest& request) {
  if (request.messages.empty()) throw std::invalid_argument("chat request has no messages");

  struct Permit {
    std::counting_semaphore<>& sem;
    explicit Permit(std::counting_semaphore<>& s) : sem(s) { sem.acquire(); }
    ~Permit() { sem.release(); }
  } permit(permits_);

  const int max_attempts = config_.retries + 1;
  const auto started = std::chrono::steady_clock::now();
  std::string last_error;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    if (attempt > 1) sleeper_(backoff_delay(config_, attempt - 1));
    try {
      ChatResponse response = backend_->complete(request);
      response.attempts = attempt;
      response.latency_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      return response;
    } catch (const AttemptError& e) {
      if (!e.retryable()) {
        throw ProtocolError(fmt::format("request {}: {}", request.request_id, e.what()), request.request_id,
                            attempt, e.http_status());
      }
      last_error = e.what();
    }
  }
  throw TransportError(
      fmt::format("request {}: gave up after {} attempts: {}", request.request_id, max_attempts, last_error),
      request.request_id, max_attempts);
}

}  // namespace rerank
