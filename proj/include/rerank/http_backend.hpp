#pragma once

#include <optional>
#include <string>

#include "rerank/backend.hpp"

namespace rerank {

struct EndpointUrl {
  std::string scheme;  // "http" or "https"
  std::string host;
  int port = 0;
  std::string path;
};

/// Throws std::invalid_argument on anything that is not `http(s)://host[:port][/path]`.
[[nodiscard]] EndpointUrl parse_endpoint(const std::string& url);

/// JSON request body in the chat-completions shape. See docs/formats.md.
[[nodiscard]] std::string build_request_body(const BackendConfig& config, const ChatRequest& request);

/// Reads `choices[0].message.content` (+ optional `reasoning_content`) and `usage`.
/// Throws AttemptError with status -1 when the body cannot be understood.
[[nodiscard]] ChatResponse parse_response_body(const std::string& body);

/// Remote chat-completions endpoint over HTTP(S). One POST per attempt.
class HttpBackend : public ChatBackend {
 public:
  /// The bearer token is read from RERANK_API_KEY unless given explicitly.
  explicit HttpBackend(BackendConfig config, std::optional<std::string> api_key = std::nullopt);
  ChatResponse complete(const ChatRequest& request) override;
  [[nodiscard]] std::string name() const override { return "http"; }

 private:
  BackendConfig config_;
  EndpointUrl url_;
  std::string api_key_;
};

}  // namespace rerank
