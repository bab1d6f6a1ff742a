#pragma once

// Deterministic local backends. Replies depend only on the constructor arguments
// and the request (qid, item_ids, purpose), so repeated calls are byte-identical
// and results do not depend on scheduling.

#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rerank/backend.hpp"
#include "rerank/types.hpp"

namespace rerank {

/// Builds the reply a well-behaved model would send for `purpose`, given a local
/// order (0-based positions into request.item_ids) and a set of selected positions.
[[nodiscard]] ChatResponse mock_reply(const ChatRequest& request, const std::vector<std::size_t>& order,
                                      const std::vector<std::size_t>& selected, std::string_view reasoning);

/// Keeps the presented order. Selects nothing.
class IdentityBackend : public ChatBackend {
 public:
  ChatResponse complete(const ChatRequest& request) override;
  [[nodiscard]] std::string name() const override { return "identity"; }
};

class ReverseBackend : public ChatBackend {
 public:
  ChatResponse complete(const ChatRequest& request) override;
  [[nodiscard]] std::string name() const override { return "reverse"; }
};

/// Ranks by hidden grade (descending, ties in presented order). As a teacher it
/// selects positives as grade > 0 and hard negatives as ids explicitly judged 0.
class OracleBackend : public ChatBackend {
 public:
  explicit OracleBackend(RelevanceJudgments judgments) : judgments_(std::move(judgments)) {}
  ChatResponse complete(const ChatRequest& request) override;
  [[nodiscard]] std::string name() const override { return "oracle"; }

  [[nodiscard]] std::vector<std::size_t> order_for(const ChatRequest& request) const;
  [[nodiscard]] std::vector<std::size_t> selection_for(const ChatRequest& request) const;

 private:
  RelevanceJudgments judgments_;
};

/// Identity (or oracle, when judgments are given) followed by seeded adjacent swaps:
/// each neighbouring pair is swapped with probability `swap_rate`.
class NoisyBackend : public ChatBackend {
 public:
  NoisyBackend(std::uint64_t seed, double swap_rate, std::optional<RelevanceJudgments> judgments = std::nullopt);
  ChatResponse complete(const ChatRequest& request) override;
  [[nodiscard]] std::string name() const override { return "noisy"; }

 private:
  std::uint64_t seed_;
  double swap_rate_;
  std::optional<OracleBackend> oracle_;
};

enum class MalformedMode {
  NoTags,         // bare ranking, no tags
  MissingAnswer,  // reasoning only
  Garbage,        // answer holds prose
  Incomplete,     // answer ranks only the first passage
  Duplicates,     // answer repeats [1]
  OutOfRange,     // answer uses indices past the window
  Unclosed,       // answer tag never closed
  Empty,          // empty completion
};

[[nodiscard]] std::optional<MalformedMode> parse_malformed_mode(std::string_view text);
[[nodiscard]] std::string_view to_string(MalformedMode mode);
inline constexpr MalformedMode kAllMalformedModes[] = {
    MalformedMode::NoTags,     MalformedMode::MissingAnswer, MalformedMode::Garbage,  MalformedMode::Incomplete,
    MalformedMode::Duplicates, MalformedMode::OutOfRange,    MalformedMode::Unclosed, MalformedMode::Empty};

class MalformedBackend : public ChatBackend {
 public:
  explicit MalformedBackend(MalformedMode mode) : mode_(mode) {}
  ChatResponse complete(const ChatRequest& request) override;
  [[nodiscard]] std::string name() const override { return "malformed"; }

 private:
  MalformedMode mode_;
};

/// Fails the first `failures` attempts (transport failure when `http_status` is 0),
/// then delegates. Counts every attempt it sees.
class FlakyBackend : public ChatBackend {
 public:
  FlakyBackend(std::shared_ptr<ChatBackend> inner, int failures, int http_status = 0)
      : inner_(std::move(inner)), failures_(failures), http_status_(http_status) {}
  ChatResponse complete(const ChatRequest& request) override;
  [[nodiscard]] std::string name() const override { return "flaky"; }
  [[nodiscard]] int calls() const { return calls_.load(); }

 private:
  std::shared_ptr<ChatBackend> inner_;
  int failures_;
  int http_status_;
  std::atomic<int> calls_{0};
};

/// Reply text computed by a caller-supplied function.
class FunctionBackend : public ChatBackend {
 public:
  using Fn = std::function<std::string(const ChatRequest&)>;
  FunctionBackend(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}
  ChatResponse complete(const ChatRequest& request) override;
  [[nodiscard]] std::string name() const override { return name_; }

 private:
  std::string name_;
  Fn fn_;
};

}  // namespace rerank
