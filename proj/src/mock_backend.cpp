#include "rerank/mock_backend.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "rerank/random.hpp"
#include "rerank/response.hpp"

namespace rerank {
namespace {

std::int64_t count_words(std::string_view text) {
  std::int64_t n = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

ChatResponse with_usage(const ChatRequest& request, std::string text, std::optional<std::string> reasoning) {
  ChatResponse response;
  TokenUsage usage;
  for (const auto& m : request.messages) usage.prompt_tokens += count_words(m.content);
  usage.completion_tokens = count_words(text) + (reasoning ? count_words(*reasoning) : 0);
  response.text = std::move(text);
  response.reasoning = std::move(reasoning);
  response.usage = usage;
  return response;
}

std::vector<std::size_t> identity_order(std::size_t m) {
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  return order;
}

std::string selection_text(const std::vector<std::size_t>& selected) {
  if (selected.empty()) return "None";
  std::string out;
  for (auto pos : selected) {
    if (!out.empty()) out += ' ';
    out += '[' + std::to_string(pos + 1) + ']';
  }
  return out;
}

}  // namespace

ChatResponse mock_reply(const ChatRequest& request, const std::vector<std::size_t>& order,
                        const std::vector<std::size_t>& selected, std::string_view reasoning) {
  std::vector<std::size_t> one_based;
  one_based.reserve(order.size());
  for (auto pos : order) one_based.push_back(pos + 1);
  const auto ranking = format_ranking_answer(one_based);

  switch (request.purpose) {
    case RequestPurpose::Rerank:
      return with_usage(request, "<think>" + std::string(reasoning) + "</think><answer>" + ranking + "</answer>",
                        std::nullopt);
    case RequestPurpose::ListwiseLabel:
      return with_usage(request, ranking, std::string(reasoning));
    case RequestPurpose::SelectPositives:
    case RequestPurpose::SelectHardNegatives:
      return with_usage(request, selection_text(selected), std::nullopt);
  }
  return with_usage(request, "", std::nullopt);
}

ChatResponse IdentityBackend::complete(const ChatRequest& request) {
  return mock_reply(request, identity_order(request.item_ids.size()), {}, "keep the presented order");
}

ChatResponse ReverseBackend::complete(const ChatRequest& request) {
  auto order = identity_order(request.item_ids.size());
  std::reverse(order.begin(), order.end());
  return mock_reply(request, order, {}, "reverse the presented order");
}

std::vector<std::size_t> OracleBackend::order_for(const ChatRequest& request) const {
  auto order = identity_order(request.item_ids.size());
  const auto it = judgments_.find(request.qid);
  if (it == judgments_.end()) return order;
  const auto& grades = it->second;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return grade_of(grades, request.item_ids[a]) > grade_of(grades, request.item_ids[b]);
  });
  return order;
}

std::vector<std::size_t> OracleBackend::selection_for(const ChatRequest& request) const {
  std::vector<std::size_t> selected;
  const auto it = judgments_.find(request.qid);
  if (it == judgments_.end()) return selected;
  const auto& grades = it->second;
  for (std::size_t pos = 0; pos < request.item_ids.size(); ++pos) {
    const auto g = grades.find(request.item_ids[pos]);
    const bool pick = request.purpose == RequestPurpose::SelectPositives
                          ? (g != grades.end() && g->second > 0)
                          : (g != grades.end() && g->second == 0);
    if (pick) selected.push_back(pos);
  }
  return selected;
}

ChatResponse OracleBackend::complete(const ChatRequest& request) {
  return mock_reply(request, order_for(request), selection_for(request), "order by hidden relevance grade");
}

NoisyBackend::NoisyBackend(std::uint64_t seed, double swap_rate, std::optional<RelevanceJudgments> judgments)
    : seed_(seed), swap_rate_(swap_rate) {
  if (!(swap_rate >= 0.0 && swap_rate <= 1.0)) throw std::invalid_argument("swap rate must lie in [0, 1]");
  if (judgments) oracle_.emplace(std::move(*judgments));
}

ChatResponse NoisyBackend::complete(const ChatRequest& request) {
  auto order = oracle_ ? oracle_->order_for(request) : identity_order(request.item_ids.size());
  std::vector<std::size_t> selected;
  if (oracle_) selected = oracle_->selection_for(request);

  auto h = stable_hash(request.qid, seed_ ^ 0x9e3779b97f4a7c15ULL);
  h = stable_hash(to_string(request.purpose), h);
  for (const auto& id : request.item_ids) h = stable_hash(id, stable_hash("\x1f", h));
  Rng rng(h);
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    if (uniform_unit(rng) < swap_rate_) std::swap(order[i], order[i + 1]);
  }
  return mock_reply(request, order, selected, "noisy ordering");
}

std::optional<MalformedMode> parse_malformed_mode(std::string_view text) {
  for (auto mode : kAllMalformedModes) {
    if (to_string(mode) == text) return mode;
  }
  return std::nullopt;
}

std::string_view to_string(MalformedMode mode) {
  switch (mode) {
    case MalformedMode::NoTags:
      return "no-tags";
    case MalformedMode::MissingAnswer:
      return "missing-answer";
    case MalformedMode::Garbage:
      return "garbage";
    case MalformedMode::Incomplete:
      return "incomplete";
    case MalformedMode::Duplicates:
      return "duplicates";
    case MalformedMode::OutOfRange:
      return "out-of-range";
    case MalformedMode::Unclosed:
      return "unclosed";
    case MalformedMode::Empty:
      return "empty";
  }
  return "empty";
}

ChatResponse MalformedBackend::complete(const ChatRequest& request) {
  const auto m = request.item_ids.size();
  std::vector<std::size_t> all(m);
  std::iota(all.begin(), all.end(), std::size_t{1});
  const auto full = format_ranking_answer(all);

  std::string text;
  switch (mode_) {
    case MalformedMode::NoTags:
      text = full;
      break;
    case MalformedMode::MissingAnswer:
      text = "<think>undecided</think>";
      break;
    case MalformedMode::Garbage:
      text = "<think>undecided</think><answer>hello</answer>";
      break;
    case MalformedMode::Incomplete:
      text = "<think>undecided</think><answer>[1]</answer>";
      break;
    case MalformedMode::Duplicates:
      text = "<think>undecided</think><answer>[1] > [1] > " + full + "</answer>";
      break;
    case MalformedMode::OutOfRange: {
      const std::size_t past = m + 5;
      text = "<think>undecided</think><answer>[" + std::to_string(past) + "] > " + full + "</answer>";
      break;
    }
    case MalformedMode::Unclosed:
      text = "<think>undecided</think><answer>" + full;
      break;
    case MalformedMode::Empty:
      break;
  }
  return with_usage(request, std::move(text), std::nullopt);
}

ChatResponse FlakyBackend::complete(const ChatRequest& request) {
  const int call = ++calls_;
  if (call <= failures_) {
    throw AttemptError(http_status_ == 0 ? "simulated connection reset"
                                         : "simulated status " + std::to_string(http_status_),
                       http_status_);
  }
  return inner_->complete(request);
}

ChatResponse FunctionBackend::complete(const ChatRequest& request) {
  return with_usage(request, fn_(request), std::nullopt);
}

}  // namespace rerank
