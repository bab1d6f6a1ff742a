#include "rerank/window.hpp"

#include <algorithm>
#include <chrono>

#include <fmt/format.h>

namespace rerank {

void WindowParams::validate() const {
  if (top_n < 1) throw std::invalid_argument("top_n must be >= 1");
  if (stride < 1 || stride > window) {
    throw std::invalid_argument(fmt::format("window stride must satisfy 1 <= s <= w (w={}, s={})", window, stride));
  }
}

WindowPlan plan_windows(const WindowParams& params, std::size_t list_len) {
  params.validate();
  if (list_len < 1) throw std::invalid_argument("cannot plan windows over an empty list");
  const auto len = std::min(list_len, params.top_n);

  WindowPlan plan;
  if (len <= params.window) {
    plan.ranges.push_back({0, len});
    return plan;
  }
  std::size_t start = len - params.window;
  for (;;) {
    plan.ranges.push_back({start, start + params.window});
    if (start == 0) break;
    start = start > params.stride ? start - params.stride : 0;
  }
  return plan;
}

RankedList apply_window(const RankedList& list, IndexRange range, const RankedList& window_result) {
  if (range.begin > range.end || range.end > list.size()) {
    throw std::invalid_argument(fmt::format("window [{}, {}) outside list of {}", range.begin, range.end, list.size()));
  }
  const std::span<const std::string> slice(list.data() + range.begin, range.size());
  if (!is_permutation_of(slice, window_result)) {
    throw std::invalid_argument("window result is not a permutation of the window slice");
  }
  RankedList out = list;
  std::copy(window_result.begin(), window_result.end(), out.begin() + static_cast<std::ptrdiff_t>(range.begin));
  return out;
}

ChatRequest build_window_request(const Query& query, std::span<const std::string> window_ids, const Corpus& corpus,
                                 const RerankOptions& options, std::string request_id) {
  std::vector<std::string> texts;
  texts.reserve(window_ids.size());
  for (const auto& id : window_ids) {
    const auto it = corpus.find(id);
    if (it == corpus.end()) throw std::invalid_argument("passage " + id + " missing from corpus");
    texts.push_back(truncate_chars(it->second.text, options.max_passage_chars));
  }
  ChatRequest request;
  request.request_id = std::move(request_id);
  request.purpose = RequestPurpose::Rerank;
  request.qid = query.qid;
  request.item_ids.assign(window_ids.begin(), window_ids.end());
  request.messages.push_back({"user", options.prompt.render(query.text, texts)});
  return request;
}

RerankOutcome rerank_query(const Query& query, const CandidateList& candidates, const Corpus& corpus,
                           Gateway& gateway, const RerankOptions& options) {
  if (candidates.entries.empty()) throw std::invalid_argument("query " + query.qid + " has no candidates");

  RerankOutcome outcome;
  outcome.trace.qid = query.qid;
  auto& list = outcome.ranking;
  for (const auto& e : candidates.entries) {
    if (list.size() == options.window.top_n) break;
    list.push_back(e.id);
  }
  if (has_duplicates(list)) throw std::invalid_argument("query " + query.qid + " has duplicate candidates");

  const auto plan = plan_windows(options.window, list.size());
  for (std::size_t w = 0; w < plan.ranges.size(); ++w) {
    const auto range = plan.ranges[w];
    const std::span<const std::string> window_ids(list.data() + range.begin, range.size());
    auto request = build_window_request(query, window_ids, corpus, options, fmt::format("{}/w{}", query.qid, w));

    const auto started = std::chrono::steady_clock::now();
    ChatResponse response;
    try {
      response = gateway.complete(request);
    } catch (const BackendError& e) {
      throw QueryError(fmt::format("query {} window {}: {}", query.qid, w, e.what()), outcome.trace);
    }
    const auto seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    const auto parsed = parse_response(response.text, range.size());
    auto ranked = parse_ranking(ranking_text(parsed), window_ids);

    WindowTrace trace;
    trace.range = range;
    trace.raw = response.text;
    trace.format_status = parsed.format_status;
    trace.repair = ranked.report;
    trace.seconds = seconds;
    trace.attempts = response.attempts;
    trace.usage = response.usage;
    outcome.trace.windows.push_back(std::move(trace));

    list = apply_window(list, range, ranked.ranking);
  }
  return outcome;
}

}  // namespace rerank
