#pragma once

// Back-to-front sliding-window listwise reranking.

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rerank/backend.hpp"
#include "rerank/prompts.hpp"
#include "rerank/response.hpp"
#include "rerank/types.hpp"

namespace rerank {

struct WindowParams {
  std::size_t top_n = 100;  // candidates considered per query
  std::size_t window = 20;
  std::size_t stride = 10;

  /// Requires 1 <= stride <= window and top_n >= 1.
  void validate() const;
};

/// Half-open index range [begin, end).
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  [[nodiscard]] std::size_t size() const { return end - begin; }
  bool operator==(const IndexRange&) const = default;
};

struct WindowPlan {
  std::vector<IndexRange> ranges;  // back of the list first; the last range starts at 0
};

/// Plans windows over the first min(list_len, top_n) positions. Starts run
/// len-w, len-w-s, ... with the final start clamped to 0.
[[nodiscard]] WindowPlan plan_windows(const WindowParams& params, std::size_t list_len);

/// Replaces list[range] with `window_result`, which must be a permutation of that slice.
[[nodiscard]] RankedList apply_window(const RankedList& list, IndexRange range, const RankedList& window_result);

struct RerankOptions {
  WindowParams window;
  PromptTemplate prompt = PromptTemplate::listwise_default();
  std::size_t max_passage_chars = 0;  // 0 keeps passages whole
};

struct WindowTrace {
  IndexRange range;
  std::string raw;
  FormatStatus format_status = FormatStatus::Bad;
  RepairReport repair;
  double seconds = 0.0;
  int attempts = 0;
  std::optional<TokenUsage> usage;
};

struct TraceLog {
  std::string qid;
  std::vector<WindowTrace> windows;
};

struct RerankOutcome {
  RankedList ranking;
  TraceLog trace;
};

/// A backend call failed for good; carries the windows completed before the failure.
class QueryError : public std::runtime_error {
 public:
  QueryError(const std::string& what, TraceLog partial) : std::runtime_error(what), partial_(std::move(partial)) {}
  [[nodiscard]] const TraceLog& partial_trace() const { return partial_; }

 private:
  TraceLog partial_;
};

/// Builds the chat request for one window; passages are numbered [1]..[m] in
/// current list order. Only `query.text` is used.
[[nodiscard]] ChatRequest build_window_request(const Query& query, std::span<const std::string> window_ids,
                                               const Corpus& corpus, const RerankOptions& options,
                                               std::string request_id);

/// One sequential back-to-front pass over the top candidates. The result is a
/// permutation of the (truncated) candidate ids. Throws QueryError on backend failure
/// and std::invalid_argument when a candidate id is missing from the corpus.
[[nodiscard]] RerankOutcome rerank_query(const Query& query, const CandidateList& candidates,
                                         const Corpus& corpus, Gateway& gateway, const RerankOptions& options);

}  // namespace rerank
