#pragma once

// Structured model output: `<think>...</think><answer>[k] > [k] > ...</answer>`.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "rerank/types.hpp"

namespace rerank {

enum class FormatStatus {
  BothGood,    // both tag pairs present, answer satisfies the strict ranking grammar
  OutputOnly,  // both tag pairs present, answer malformed or incomplete
  Bad,         // at least one tag pair missing
};

[[nodiscard]] std::string_view to_string(FormatStatus status);
[[nodiscard]] std::optional<FormatStatus> parse_format_status(std::string_view text);

struct ModelResponse {
  std::string raw;
  std::optional<std::string> think;
  std::optional<std::string> answer;
  FormatStatus format_status = FormatStatus::Bad;
};

/// Splits a raw completion into reasoning and answer. Total: never throws.
///
/// The first `<think>` is paired with the first `</think>` after it. The answer is the
/// first `<answer>...</answer>` pair following the reasoning block (or the start of the
/// text when no reasoning block exists). When `window_size` is given the answer must
/// rank exactly that many passages to count as BothGood; otherwise the count is taken
/// from the answer itself.
[[nodiscard]] ModelResponse parse_response(std::string_view raw,
                                           std::optional<std::size_t> window_size = std::nullopt);

/// Text to pull a ranking from: the answer when present, otherwise whatever follows
/// the reasoning block (or the whole completion).
[[nodiscard]] std::string ranking_text(const ModelResponse& response);

struct RepairReport {
  std::size_t tokens = 0;        // `[k]` tokens found in the answer
  std::size_t out_of_range = 0;  // k outside 1..m
  std::size_t duplicates = 0;    // repeated k, later occurrences dropped
  std::size_t appended = 0;      // window positions missing from the answer
  bool full_repair = false;      // no usable token at all; identity order returned

  [[nodiscard]] bool clean() const { return out_of_range == 0 && duplicates == 0 && appended == 0; }
  RepairReport& operator+=(const RepairReport& other);
};

struct ParsedRanking {
  RankedList ranking;
  RepairReport report;
};

/// Lenient extraction of `[k]` tokens, mapped onto `window_ids` (k is 1-based).
/// Out-of-range tokens are dropped, duplicates keep their first occurrence, and
/// whatever is missing is appended in window order. The result is always a
/// permutation of `window_ids`.
[[nodiscard]] ParsedRanking parse_ranking(std::string_view answer, std::span<const std::string> window_ids);

/// Strict grammar: `ws [int] (ws > ws [int])* ws`, each int in 1..m, no repeats,
/// all m present.
[[nodiscard]] bool validate_answer_grammar(std::string_view answer, std::size_t m);

/// Formats local indices as `[i] > [j] > ...`.
[[nodiscard]] std::string format_ranking_answer(std::span<const std::size_t> one_based);

}  // namespace rerank
