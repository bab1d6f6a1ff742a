#include "rerank/response.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>
#include <vector>

namespace rerank {
namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";

// Indices above this are out of range for any realistic window; also keeps parsing overflow-free.
constexpr std::size_t kMaxDigits = 9;

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

struct TagSpan {
  std::size_t content_begin;
  std::size_t content_end;
  std::size_t after;  // first byte past the closing tag
};

std::optional<TagSpan> find_pair(std::string_view text, std::size_t from, std::string_view open,
                                 std::string_view close) {
  const auto o = text.find(open, from);
  if (o == std::string_view::npos) return std::nullopt;
  const auto begin = o + open.size();
  const auto c = text.find(close, begin);
  if (c == std::string_view::npos) return std::nullopt;
  return TagSpan{begin, c, c + close.size()};
}

// Parses the strict grammar. Returns the indices in order, or nullopt on any syntax error.
std::optional<std::vector<std::size_t>> strict_tokens(std::string_view s) {
  std::vector<std::size_t> out;
  std::size_t i = 0;
  const auto skip_ws = [&] {
    while (i < s.size() && is_space(s[i])) ++i;
  };
  const auto read_token = [&]() -> bool {
    if (i >= s.size() || s[i] != '[') return false;
    ++i;
    const auto start = i;
    std::size_t value = 0;
    while (i < s.size() && is_digit(s[i])) {
      if (i - start >= kMaxDigits) return false;
      value = value * 10 + static_cast<std::size_t>(s[i] - '0');
      ++i;
    }
    if (i == start || i >= s.size() || s[i] != ']') return false;
    ++i;
    out.push_back(value);
    return true;
  };

  skip_ws();
  if (!read_token()) return std::nullopt;
  for (;;) {
    skip_ws();
    if (i == s.size()) break;
    if (s[i] != '>') return std::nullopt;
    ++i;
    skip_ws();
    if (!read_token()) return std::nullopt;
  }
  return out;
}

bool is_complete_permutation(const std::vector<std::size_t>& indices, std::size_t m) {
  if (m == 0 || indices.size() != m) return false;
  std::vector<bool> seen(m + 1, false);
  for (auto k : indices) {
    if (k < 1 || k > m || seen[k]) return false;
    seen[k] = true;
  }
  return true;
}

// Every `[ k ]` occurrence, in order; nullopt marks a token whose number is too long to be valid.
std::vector<std::optional<std::size_t>> lenient_tokens(std::string_view s) {
  std::vector<std::optional<std::size_t>> out;
  std::size_t i = 0;
  while ((i = s.find('[', i)) != std::string_view::npos) {
    std::size_t j = i + 1;
    while (j < s.size() && is_space(s[j])) ++j;
    const auto digits_begin = j;
    while (j < s.size() && is_digit(s[j])) ++j;
    const auto digits_end = j;
    while (j < s.size() && is_space(s[j])) ++j;
    if (digits_end == digits_begin || j >= s.size() || s[j] != ']') {
      ++i;
      continue;
    }
    if (digits_end - digits_begin > kMaxDigits) {
      out.emplace_back(std::nullopt);
    } else {
      std::size_t value = 0;
      for (auto d = digits_begin; d < digits_end; ++d) value = value * 10 + static_cast<std::size_t>(s[d] - '0');
      out.emplace_back(value);
    }
    i = j + 1;
  }
  return out;
}

}  // namespace

std::string_view to_string(FormatStatus status) {
  switch (status) {
    case FormatStatus::BothGood:
      return "both_good";
    case FormatStatus::OutputOnly:
      return "output_only";
    case FormatStatus::Bad:
      return "bad";
  }
  return "bad";
}

std::optional<FormatStatus> parse_format_status(std::string_view text) {
  if (text == "both_good") return FormatStatus::BothGood;
  if (text == "output_only") return FormatStatus::OutputOnly;
  if (text == "bad") return FormatStatus::Bad;
  return std::nullopt;
}

ModelResponse parse_response(std::string_view raw, std::optional<std::size_t> window_size) {
  ModelResponse response;
  response.raw = std::string(raw);

  std::size_t answer_from = 0;
  if (auto think = find_pair(raw, 0, kThinkOpen, kThinkClose)) {
    response.think = std::string(raw.substr(think->content_begin, think->content_end - think->content_begin));
    answer_from = think->after;
  }
  if (auto answer = find_pair(raw, answer_from, kAnswerOpen, kAnswerClose)) {
    response.answer = std::string(raw.substr(answer->content_begin, answer->content_end - answer->content_begin));
  }

  if (!response.think || !response.answer) {
    response.format_status = FormatStatus::Bad;
    return response;
  }
  std::size_t m = 0;
  if (window_size) {
    m = *window_size;
  } else if (auto tokens = strict_tokens(*response.answer)) {
    m = tokens->size();
  }
  response.format_status =
      validate_answer_grammar(*response.answer, m) ? FormatStatus::BothGood : FormatStatus::OutputOnly;
  return response;
}

std::string ranking_text(const ModelResponse& response) {
  if (response.answer) return *response.answer;
  const auto close = response.raw.rfind(kThinkClose);
  if (close == std::string::npos) return response.raw;
  return response.raw.substr(close + kThinkClose.size());
}

RepairReport& RepairReport::operator+=(const RepairReport& other) {
  tokens += other.tokens;
  out_of_range += other.out_of_range;
  duplicates += other.duplicates;
  appended += other.appended;
  full_repair = full_repair || other.full_repair;
  return *this;
}

ParsedRanking parse_ranking(std::string_view answer, std::span<const std::string> window_ids) {
  const auto m = window_ids.size();
  ParsedRanking parsed;
  auto& report = parsed.report;
  std::vector<bool> used(m, false);
  parsed.ranking.reserve(m);

  for (const auto& token : lenient_tokens(answer)) {
    ++report.tokens;
    if (!token || *token < 1 || *token > m) {
      ++report.out_of_range;
      continue;
    }
    const auto pos = *token - 1;
    if (used[pos]) {
      ++report.duplicates;
      continue;
    }
    used[pos] = true;
    parsed.ranking.push_back(window_ids[pos]);
  }
  report.full_repair = parsed.ranking.empty() && m > 0;
  for (std::size_t pos = 0; pos < m; ++pos) {
    if (!used[pos]) {
      parsed.ranking.push_back(window_ids[pos]);
      ++report.appended;
    }
  }
  return parsed;
}

bool validate_answer_grammar(std::string_view answer, std::size_t m) {
  const auto tokens = strict_tokens(answer);
  return tokens && is_complete_permutation(*tokens, m);
}

std::string format_ranking_answer(std::span<const std::size_t> one_based) {
  std::string out;
  for (std::size_t i = 0; i < one_based.size(); ++i) {
    if (i) out += " > ";
    out += '[';
    out += std::to_string(one_based[i]);
    out += ']';
  }
  return out;
}

}  // namespace rerank
