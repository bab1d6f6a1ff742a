#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rerank/backend.hpp"

namespace rerank {

enum class Domain { ComplexQa, Coding, MathProblem, MathTheorem, WebSearch };

[[nodiscard]] std::string_view to_string(Domain domain);
[[nodiscard]] std::optional<Domain> parse_domain(std::string_view text);
inline constexpr Domain kAllDomains[] = {Domain::ComplexQa, Domain::Coding, Domain::MathProblem, Domain::MathTheorem,
                                         Domain::WebSearch};

/// Single-pass substitution of `{name}` placeholders. Unknown names are left as is,
/// and substituted values are never rescanned.
[[nodiscard]] std::string render_placeholders(std::string_view text,
                                              std::span<const std::pair<std::string_view, std::string_view>> values);

/// Truncates to at most `max_chars` UTF-8 code points. 0 means no limit.
[[nodiscard]] std::string truncate_chars(std::string_view text, std::size_t max_chars);

/// Listwise reranking prompt. Placeholders: {num}, {query}, {passages}.
/// The passage block is `[1]: text` entries separated by blank lines.
class PromptTemplate {
 public:
  explicit PromptTemplate(std::string text);

  /// The default template used by the reranker.
  static PromptTemplate listwise_default();
  static PromptTemplate from_file(const std::filesystem::path& path);

  [[nodiscard]] std::string render(std::string_view query, std::span<const std::string> passages) const;
  [[nodiscard]] const std::string& text() const { return text_; }

 private:
  std::string text_;
};

[[nodiscard]] std::string_view default_listwise_template();

/// Multi-turn conversation asking a teacher to rank `passages` for `query`. No gold
/// answer is included.
[[nodiscard]] std::vector<ChatMessage> listwise_label_messages(std::string_view query,
                                                              std::span<const std::string> passages);

/// Positives-selection prompt for a domain. Web search has no selection step.
[[nodiscard]] std::string_view positives_template(Domain domain);
[[nodiscard]] std::string_view hard_negatives_template();

/// Fills a selection template; passages render as `Passage [k]: text`.
[[nodiscard]] std::string render_selection_prompt(std::string_view tmpl, std::string_view query,
                                                  std::string_view answer, std::span<const std::string> passages);

}  // namespace rerank
