#include "rerank/prompts.hpp"

#include <array>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rerank {
namespace {

constexpr std::string_view kListwiseTemplate =
    "You are RankLLM, an intelligent assistant that can rank passages based on their relevance to the query. "
    "Given a query and a passage list, you first thinks about the reasoning process in the mind and then provides "
    "the answer (i.e., the reranked passage list). The reasoning process and answer are enclosed within <think> "
    "</think> and <answer> </answer> tags, respectively, i.e., <think> reasoning process here </think> <answer> "
    "answer here </answer>.\n"
    "\n"
    "I will provide you with {num} passages, each indicated by a numerical identifier []. Rank the passages based "
    "on their relevance to the search query: {query}.\n"
    "\n"
    "{passages}\n"
    "\n"
    "Search Query: {query}. Rank the {num} passages above based on their relevance to the search query. All the "
    "passages should be included and listed using identifiers, in descending order of relevance. The format of the "
    "answer should be [] > [], e.g., [2] > [1].";

constexpr std::string_view kLabelIntro =
    "You are an intelligent assistant that can rank passages based on their relevance to the query. I will provide "
    "you with {num} passages, each indicated by a numerical identifier []. Rank the passages based on their "
    "relevance to the query: {query}.";

constexpr std::string_view kLabelOutro =
    "Search Query: {query}. Rank the {num} passages above based on their relevance to the search query. The "
    "passages should be listed in descending order using identifiers. The most relevant passages should be listed "
    "first. The output format should be [] > [], e.g., [4] > [2]. Only response the ranking results, do not say any "
    "word or explain.";

constexpr std::string_view kComplexQaPositives =
    "You are an expert in evaluating the relevance of passages to a stackexchange query. A passage is considered "
    "relevant to the query if it helps reason through the query with critical concepts or theories and contains "
    "useful information to help users derive the answer.\n"
    "Crucially, avoid selecting passages that:\n"
    "- Merely mention keywords or entities from the query/answer but fail to provide explanatory details.\n"
    "- Are generic descriptions, background facts, or tangential information that do not contribute to reasoning "
    "about the query's specific questions.\n"
    "I will provide you with a query, the answer of the query and a list of passages to evaluate. Each passage is "
    "indicated by number identifier [].\n"
    "Please output the identifiers of the relevant passages. The output format should be [] [], e.g., [2] [4].\n"
    "If there are no relevant passages, output \"None\". Only output the relevant passage identifiers, do not "
    "output irrelevant passage identifiers and do not explain.\n"
    "Here are the Query, the Answer to the Query and a list of passages:\n"
    "Query: {query}.\n"
    "Answer: {answer}\n"
    "\n"
    "{passages}";

constexpr std::string_view kHardNegatives =
    "You are an expert in finding hard negative passages for a given query. Given a query, the answer to the query "
    "and a list of passages, you need to find the hard negative passages from these passages. The hard negative "
    "passage contains some relevant information with superficial lexical overlapping, but it should be not helpful "
    "to address the query with critical concepts or theories and does not contain useful information to help users "
    "derive the answer.\n"
    "I will provide you with a query, the answer of the query, and a list of passages to evaluate. Each passage is "
    "indicated by a number identifier []. Please output the identifiers of the hard negative passages. The output "
    "format should be [] [], e.g., [2] [4]. If there are no hard negative passages, output \"None\". Only output "
    "the hard negative passage identifiers, do not output relevant passage identifiers and do not explain. Here are "
    "the Query, the Answer to the Query, and a list of passages:\n"
    "Query: {query}\n"
    "\n"
    "Answer: {answer}\n"
    "\n"
    "{passages}";

constexpr std::string_view kCodingPositives =
    "You are an expert in evaluating the relevance of passages to a query (coding problem). The relevance between "
    "the query and a relevant passage is defined by whether the query either requires the corresponding syntax "
    "documentation in the passage or involves the same algorithm and/or data structure.\n"
    "I will provide you with a query, the solution code of the query, and a list of passages to evaluate. Each "
    "passage is indicated by a number identifier []. Please output the identifiers of the relevant passages. The "
    "output format should be [] [], e.g., [2] [4]. If there are no relevant passages, output \"None\". Only output "
    "the relevant passage identifiers, do not output irrelevant passage identifiers and do not provide any "
    "explanation.\n"
    "Here are the Query, the Solution to the Query, and a list of passages:\n"
    "Query: {query}\n"
    "\n"
    "Solution: {answer}\n"
    "\n"
    "{passages}";

constexpr std::string_view kMathProblemPositives =
    "You are an expert in evaluating the relevance of passages to a query (a math problem). A query is relevant to "
    "a passage if the passage references exactly the same theorem (such as Gauss's lemma) used in the query.\n"
    "I will provide you with a query, the solution of the query, and a list of passages to evaluate. Each passage "
    "is indicated by a number identifier []. Please output the identifiers of the relevant passages. The output "
    "format should be [] [], e.g., [2] [4]. If there are no relevant passages, output \"None\". Only output the "
    "relevant passage identifiers, do not output irrelevant passage identifiers and do not provide any "
    "explanation.\n"
    "Here are the Query, the Solution of the Query, and a list of passages:\n"
    "Query: {query}\n"
    "\n"
    "Solution: {answer}\n"
    "\n"
    "{passages}";

constexpr std::string_view kMathTheoremPositives =
    "You are an expert in evaluating the relevance of passages (a math theorem) to a query (a math problem). A "
    "passage is relevant to a query if the query's solution either applies the same theorem as presented in the "
    "passage, or follows reasoning steps substantially similar to those used in the passage's theorem.\n"
    "I will provide you with a query, the solution of the query, and a list of passages to evaluate. Each passage "
    "is indicated by a number identifier []. Please output the identifiers of the relevant passages. The output "
    "format should be [] [], e.g., [2] [4]. If there are no relevant passages, output \"None\". Only output the "
    "relevant passage identifiers, do not output irrelevant passage identifiers and do not provide any "
    "explanation.\n"
    "Here are the Query, the Solution of the Query, and a list of passages:\n"
    "Query: {query}\n"
    "\n"
    "Solution: {answer}\n"
    "\n"
    "{passages}";

std::string numbered_block(std::span<const std::string> passages, std::string_view prefix, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < passages.size(); ++i) {
    if (i) out += "\n\n";
    out += prefix;
    out += '[' + std::to_string(i + 1) + ']';
    out += sep;
    out += passages[i];
  }
  return out;
}

}  // namespace

std::string_view to_string(Domain domain) {
  switch (domain) {
    case Domain::ComplexQa:
      return "complex-qa";
    case Domain::Coding:
      return "coding";
    case Domain::MathProblem:
      return "math-problem";
    case Domain::MathTheorem:
      return "math-theorem";
    case Domain::WebSearch:
      return "web-search";
  }
  return "complex-qa";
}

std::optional<Domain> parse_domain(std::string_view text) {
  for (auto d : kAllDomains) {
    if (to_string(d) == text) return d;
  }
  return std::nullopt;
}

std::string render_placeholders(std::string_view text,
                                 std::span<const std::pair<std::string_view, std::string_view>> values) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      const auto close = text.find('}', i + 1);
      if (close != std::string_view::npos) {
        const auto name = text.substr(i + 1, close - i - 1);
        bool replaced = false;
        for (const auto& [key, value] : values) {
          if (key == name) {
            out += value;
            replaced = true;
            break;
          }
        }
        if (replaced) {
          i = close + 1;
          continue;
        }
      }
    }
    out += text[i++];
  }
  return out;
}

std::string truncate_chars(std::string_view text, std::size_t max_chars) {
  if (max_chars == 0) return std::string(text);
  std::size_t chars = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    // Count lead bytes only; continuation bytes are 10xxxxxx.
    if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) {
      if (chars == max_chars) return std::string(text.substr(0, i));
      ++chars;
    }
  }
  return std::string(text);
}

PromptTemplate::PromptTemplate(std::string text) : text_(std::move(text)) {
  if (text_.find("{passages}") == std::string::npos || text_.find("{query}") == std::string::npos) {
    throw std::invalid_argument("prompt template must contain {query} and {passages}");
  }
}

PromptTemplate PromptTemplate::listwise_default() { return PromptTemplate(std::string(kListwiseTemplate)); }

PromptTemplate PromptTemplate::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open prompt template " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  auto text = buf.str();
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return PromptTemplate(std::move(text));
}

std::string PromptTemplate::render(std::string_view query, std::span<const std::string> passages) const {
  const auto num = std::to_string(passages.size());
  const auto block = numbered_block(passages, "", ": ");
  const std::array<std::pair<std::string_view, std::string_view>, 3> values{
      {{"num", num}, {"query", query}, {"passages", block}}};
  return render_placeholders(text_, values);
}

std::string_view default_listwise_template() { return kListwiseTemplate; }

std::vector<ChatMessage> listwise_label_messages(std::string_view query, std::span<const std::string> passages) {
  const auto num = std::to_string(passages.size());
  const std::array<std::pair<std::string_view, std::string_view>, 2> values{{{"num", num}, {"query", query}}};
  std::vector<ChatMessage> messages;
  messages.reserve(2 * passages.size() + 3);
  messages.push_back({"user", render_placeholders(kLabelIntro, values)});
  messages.push_back({"assistant", "Okay, please provide the passages."});
  for (std::size_t i = 0; i < passages.size(); ++i) {
    const auto tag = "[" + std::to_string(i + 1) + "]";
    messages.push_back({"user", tag + " " + passages[i]});
    messages.push_back({"assistant", "Received passage " + tag});
  }
  messages.push_back({"user", render_placeholders(kLabelOutro, values)});
  return messages;
}

std::string_view positives_template(Domain domain) {
  switch (domain) {
    case Domain::Coding:
      return kCodingPositives;
    case Domain::MathProblem:
      return kMathProblemPositives;
    case Domain::MathTheorem:
      return kMathTheoremPositives;
    case Domain::ComplexQa:
    case Domain::WebSearch:
      return kComplexQaPositives;
  }
  return kComplexQaPositives;
}

std::string_view hard_negatives_template() { return kHardNegatives; }

std::string render_selection_prompt(std::string_view tmpl, std::string_view query, std::string_view answer,
                                    std::span<const std::string> passages) {
  const auto block = numbered_block(passages, "Passage ", ": ");
  const std::array<std::pair<std::string_view, std::string_view>, 3> values{
      {{"query", query}, {"answer", answer}, {"passages", block}}};
  return render_placeholders(tmpl, values);
}

}  // namespace rerank
