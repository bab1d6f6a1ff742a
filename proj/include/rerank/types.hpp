#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rerank {

struct Passage {
  std::string id;
  std::string text;
  std::string source;  // provenance label, empty when unknown
};

struct Query {
  std::string qid;
  std::string text;
  // Alternate phrasing used only upstream for retrieval. Never sent to a reranker.
  std::optional<std::string> rewritten;
};

struct Candidate {
  std::string id;
  double score = 0.0;
};

/// Retriever output for one query, best first.
struct CandidateList {
  std::string qid;
  std::vector<Candidate> entries;

  [[nodiscard]] std::vector<std::string> ids() const;
};

/// An ordered sequence of passage ids, best first. Never contains duplicates.
using RankedList = std::vector<std::string>;

using Corpus = std::unordered_map<std::string, Passage>;

/// Graded judgments for a single query: passage id -> grade (>= 0). Missing ids are grade 0.
using Grades = std::unordered_map<std::string, int>;

/// Judgments for many queries, keyed by qid.
using RelevanceJudgments = std::map<std::string, Grades>;

/// Malformed or inconsistent input file; the message names file and line.
class LoadError : public std::runtime_error {
 public:
  LoadError(const std::string& file, std::size_t line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}
  [[nodiscard]] const std::string& file() const { return file_; }
  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

[[nodiscard]] int grade_of(const Grades& grades, std::string_view id);

/// True when `a` and `b` hold the same ids, each exactly once.
[[nodiscard]] bool is_permutation_of(std::span<const std::string> a, std::span<const std::string> b);

[[nodiscard]] bool has_duplicates(std::span<const std::string> ids);

/// 64-bit FNV-1a. Stable across platforms; used to derive per-item seeds.
[[nodiscard]] std::uint64_t stable_hash(std::string_view text, std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace rerank
