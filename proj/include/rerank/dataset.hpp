#pragma once

// Corpus / query JSONL, TREC run and qrels files.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "rerank/types.hpp"

namespace rerank {

struct DatasetBundle {
  Corpus corpus;
  std::map<std::string, Query> queries;
  std::map<std::string, CandidateList> run;  // truncated to top_n per query
  RelevanceJudgments qrels;
};

struct DatasetPaths {
  std::filesystem::path corpus;
  std::filesystem::path queries;
  std::filesystem::path run;
  std::optional<std::filesystem::path> qrels;
};

/// `{"id", "text", "source"?}` per line.
[[nodiscard]] Corpus read_corpus(std::istream& in, const std::string& name);
/// `{"qid", "text", "rewritten"?}` per line.
[[nodiscard]] std::map<std::string, Query> read_queries(std::istream& in, const std::string& name);

/// Six whitespace-separated columns: qid Q0 docid rank score tag. Entries are
/// ordered by rank; ranks must be unique per query and scores non-increasing with
/// rank. When `corpus` is given every docid must resolve.
[[nodiscard]] std::map<std::string, CandidateList> read_run(std::istream& in, const std::string& name,
                                                            std::size_t top_n = 0,
                                                            const Corpus* corpus = nullptr);

/// Four columns: qid iteration docid grade. Negative grades are stored as 0.
[[nodiscard]] RelevanceJudgments read_qrels(std::istream& in, const std::string& name);

[[nodiscard]] std::map<std::string, CandidateList> read_run(const std::filesystem::path& path,
                                                            std::size_t top_n = 0);
[[nodiscard]] RelevanceJudgments read_qrels(const std::filesystem::path& path);

/// Loads and cross-checks all files. Throws LoadError naming file and line.
[[nodiscard]] DatasetBundle load_dataset(const DatasetPaths& paths, std::size_t top_n);

/// Writes rankings as a TREC run; score = 1 / rank.
void write_run(std::ostream& out, const std::map<std::string, RankedList>& rankings, const std::string& tag);

/// Retriever order as rankings, for baseline evaluation.
[[nodiscard]] std::map<std::string, RankedList> run_as_rankings(const std::map<std::string, CandidateList>& run);

}  // namespace rerank
