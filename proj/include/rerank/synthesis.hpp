#pragma once

// Teacher-labelled training data: positive / hard-negative selection, 20-passage
// list assembly, listwise labels, and self-consistency filtering.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rerank/backend.hpp"
#include "rerank/prompts.hpp"
#include "rerank/response.hpp"
#include "rerank/types.hpp"

namespace rerank {

inline constexpr std::size_t kSelectionPoolSize = 40;
inline constexpr std::size_t kTrainingListCap = 20;
inline constexpr double kDefaultConsistencyAlpha = 0.4;
inline constexpr std::size_t kConsistencyCutoff = 10;

/// Splits on blank lines, trims, drops empty pieces. Pieces longer than
/// `max_chars` code points (when non-zero) are cut at the last sentence end or
/// line break that fits, or hard-cut when none does.
[[nodiscard]] std::vector<std::string> split_document(std::string_view text, std::size_t max_chars = 0);

struct SelectionResult {
  std::vector<std::string> ids;  // in candidate order
  std::vector<std::string> warnings;
  std::size_t calls = 0;
};

/// Parses a selection reply (`[2] [4]` or `None`) against `candidate_ids`.
/// Out-of-range and unparseable replies produce warnings, not errors.
[[nodiscard]] SelectionResult parse_selection(std::string_view reply, std::span<const std::string> candidate_ids);

/// Asks the teacher which candidates are positives. Pools larger than `pool_size`
/// are sent in consecutive batches of at most that many passages.
[[nodiscard]] SelectionResult select_positives(const Query& query, std::string_view gold_answer, Domain domain,
                                               std::span<const Passage> candidates, Gateway& gateway,
                                               std::size_t pool_size = kSelectionPoolSize);

/// As select_positives with the hard-negative prompt. Ids in `exclude` (already
/// chosen positives) are dropped with a warning.
[[nodiscard]] SelectionResult select_hard_negatives(const Query& query, std::string_view gold_answer,
                                                    std::span<const Passage> candidates,
                                                    std::span<const std::string> exclude, Gateway& gateway,
                                                    std::size_t pool_size = kSelectionPoolSize);

struct TrainingList {
  std::vector<Passage> passages;  // shuffled presentation order
  Grades labels;                  // 1 for positives, 0 otherwise; covers every passage
  std::vector<std::string> warnings;
  bool usable = true;             // false when there are no positives
};

/// All positives (up to `cap`), then hard negatives, then randomly drawn negatives
/// until `cap`; the result is shuffled. Inputs must be pairwise disjoint.
[[nodiscard]] TrainingList assemble_training_list(std::span<const Passage> positives,
                                                  std::span<const Passage> hard_negatives,
                                                  std::span<const Passage> negatives, std::size_t cap,
                                                  std::uint64_t seed);

struct ListwiseLabel {
  std::string think;
  RankedList gold;
};

struct LabelResult {
  std::optional<ListwiseLabel> label;
  RepairReport repair;
  std::string skip_reason;  // set when label is empty
};

/// Runs the multi-turn ranking conversation (no gold answer) and parses the reply.
/// Reasoning comes from the backend's reasoning channel, or from `<think>` tags.
[[nodiscard]] LabelResult generate_listwise_label(const Query& query, std::span<const Passage> training_list,
                                                  Gateway& gateway);

struct SynthesisRecord {
  Query query;
  Domain domain = Domain::ComplexQa;
  std::vector<Passage> passages;
  Grades pointwise;
  ListwiseLabel label;
  double consistency = 0.0;  // NDCG@10 of label.gold against pointwise
};

/// NDCG@10 of the gold list against the pointwise labels.
[[nodiscard]] double consistency_score(const SynthesisRecord& record);

struct DomainCounts {
  std::size_t kept = 0;
  std::size_t dropped = 0;
};

struct FilterReport {
  double alpha = kDefaultConsistencyAlpha;
  std::map<std::string, DomainCounts> per_domain;  // keyed by domain name
  [[nodiscard]] std::size_t kept() const;
  [[nodiscard]] std::size_t dropped() const;
};

struct FilterResult {
  std::vector<SynthesisRecord> kept;
  FilterReport report;
};

/// Recomputes each record's consistency and keeps it iff consistency >= alpha.
[[nodiscard]] FilterResult self_consistency_filter(std::vector<SynthesisRecord> records, double alpha);

/// One query's raw material for synthesis.
struct SynthesisInput {
  Query query;
  std::string answer;  // gold answer / solution; only shown to selection prompts
  Domain domain = Domain::ComplexQa;
  std::vector<Passage> candidates;       // positive-mining pool, already split
  std::vector<Passage> documents;        // split into passages and added to `candidates`
  std::vector<Passage> hard_candidates;  // hard-negative pool, already split
  std::vector<Passage> hard_documents;   // split into passages and added to `hard_candidates`
  std::optional<Grades> labels;          // pre-annotated pointwise labels; skips selection
};

struct SynthesisConfig {
  std::size_t pool_size = kSelectionPoolSize;
  std::size_t list_cap = kTrainingListCap;
  std::uint64_t seed = 42;
  std::size_t max_passage_chars = 0;  // document splitting limit, 0 = none
  std::size_t concurrency = 1;
};

struct SkippedInput {
  std::string qid;
  std::string reason;
};

struct SynthesisOutcome {
  std::vector<SynthesisRecord> records;  // input order
  std::vector<SkippedInput> skipped;
  std::vector<std::string> warnings;
  std::size_t backend_calls = 0;
};

/// Expands document inputs into passages with ids `<doc id>#<n>` (n from 1).
[[nodiscard]] std::vector<Passage> split_documents(std::span<const Passage> documents, std::size_t max_chars);

/// Full pipeline per input. Records are independent and processed concurrently;
/// output order and content do not depend on the concurrency level.
[[nodiscard]] SynthesisOutcome synthesize(std::span<const SynthesisInput> inputs, Gateway& gateway,
                                          const SynthesisConfig& config);

}  // namespace rerank
