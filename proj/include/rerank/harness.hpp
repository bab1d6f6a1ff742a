#pragma once

// Drivers behind the CLI subcommands. Everything here returns plain structs;
// formatting into aligned text or key=value lines is separate.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rerank/dataset.hpp"
#include "rerank/records.hpp"
#include "rerank/reward.hpp"
#include "rerank/synthesis.hpp"
#include "rerank/training.hpp"
#include "rerank/window.hpp"

namespace rerank {

struct RunOptions {
  RerankOptions rerank;
  std::size_t concurrency = 1;
  bool strict = false;  // a failed query aborts the run instead of keeping retriever order
  std::size_t k = 10;
};

struct QueryReport {
  std::string qid;
  std::optional<double> ndcg;  // unset when the query has no judgments
  double seconds = 0.0;
  std::size_t calls = 0;
  std::size_t attempts = 0;
  std::size_t both_good = 0;
  std::size_t output_only = 0;
  std::size_t bad = 0;
  RepairReport repair;
  std::int64_t output_tokens = 0;
  bool failed = false;
  std::string error;
};

struct RunReport {
  std::size_t k = 10;
  std::vector<QueryReport> queries;  // sorted by qid
  std::optional<double> mean_ndcg;   // over queries with judgments
  std::size_t evaluated = 0;
  std::size_t unjudged = 0;
  std::size_t failed = 0;
  std::size_t calls = 0;
  std::size_t attempts = 0;
  std::size_t both_good = 0;
  std::size_t output_only = 0;
  std::size_t bad = 0;
  RepairReport repair;
  std::int64_t output_tokens = 0;
  double total_seconds = 0.0;
};

struct RerankRun {
  std::map<std::string, RankedList> rankings;
  std::map<std::string, TraceLog> traces;
  RunReport report;
};

/// Reranks every query in the run. Queries are processed concurrently; results are
/// keyed by qid so output does not depend on scheduling. A failed query keeps its
/// retriever order unless `strict`, in which case the QueryError propagates.
[[nodiscard]] RerankRun run_rerank(const DatasetBundle& bundle, Gateway& gateway, const RunOptions& options);

[[nodiscard]] std::string format_run_report(const RunReport& report);
[[nodiscard]] std::string run_report_kv(const RunReport& report);

struct EvalRow {
  std::string qid;
  double ndcg = 0.0;
};

struct EvalReport {
  std::size_t k = 10;
  std::vector<EvalRow> rows;  // sorted by qid
  double mean = 0.0;          // 0 when no row was evaluated
  std::vector<std::string> unjudged;
};

/// NDCG@k per query. Queries absent from `qrels` are excluded and listed.
[[nodiscard]] EvalReport evaluate_run(const std::map<std::string, RankedList>& run, const RelevanceJudgments& qrels,
                                      std::size_t k);

[[nodiscard]] std::string format_eval_table(const EvalReport& report);
[[nodiscard]] std::string eval_report_kv(const EvalReport& report);

struct RewardRow {
  std::string group;
  std::string qid;
  std::size_t line = 0;
  std::optional<RewardBreakdown> breakdown;  // unset for precomputed rewards
  double reward = 0.0;
  std::optional<double> advantage;
  RepairReport repair;
  std::string error;  // record-level failure; the row takes no part in its group
};

struct GroupSummary {
  std::string group;
  std::size_t size = 0;
  double mean_reward = 0.0;
  std::optional<GrpoLoss> loss;  // when every member carries policy and reference log-probs
  std::string error;
};

struct RewardReport {
  std::vector<RewardRow> rows;  // input order
  std::vector<GroupSummary> groups;  // sorted by group id
  std::size_t errors = 0;
};

/// Scores each rollout against its record, normalizes rewards within each group,
/// and evaluates the GRPO loss for groups that carry log-probs.
[[nodiscard]] RewardReport compute_rewards(std::span<const RolloutRecord> rollouts,
                                           std::span<const SynthesisRecord> records, const RewardParams& reward,
                                           const GrpoParams& grpo);

[[nodiscard]] std::string reward_row_line(const RewardRow& row);
[[nodiscard]] std::string group_summary_line(const GroupSummary& group);

/// Kept/dropped counts laid out by category and domain, with totals.
[[nodiscard]] std::string format_filter_table(const FilterReport& report);
[[nodiscard]] std::string filter_report_kv(const FilterReport& report);

struct LatencySummary {
  std::size_t repeats = 0;
  std::size_t queries = 0;
  std::size_t samples = 0;
  double mean_seconds = 0.0;
  double p50_seconds = 0.0;
  double p95_seconds = 0.0;
  double calls_per_query = 0.0;
  std::size_t calls = 0;
  std::optional<std::int64_t> output_tokens;  // when the backend reports usage

  bool operator==(const LatencySummary&) const = default;
};

struct LatencyReport {
  LatencySummary summary;
  std::vector<double> seconds;  // one sample per (repeat, query)
};

/// Runs the full rerank `repeats` times and aggregates wall-clock seconds per query.
[[nodiscard]] LatencyReport measure_latency(const DatasetBundle& bundle, Gateway& gateway, const RunOptions& options,
                                            std::size_t repeats);

/// Linear-interpolated percentile, q in [0, 1]. Rejects empty input.
[[nodiscard]] double percentile(std::vector<double> values, double q);

[[nodiscard]] std::string format_latency_table(const LatencySummary& summary);
[[nodiscard]] std::string latency_kv(const LatencySummary& summary);
/// Inverse of latency_kv. Throws std::invalid_argument on unknown keys or bad values.
[[nodiscard]] LatencySummary parse_latency_kv(std::string_view text);

}  // namespace rerank
