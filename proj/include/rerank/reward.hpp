#pragma once

// Format-gated multi-view ranking reward for policy training.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>

#include "rerank/response.hpp"
#include "rerank/types.hpp"

namespace rerank {

struct RewardParams {
  double phi = 0.2;    // Recall@k weight
  double gamma = 0.1;  // RBO weight
  double rbo_p = 0.9;  // RBO persistence
  std::size_t k = 10;

  void validate() const;
};

struct RewardBreakdown {
  double ndcg = 0.0;
  double recall = 0.0;
  double rbo = 0.0;
  double r_m = 0.0;    // ndcg + phi * recall + gamma * rbo
  double final = 0.0;  // gated by format_status
  FormatStatus format_status = FormatStatus::Bad;
};

/// Fills ndcg, recall, rbo and r_m. `final` and `format_status` are left at their
/// defaults; see final_reward.
[[nodiscard]] RewardBreakdown multi_view_reward(const RankedList& rollout, const Grades& grades,
                                                const RankedList& gold, const RewardParams& params);

/// r_m when both formats are good, 0 when only the tags are right, -1 otherwise.
[[nodiscard]] double final_reward(FormatStatus status, double r_m);

struct ScoredRollout {
  RewardBreakdown reward;
  RankedList ranking;  // repaired rollout ranking
  RepairReport repair;
};

/// Parses a raw rollout against its training list and computes the full reward.
[[nodiscard]] ScoredRollout score_rollout(std::string_view raw, std::span<const std::string> list_ids,
                                          const Grades& grades, const RankedList& gold, const RewardParams& params);

}  // namespace rerank
