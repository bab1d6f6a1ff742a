#include "rerank/reward.hpp"

#include <stdexcept>

#include "rerank/metrics.hpp"

namespace rerank {

void RewardParams::validate() const {
  if (!(phi >= 0.0) || !(gamma >= 0.0)) throw std::invalid_argument("reward weights must be >= 0");
  if (!(rbo_p > 0.0 && rbo_p < 1.0)) throw std::invalid_argument("rbo persistence must lie in (0, 1)");
  if (k < 1) throw std::invalid_argument("reward cutoff must be >= 1");
}

RewardBreakdown multi_view_reward(const RankedList& rollout, const Grades& grades, const RankedList& gold,
                                  const RewardParams& params) {
  params.validate();
  RewardBreakdown out;
  out.ndcg = ndcg_at_k(rollout, grades, params.k);
  out.recall = recall_at_k(rollout, grades, params.k);
  out.rbo = rbo(rollout, gold, params.rbo_p);
  out.r_m = out.ndcg + params.phi * out.recall + params.gamma * out.rbo;
  return out;
}

double final_reward(FormatStatus status, double r_m) {
  switch (status) {
    case FormatStatus::BothGood:
      return r_m;
    case FormatStatus::OutputOnly:
      return 0.0;
    case FormatStatus::Bad:
      return -1.0;
  }
  return -1.0;
}

ScoredRollout score_rollout(std::string_view raw, std::span<const std::string> list_ids, const Grades& grades,
                            const RankedList& gold, const RewardParams& params) {
  const auto response = parse_response(raw, list_ids.size());
  auto parsed = parse_ranking(ranking_text(response), list_ids);
  ScoredRollout out;
  out.reward = multi_view_reward(parsed.ranking, grades, gold, params);
  out.reward.format_status = response.format_status;
  out.reward.final = final_reward(response.format_status, out.reward.r_m);
  out.ranking = std::move(parsed.ranking);
  out.repair = parsed.report;
  return out;
}

}  // namespace rerank
