#pragma once

// Loss arithmetic over per-token log-probabilities. No model, no gradients through
// a network: callers supply the log-probs their trainer produced.

#include <optional>
#include <span>
#include <vector>

namespace rerank {

/// Per-token log-probabilities; every entry finite and <= 0.
using TokenLogProbs = std::vector<double>;

/// Throws std::invalid_argument unless every entry is finite and <= 0.
void validate_logprobs(std::span<const double> values);

struct SftLoss {
  double sum = 0.0;   // -sum of log-probs
  double mean = 0.0;  // sum / token count
};

/// Negative log-likelihood of a label sequence. Rejects empty input.
[[nodiscard]] SftLoss sft_nll(std::span<const double> label_logprobs);

/// Group-normalized advantages (r - mean) / max(std, 1e-8) with the population std.
/// A group with zero spread gets all-zero advantages.
[[nodiscard]] std::vector<double> group_advantages(std::span<const double> rewards);

inline constexpr double kAdvantageStdFloor = 1e-8;

/// Non-negative per-token KL estimate exp(ref - pol) - (ref - pol) - 1.
[[nodiscard]] double kl_token(double policy_lp, double ref_lp);

struct Rollout {
  double reward = 0.0;
  TokenLogProbs policy;
  TokenLogProbs reference;
  // Denominator of the importance ratio. Defaults to `reference`; pass the
  // pre-update policy's log-probs to get the usual PPO-style ratio.
  std::optional<TokenLogProbs> ratio_base;
  std::optional<double> advantage;  // set by RolloutGroup::compute_advantages
};

struct RolloutGroup {
  std::vector<Rollout> rollouts;

  /// Normalizes rewards within the group into advantages.
  void compute_advantages();
};

struct GrpoParams {
  double epsilon = 0.2;  // clip width
  double beta = 0.001;   // KL weight

  void validate() const;
};

struct GrpoLoss {
  double loss = 0.0;       // -surrogate + beta * kl
  double surrogate = 0.0;  // mean over rollouts of the per-token mean clipped term
  double kl = 0.0;         // mean over rollouts of the per-token mean KL estimate
};

/// Token-level clipped surrogate with a KL penalty, averaged per sequence and then
/// over the group. Rejects missing advantages, empty or misaligned sequences.
[[nodiscard]] GrpoLoss grpo_loss(const RolloutGroup& group, const GrpoParams& params);

}  // namespace rerank
