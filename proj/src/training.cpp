#include "rerank/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace rerank {

void validate_logprobs(std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]) || values[i] > 0.0) {
      throw std::invalid_argument(fmt::format("log-prob #{} = {} is not a finite value <= 0", i, values[i]));
    }
  }
}

SftLoss sft_nll(std::span<const double> label_logprobs) {
  if (label_logprobs.empty()) throw std::invalid_argument("sft loss needs at least one token");
  validate_logprobs(label_logprobs);
  SftLoss out;
  for (double lp : label_logprobs) out.sum -= lp;
  out.mean = out.sum / static_cast<double>(label_logprobs.size());
  return out;
}

std::vector<double> group_advantages(std::span<const double> rewards) {
  if (rewards.empty()) throw std::invalid_argument("advantage group must not be empty");
  const auto n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  const double std_dev = std::sqrt(var / n);

  std::vector<double> out(rewards.size(), 0.0);
  if (std_dev <= kAdvantageStdFloor) return out;
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / std_dev;
  return out;
}

double kl_token(double policy_lp, double ref_lp) {
  const double diff = ref_lp - policy_lp;
  // expm1(x) - x keeps precision when the two log-probs are close.
  return std::expm1(diff) - diff;
}

void RolloutGroup::compute_advantages() {
  std::vector<double> rewards;
  rewards.reserve(rollouts.size());
  for (const auto& r : rollouts) rewards.push_back(r.reward);
  const auto adv = group_advantages(rewards);
  for (std::size_t i = 0; i < rollouts.size(); ++i) rollouts[i].advantage = adv[i];
}

void GrpoParams::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("clip epsilon must be > 0");
  if (!(beta >= 0.0)) throw std::invalid_argument("kl weight beta must be >= 0");
}

GrpoLoss grpo_loss(const RolloutGroup& group, const GrpoParams& params) {
  params.validate();
  if (group.rollouts.empty()) throw std::invalid_argument("rollout group is empty");

  GrpoLoss out;
  for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
    const auto& r = group.rollouts[i];
    if (!r.advantage) throw std::invalid_argument(fmt::format("rollout {} has no advantage", i));
    const auto& base = r.ratio_base ? *r.ratio_base : r.reference;
    const auto len = r.policy.size();
    if (len == 0) throw std::invalid_argument(fmt::format("rollout {} has no tokens", i));
    if (r.reference.size() != len || base.size() != len) {
      throw std::invalid_argument(fmt::format("rollout {}: policy/reference log-prob lengths differ", i));
    }
    validate_logprobs(r.policy);
    validate_logprobs(r.reference);
    validate_logprobs(base);

    const double a = *r.advantage;
    double surrogate = 0.0;
    double kl = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      const double ratio = std::exp(r.policy[t] - base[t]);
      const double clipped = std::clamp(ratio, 1.0 - params.epsilon, 1.0 + params.epsilon);
      surrogate += std::min(ratio * a, clipped * a);
      kl += kl_token(r.policy[t], r.reference[t]);
    }
    out.surrogate += surrogate / static_cast<double>(len);
    out.kl += kl / static_cast<double>(len);
  }
  const auto g = static_cast<double>(group.rollouts.size());
  out.surrogate /= g;
  out.kl /= g;
  out.loss = -out.surrogate + params.beta * out.kl;
  return out;
}

}  // namespace rerank
