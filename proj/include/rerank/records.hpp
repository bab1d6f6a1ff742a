#pragma once

// Line-delimited JSON schemas (documented in docs/formats.md).

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rerank/reward.hpp"
#include "rerank/synthesis.hpp"
#include "rerank/training.hpp"

namespace rerank {

[[nodiscard]] std::vector<SynthesisInput> read_synthesis_inputs(std::istream& in, const std::string& name);
[[nodiscard]] std::vector<SynthesisInput> read_synthesis_inputs(const std::filesystem::path& path);

void write_records(std::ostream& out, std::span<const SynthesisRecord> records);
[[nodiscard]] std::string record_to_line(const SynthesisRecord& record);
[[nodiscard]] std::vector<SynthesisRecord> read_records(std::istream& in, const std::string& name);
[[nodiscard]] std::vector<SynthesisRecord> read_records(const std::filesystem::path& path);

struct RolloutRecord {
  std::string group;
  std::string qid;  // training list (record) this rollout answers
  std::string response;
  std::optional<double> reward;  // precomputed reward; otherwise scored from `response`
  TokenLogProbs policy;
  TokenLogProbs reference;
  std::optional<TokenLogProbs> old_policy;
  std::size_t line = 0;
};

[[nodiscard]] std::vector<RolloutRecord> read_rollouts(std::istream& in, const std::string& name);
[[nodiscard]] std::vector<RolloutRecord> read_rollouts(const std::filesystem::path& path);

}  // namespace rerank
