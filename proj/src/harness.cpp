#include "rerank/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <json.hpp>

#include "rerank/metrics.hpp"
#include "rerank/parallel.hpp"

namespace rerank {
namespace {

using ordered_json = nlohmann::ordered_json;

struct QuerySlot {
  RankedList ranking;
  TraceLog trace;
  QueryReport report;
};

void tally(QueryReport& q, const TraceLog& trace) {
  q.calls = trace.windows.size();
  for (const auto& w : trace.windows) {
    q.attempts += static_cast<std::size_t>(w.attempts);
    switch (w.format_status) {
      case FormatStatus::BothGood: ++q.both_good; break;
      case FormatStatus::OutputOnly: ++q.output_only; break;
      case FormatStatus::Bad: ++q.bad; break;
    }
    q.repair += w.repair;
    if (w.usage) q.output_tokens += w.usage->completion_tokens;
  }
}

RankedList truncated_ids(const CandidateList& list, std::size_t top_n) {
  auto ids = list.ids();
  if (ids.size() > top_n) ids.resize(top_n);
  return ids;
}

std::string category_of(std::string_view domain) {
  if (domain == "complex-qa") return "Complex QA";
  if (domain == "coding") return "Coding";
  if (domain == "math-problem" || domain == "math-theorem") return "Math";
  if (domain == "web-search") return "Web Search";
  return "Other";
}

double parse_double_strict(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const double out = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size()) {
    throw std::invalid_argument("bad value for " + key + ": '" + value + "'");
  }
  return out;
}

std::int64_t parse_int_strict(const std::string& key, const std::string& value) {
  char* end = nullptr;
  const long long out = std::strtoll(value.c_str(), &end, 10);
  if (value.empty() || end != value.c_str() + value.size() || out < 0) {
    throw std::invalid_argument("bad value for " + key + ": '" + value + "'");
  }
  return out;
}

}  // namespace

RerankRun run_rerank(const DatasetBundle& bundle, Gateway& gateway, const RunOptions& options) {
  options.rerank.window.validate();
  std::vector<std::string> qids;
  for (const auto& [qid, _] : bundle.run) qids.push_back(qid);
  std::vector<QuerySlot> slots(qids.size());

  parallel_for(qids.size(), options.concurrency, [&](std::size_t i) {
    const auto& qid = qids[i];
    const auto& candidates = bundle.run.at(qid);
    const auto query_it = bundle.queries.find(qid);
    if (query_it == bundle.queries.end()) throw std::invalid_argument("run references unknown qid " + qid);
    auto& slot = slots[i];
    slot.report.qid = qid;
    const auto start = std::chrono::steady_clock::now();
    try {
      auto outcome = rerank_query(query_it->second, candidates, bundle.corpus, gateway, options.rerank);
      slot.ranking = std::move(outcome.ranking);
      slot.trace = std::move(outcome.trace);
    } catch (const QueryError& e) {
      if (options.strict) throw;
      slot.ranking = truncated_ids(candidates, options.rerank.window.top_n);
      slot.trace = e.partial_trace();
      slot.report.failed = true;
      slot.report.error = e.what();
    }
    slot.report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    tally(slot.report, slot.trace);
  });

  RerankRun run;
  auto& report = run.report;
  report.k = options.k;
  double ndcg_sum = 0.0;
  for (auto& slot : slots) {
    auto& q = slot.report;
    if (const auto it = bundle.qrels.find(q.qid); it != bundle.qrels.end()) {
      q.ndcg = ndcg_at_k(slot.ranking, it->second, options.k);
      ndcg_sum += *q.ndcg;
      ++report.evaluated;
    } else {
      ++report.unjudged;
    }
    report.failed += q.failed ? 1 : 0;
    report.calls += q.calls;
    report.attempts += q.attempts;
    report.both_good += q.both_good;
    report.output_only += q.output_only;
    report.bad += q.bad;
    report.repair += q.repair;
    report.output_tokens += q.output_tokens;
    report.total_seconds += q.seconds;
    report.queries.push_back(q);
    run.rankings.emplace(q.qid, std::move(slot.ranking));
    run.traces.emplace(q.qid, std::move(slot.trace));
  }
  if (report.evaluated > 0) report.mean_ndcg = ndcg_sum / static_cast<double>(report.evaluated);
  return run;
}

std::string format_run_report(const RunReport& report) {
  std::size_t width = 5;
  for (const auto& q : report.queries) width = std::max(width, q.qid.size());
  std::string out = fmt::format("{:<{}}  {:>9}  {:>9}  {:>5}  {:>8}  {:>6}  {:>6}  {:>4}\n", "qid", width,
                                fmt::format("ndcg@{}", report.k), "seconds", "calls", "attempts", "good", "tags",
                                "bad");
  for (const auto& q : report.queries) {
    const auto ndcg = q.ndcg ? fmt::format("{:.4f}", *q.ndcg) : std::string("-");
    out += fmt::format("{:<{}}  {:>9}  {:>9.4f}  {:>5}  {:>8}  {:>6}  {:>6}  {:>4}{}\n", q.qid, width, ndcg,
                       q.seconds, q.calls, q.attempts, q.both_good, q.output_only, q.bad,
                       q.failed ? "  FAILED" : "");
  }
  out += fmt::format("{:<{}}  {:>9}\n", "mean", width,
                     report.mean_ndcg ? fmt::format("{:.4f}", *report.mean_ndcg) : std::string("-"));
  out += fmt::format("evaluated {}, unjudged {}, failed {}; repairs: out-of-range {}, duplicates {}, appended {}\n",
                     report.evaluated, report.unjudged, report.failed, report.repair.out_of_range,
                     report.repair.duplicates, report.repair.appended);
  return out;
}

std::string run_report_kv(const RunReport& report) {
  std::string out;
  const auto metric = fmt::format("ndcg@{}", report.k);
  for (const auto& q : report.queries) {
    if (q.ndcg) out += fmt::format("{}.{}={}\n", metric, q.qid, *q.ndcg);
    out += fmt::format("seconds.{}={}\n", q.qid, q.seconds);
    out += fmt::format("calls.{}={}\n", q.qid, q.calls);
  }
  if (report.mean_ndcg) out += fmt::format("{}.mean={}\n", metric, *report.mean_ndcg);
  out += fmt::format("queries.evaluated={}\n", report.evaluated);
  out += fmt::format("queries.unjudged={}\n", report.unjudged);
  out += fmt::format("queries.failed={}\n", report.failed);
  out += fmt::format("calls={}\n", report.calls);
  out += fmt::format("attempts={}\n", report.attempts);
  out += fmt::format("format.both_good={}\n", report.both_good);
  out += fmt::format("format.output_only={}\n", report.output_only);
  out += fmt::format("format.bad={}\n", report.bad);
  out += fmt::format("repair.out_of_range={}\n", report.repair.out_of_range);
  out += fmt::format("repair.duplicates={}\n", report.repair.duplicates);
  out += fmt::format("repair.appended={}\n", report.repair.appended);
  out += fmt::format("output_tokens={}\n", report.output_tokens);
  out += fmt::format("seconds.total={}\n", report.total_seconds);
  return out;
}

EvalReport evaluate_run(const std::map<std::string, RankedList>& run, const RelevanceJudgments& qrels,
                        std::size_t k) {
  if (k == 0) throw std::invalid_argument("k must be positive");
  EvalReport report;
  report.k = k;
  double sum = 0.0;
  for (const auto& [qid, ranking] : run) {
    const auto it = qrels.find(qid);
    if (it == qrels.end()) {
      report.unjudged.push_back(qid);
      continue;
    }
    report.rows.push_back({qid, ndcg_at_k(ranking, it->second, k)});
    sum += report.rows.back().ndcg;
  }
  if (!report.rows.empty()) report.mean = sum / static_cast<double>(report.rows.size());
  return report;
}

std::string format_eval_table(const EvalReport& report) {
  std::size_t width = 5;
  for (const auto& r : report.rows) width = std::max(width, r.qid.size());
  std::string out = fmt::format("{:<{}}  {:>8}\n", "qid", width, fmt::format("ndcg@{}", report.k));
  for (const auto& r : report.rows) out += fmt::format("{:<{}}  {:>8.4f}\n", r.qid, width, r.ndcg);
  out += fmt::format("{:<{}}  {:>8.4f}\n", "mean", width, report.mean);
  if (!report.unjudged.empty()) {
    out += fmt::format("excluded {} quer{} without judgments: {}\n", report.unjudged.size(),
                       report.unjudged.size() == 1 ? "y" : "ies", fmt::join(report.unjudged, " "));
  }
  return out;
}

std::string eval_report_kv(const EvalReport& report) {
  std::string out;
  const auto metric = fmt::format("ndcg@{}", report.k);
  for (const auto& r : report.rows) out += fmt::format("{}.{}={}\n", metric, r.qid, r.ndcg);
  out += fmt::format("{}.mean={}\n", metric, report.mean);
  out += fmt::format("queries.evaluated={}\n", report.rows.size());
  out += fmt::format("queries.unjudged={}\n", report.unjudged.size());
  return out;
}

RewardReport compute_rewards(std::span<const RolloutRecord> rollouts, std::span<const SynthesisRecord> records,
                             const RewardParams& reward, const GrpoParams& grpo) {
  reward.validate();
  grpo.validate();
  std::unordered_map<std::string, const SynthesisRecord*> by_qid;
  for (const auto& r : records) {
    if (!by_qid.emplace(r.query.qid, &r).second) throw std::invalid_argument("duplicate record qid " + r.query.qid);
  }

  RewardReport report;
  report.rows.reserve(rollouts.size());
  for (const auto& rollout : rollouts) {
    RewardRow row;
    row.group = rollout.group;
    row.qid = rollout.qid;
    row.line = rollout.line;
    const auto it = by_qid.find(rollout.qid);
    if (it == by_qid.end()) {
      row.error = "no training list with qid " + rollout.qid;
    } else if (rollout.reward) {
      row.reward = *rollout.reward;
    } else {
      const auto& record = *it->second;
      std::vector<std::string> ids;
      for (const auto& p : record.passages) ids.push_back(p.id);
      const auto scored = score_rollout(rollout.response, ids, record.pointwise, record.label.gold, reward);
      row.breakdown = scored.reward;
      row.reward = scored.reward.final;
      row.repair = scored.repair;
    }
    if (!row.error.empty()) ++report.errors;
    report.rows.push_back(std::move(row));
  }

  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    if (report.rows[i].error.empty()) members[report.rows[i].group].push_back(i);
  }
  for (const auto& [group_id, idx] : members) {
    GroupSummary summary;
    summary.group = group_id;
    summary.size = idx.size();
    std::vector<double> rewards;
    for (const auto i : idx) rewards.push_back(report.rows[i].reward);
    summary.mean_reward = std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(rewards.size());
    const auto advantages = group_advantages(rewards);
    for (std::size_t j = 0; j < idx.size(); ++j) report.rows[idx[j]].advantage = advantages[j];

    std::size_t with_logprobs = 0;
    for (const auto i : idx) {
      const auto& r = rollouts[i];
      if (!r.policy.empty() && !r.reference.empty()) ++with_logprobs;
    }
    if (with_logprobs == idx.size()) {
      RolloutGroup group;
      for (std::size_t j = 0; j < idx.size(); ++j) {
        const auto& r = rollouts[idx[j]];
        group.rollouts.push_back({rewards[j], r.policy, r.reference, r.old_policy, advantages[j]});
      }
      try {
        summary.loss = grpo_loss(group, grpo);
      } catch (const std::invalid_argument& e) {
        summary.error = e.what();
      }
    } else if (with_logprobs > 0) {
      summary.error = "log-probs present for only some rollouts of the group";
    }
    if (!summary.error.empty()) ++report.errors;
    report.groups.push_back(std::move(summary));
  }
  return report;
}

std::string reward_row_line(const RewardRow& row) {
  ordered_json doc;
  doc["kind"] = "rollout";
  doc["group"] = row.group;
  doc["qid"] = row.qid;
  doc["line"] = row.line;
  if (!row.error.empty()) {
    doc["error"] = row.error;
    return doc.dump();
  }
  if (row.breakdown) {
    doc["format_status"] = std::string(to_string(row.breakdown->format_status));
    doc["ndcg"] = row.breakdown->ndcg;
    doc["recall"] = row.breakdown->recall;
    doc["rbo"] = row.breakdown->rbo;
    doc["r_m"] = row.breakdown->r_m;
  }
  doc["reward"] = row.reward;
  doc["advantage"] = row.advantage ? ordered_json(*row.advantage) : ordered_json(nullptr);
  if (row.breakdown) {
    doc["repair"] = {{"out_of_range", row.repair.out_of_range},
                     {"duplicates", row.repair.duplicates},
                     {"appended", row.repair.appended}};
  }
  return doc.dump();
}

std::string group_summary_line(const GroupSummary& group) {
  ordered_json doc;
  doc["kind"] = "group";
  doc["group"] = group.group;
  doc["size"] = group.size;
  doc["mean_reward"] = group.mean_reward;
  if (group.loss) {
    doc["loss"] = group.loss->loss;
    doc["surrogate"] = group.loss->surrogate;
    doc["kl"] = group.loss->kl;
  }
  if (!group.error.empty()) doc["error"] = group.error;
  return doc.dump();
}

std::string format_filter_table(const FilterReport& report) {
  std::string out = fmt::format("{:<12}{:<14}{:>8}{:>9}\n", "Category", "Domain", "Kept", "Dropped");
  std::string last_category;
  for (const auto domain : kAllDomains) {
    const auto name = std::string(to_string(domain));
    const auto it = report.per_domain.find(name);
    const DomainCounts counts = it == report.per_domain.end() ? DomainCounts{} : it->second;
    auto category = category_of(name);
    const auto shown = category == last_category ? std::string{} : category;
    last_category = std::move(category);
    out += fmt::format("{:<12}{:<14}{:>8}{:>9}\n", shown, name, counts.kept, counts.dropped);
  }
  for (const auto& [name, counts] : report.per_domain) {
    if (parse_domain(name)) continue;
    out += fmt::format("{:<12}{:<14}{:>8}{:>9}\n", "Other", name, counts.kept, counts.dropped);
  }
  out += fmt::format("{:<26}{:>8}{:>9}\n", "Total", report.kept(), report.dropped());
  out += fmt::format("alpha = {}\n", report.alpha);
  return out;
}

std::string filter_report_kv(const FilterReport& report) {
  std::string out = fmt::format("alpha={}\n", report.alpha);
  std::map<std::string, DomainCounts> counts;
  for (auto d : kAllDomains) counts[std::string(to_string(d))] = {};
  for (const auto& [name, c] : report.per_domain) counts[name] = c;
  for (const auto& [name, c] : counts) {
    out += fmt::format("kept.{}={}\n", name, c.kept);
    out += fmt::format("dropped.{}={}\n", name, c.dropped);
  }
  out += fmt::format("kept.total={}\n", report.kept());
  out += fmt::format("dropped.total={}\n", report.dropped());
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("percentile q must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

LatencyReport measure_latency(const DatasetBundle& bundle, Gateway& gateway, const RunOptions& options,
                              std::size_t repeats) {
  if (repeats == 0) throw std::invalid_argument("repeats must be positive");
  LatencyReport report;
  auto& s = report.summary;
  s.repeats = repeats;
  bool usage_seen = false;
  std::int64_t tokens = 0;
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto run = run_rerank(bundle, gateway, options);
    s.queries = run.report.queries.size();
    for (const auto& q : run.report.queries) report.seconds.push_back(q.seconds);
    s.calls += run.report.calls;
    tokens += run.report.output_tokens;
    for (const auto& [_, trace] : run.traces) {
      for (const auto& w : trace.windows) usage_seen = usage_seen || w.usage.has_value();
    }
  }
  s.samples = report.seconds.size();
  if (s.samples > 0) {
    s.mean_seconds = std::accumulate(report.seconds.begin(), report.seconds.end(), 0.0) /
                     static_cast<double>(s.samples);
    s.p50_seconds = percentile(report.seconds, 0.5);
    s.p95_seconds = percentile(report.seconds, 0.95);
    s.calls_per_query = static_cast<double>(s.calls) / static_cast<double>(s.samples);
  }
  if (usage_seen) s.output_tokens = tokens;
  return report;
}

std::string format_latency_table(const LatencySummary& s) {
  std::string out;
  out += fmt::format("{:<18}{:>12}\n", "queries", s.queries);
  out += fmt::format("{:<18}{:>12}\n", "repeats", s.repeats);
  out += fmt::format("{:<18}{:>12.6f}\n", "mean s/query", s.mean_seconds);
  out += fmt::format("{:<18}{:>12.6f}\n", "p50 s/query", s.p50_seconds);
  out += fmt::format("{:<18}{:>12.6f}\n", "p95 s/query", s.p95_seconds);
  out += fmt::format("{:<18}{:>12.2f}\n", "calls/query", s.calls_per_query);
  out += fmt::format("{:<18}{:>12}\n", "calls", s.calls);
  out += fmt::format("{:<18}{:>12}\n", "output tokens", s.output_tokens ? fmt::format("{}", *s.output_tokens) : "-");
  return out;
}

std::string latency_kv(const LatencySummary& s) {
  std::string out;
  out += fmt::format("repeats={}\n", s.repeats);
  out += fmt::format("queries={}\n", s.queries);
  out += fmt::format("samples={}\n", s.samples);
  out += fmt::format("seconds.mean={}\n", s.mean_seconds);
  out += fmt::format("seconds.p50={}\n", s.p50_seconds);
  out += fmt::format("seconds.p95={}\n", s.p95_seconds);
  out += fmt::format("calls={}\n", s.calls);
  out += fmt::format("calls_per_query={}\n", s.calls_per_query);
  if (s.output_tokens) out += fmt::format("output_tokens={}\n", *s.output_tokens);
  return out;
}

LatencySummary parse_latency_kv(std::string_view text) {
  LatencySummary s;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = std::string(text.substr(pos, end - pos));
    pos = end + 1;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("expected key=value, got '" + line + "'");
    const auto key = line.substr(0, eq);
    const auto value = line.substr(eq + 1);
    if (key == "repeats") s.repeats = static_cast<std::size_t>(parse_int_strict(key, value));
    else if (key == "queries") s.queries = static_cast<std::size_t>(parse_int_strict(key, value));
    else if (key == "samples") s.samples = static_cast<std::size_t>(parse_int_strict(key, value));
    else if (key == "seconds.mean") s.mean_seconds = parse_double_strict(key, value);
    else if (key == "seconds.p50") s.p50_seconds = parse_double_strict(key, value);
    else if (key == "seconds.p95") s.p95_seconds = parse_double_strict(key, value);
    else if (key == "calls") s.calls = static_cast<std::size_t>(parse_int_strict(key, value));
    else if (key == "calls_per_query") s.calls_per_query = parse_double_strict(key, value);
    else if (key == "output_tokens") s.output_tokens = parse_int_strict(key, value);
    else throw std::invalid_argument("unknown key " + key);
  }
  return s;
}

}  // namespace rerank
