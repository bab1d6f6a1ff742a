// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include <fmt/format.h>
#include <json.hpp>

#include "rerank/dataset.hpp"
#include "rerank/harness.hpp"
#include "rerank/metrics.hpp"
#include "rerank/mock_backend.hpp"
#include "rerank/records.hpp"
#include "rerank/reward.hpp"
#include "rerank/synthesis.hpp"
#include "rerank/training.hpp"
#include "rerank/window.hpp"
#include "support.hpp"

using namespace rerank;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void run_criterion(int id, const std::string& name, double budget_ms, const std::function<Outcome()>& check) {
  Outcome outcome;
  const auto start = std::chrono::steady_clock::now();
  try {
    outcome = check();
  } catch (const std::exception& e) {
    outcome = {false, std::string("exception: ") + e.what()};
  }
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  if (budget_ms > 0 && ms >= budget_ms) {
    outcome.pass = false;
    outcome.detail += fmt::format("; over the {} ms budget", budget_ms);
  }
  if (!outcome.pass) ++failures;
  std::printf("%s [%2d] %s: %s (%.3f ms)\n", outcome.pass ? "PASS" : "FAIL", id, name.c_str(),
              outcome.detail.c_str(), ms);
  std::fflush(stdout);
}

Gateway quiet_gateway(std::shared_ptr<ChatBackend> backend, int concurrency = 8, int retries = 2) {
  BackendConfig c;
  c.concurrency = concurrency;
  c.retries = retries;
  return Gateway(std::move(backend), c, [](std::chrono::milliseconds) {});
}

RankedList numbered(std::size_t n) {
  RankedList out;
  for (std::size_t i = 1; i <= n; ++i) out.push_back("d" + std::to_string(i));
  return out;
}

Outcome ndcg_worked_example() {
  const auto ranked = numbered(20);
  const Grades far{{"d2", 1}, {"d11", 1}};
  const Grades near{{"d9", 1}, {"d10", 1}};
  const double a = ndcg_at_k(ranked, far, 10);
  const double b = ndcg_at_k(ranked, near, 10);
  const bool ok = std::abs(a - 0.3869) <= 0.005 && std::abs(b - 0.3618) <= 0.005 && b < a;
  return {ok, fmt::format("ranks 2,11 -> {:.4f}; ranks 9,10 -> {:.4f}", a, b)};
}

Outcome reward_gating() {
  std::ifstream in(fixture::fixtures_dir() / "gating_cases.jsonl");
  if (!in) return {false, "missing gating_cases.jsonl"};
  std::string line;
  std::size_t cases = 0, mismatches = 0;
  std::string first_bad;
  while (std::getline(in, line)) {
    const auto doc = nlohmann::json::parse(line);
    const auto ids = doc.at("ids").get<std::vector<std::string>>();
    const auto gold = doc.at("gold").get<RankedList>();
    Grades grades;
    for (const auto& [id, g] : doc.at("grades").items()) grades[id] = g.get<int>();
    const auto scored = score_rollout(doc.at("response").get<std::string>(), ids, grades, gold, {});
    const auto expected_status = parse_format_status(doc.at("status").get<std::string>());
    const double expected = doc.at("reward").get<double>();
    const bool ok = expected_status == scored.reward.format_status &&
                    std::abs(scored.reward.final - expected) <= 1e-9 &&
                    scored.reward.final == final_reward(scored.reward.format_status, scored.reward.r_m);
    ++cases;
    if (!ok) {
      ++mismatches;
      if (first_bad.empty()) first_bad = fmt::format(" (first at case {})", cases);
    }
  }
  return {cases == 200 && mismatches == 0, fmt::format("{} cases, {} mismatches{}", cases, mismatches, first_bad)};
}

Outcome default_constants() {
  const RewardParams reward;
  const WindowParams window;
  const auto nine = plan_windows(window, 100).ranges.size();
  const auto nineteen = plan_windows({100, 10, 5}, 100).ranges.size();
  const bool ok = reward.phi == 0.2 && reward.gamma == 0.1 && kDefaultConsistencyAlpha == 0.4 && window.top_n == 100 &&
                  window.window == 20 && window.stride == 10 && nine == 9 && nineteen == 19;
  return {ok, fmt::format("phi={} gamma={} alpha={} N={} w={} s={}; windows {} and {}", reward.phi, reward.gamma,
                          kDefaultConsistencyAlpha, window.top_n, window.window, window.stride, nine, nineteen)};
}

Outcome filter_boundary() {
  auto records = read_records(fixture::fixtures_dir() / "boundary_records.jsonl");
  if (records.size() != 3) return {false, "expected 3 boundary records"};
  std::string scores;
  for (const auto& r : records) scores += fmt::format("{}={:.4f} ", r.query.qid, consistency_score(r));
  const auto result = self_consistency_filter(records, kDefaultConsistencyAlpha);
  std::vector<std::string> kept;
  for (const auto& r : result.kept) kept.push_back(r.query.qid);
  const bool ok = kept == std::vector<std::string>{"edge", "high"} && result.report.dropped() == 1;
  return {ok, scores + fmt::format("-> kept {}, dropped {}", kept.size(), result.report.dropped())};
}

Outcome metric_oracles() {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 20;
    auto ranked = numbered(n);
    std::shuffle(ranked.begin(), ranked.end(), rng);
    auto other = ranked;
    std::shuffle(other.begin(), other.end(), rng);
    Grades grades;
    for (std::size_t i = 1; i <= n + 3; ++i) {
      if (rng() % 3 == 0) grades["d" + std::to_string(i)] = static_cast<int>(rng() % 4);
    }
    const double p = 0.5 + 0.49 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    worst = std::max(worst, std::abs(ndcg_at_k(ranked, grades, 10) - oracle::ndcg(ranked, grades, 10)));
    worst = std::max(worst, std::abs(recall_at_k(ranked, grades, 10) - oracle::recall(ranked, grades, 10)));
    worst = std::max(worst, std::abs(rbo(ranked, other, p) - oracle::rbo(ranked, other, p)));
  }
  return {worst <= 1e-9, fmt::format("1000 instances, max abs diff {:.3g}", worst)};
}

Outcome end_to_end_oracle() {
  const auto bundle = fixture::make_bundle({});
  RunOptions options;
  options.concurrency = 8;
  auto oracle_gw = quiet_gateway(std::make_shared<OracleBackend>(bundle.qrels));
  const auto oracle_run = run_rerank(bundle, oracle_gw, options);
  auto identity_gw = quiet_gateway(std::make_shared<IdentityBackend>());
  const auto identity_run = run_rerank(bundle, identity_gw, options);
  const auto baseline = evaluate_run(run_as_rankings(bundle.run), bundle.qrels, 10);
  const double o = oracle_run.report.mean_ndcg.value_or(-1.0);
  const double i = identity_run.report.mean_ndcg.value_or(-1.0);
  const bool ok = oracle_run.report.evaluated == 50 && o == 1.0 && i == baseline.mean;
  return {ok, fmt::format("50 queries; oracle {:.6f}, identity {:.6f}, baseline {:.6f}", o, i, baseline.mean)};
}

std::string adversarial_output(std::mt19937_64& rng, std::size_t m) {
  const auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  const auto token = [&]() -> std::string {
    switch (pick(6)) {
      case 0:
        return "[" + std::to_string(pick(m + 3)) + "]";
      case 1:
        return "[" + std::to_string(rng()) + std::to_string(rng()) + "]";
      case 2:
        return "[-" + std::to_string(pick(5)) + "]";
      case 3:
        return "[ " + std::to_string(1 + pick(m)) + " ]";
      case 4:
        return "[]";
      default:
        return "[" + std::to_string(1 + pick(m)) + "]";
    }
  };
  std::string body;
  const auto n = pick(2 * m + 2);
  for (std::size_t i = 0; i < n; ++i) {
    if (i) body += pick(4) == 0 ? ", " : " > ";
    body += token();
  }
  switch (pick(8)) {
    case 0: {
      std::string noise;
      for (std::size_t i = 0, len = pick(200); i < len; ++i) noise += static_cast<char>(pick(256));
      return noise;
    }
    case 1:
      return "<answer>" + body;
    case 2:
      return "<think><answer>" + body + "</answer></think>";
    case 3:
      return body;
    case 4:
      return "<think>" + body + "</think><answer></answer>";
    case 5:
      return "</answer>" + body + "<answer><think>";
    case 6: {
      std::vector<std::size_t> perm(m);
      for (std::size_t i = 0; i < m; ++i) perm[i] = i + 1;
      std::shuffle(perm.begin(), perm.end(), rng);
      return "<think>x</think><answer>" + format_ranking_answer(perm) + "</answer>";
    }
    default:
      return "<think>" + token() + "</think><answer>" + body + "</answer>";
  }
}

Outcome permutation_fuzz() {
  std::mt19937_64 rng(77);
  Corpus corpus;
  CandidateList candidates;
  candidates.qid = "fuzz";
  for (std::size_t i = 0; i < 20; ++i) {
    const auto id = "f" + std::to_string(i);
    corpus[id] = {id, "passage " + std::to_string(i), ""};
    candidates.entries.push_back({id, 100.0 - static_cast<double>(i)});
  }
  const auto expected = candidates.ids();
  std::string next;
  auto backend = std::make_shared<FunctionBackend>("fuzz", [&](const ChatRequest&) { return next; });
  auto gateway = quiet_gateway(backend, 1, 0);
  RerankOptions options;
  options.window = {20, 20, 10};
  const Query query{"fuzz", "fuzz query", std::nullopt};
  std::size_t bad = 0;
  for (int i = 0; i < 10000; ++i) {
    next = adversarial_output(rng, 20);
    const auto out = rerank_query(query, candidates, corpus, gateway, options);
    if (!is_permutation_of(out.ranking, expected)) ++bad;
  }
  return {bad == 0, fmt::format("10000 outputs, {} non-permutations", bad)};
}

Outcome grpo_math() {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::string> problems;

  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> rewards(2 + rng() % 15);
    for (auto& r : rewards) r = normal(rng) * (trial % 5 == 0 ? 1e-3 : 1.0);
    double mean = 0.0;
    for (double r : rewards) mean += r / static_cast<double>(rewards.size());
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean) / static_cast<double>(rewards.size());
    if (std::sqrt(var) <= 1e-8) continue;
    const auto adv = group_advantages(rewards);
    double am = 0.0, av = 0.0;
    for (double a : adv) am += a / static_cast<double>(adv.size());
    for (double a : adv) av += (a - am) * (a - am) / static_cast<double>(adv.size());
    if (std::abs(am) > 1e-9 || std::abs(std::sqrt(av) - 1.0) > 1e-9) {
      problems.push_back("advantage normalization");
      break;
    }
  }

  double worst_const = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const double a = normal(rng) * 3.0;
    RolloutGroup group;
    for (std::size_t i = 0, n = 1 + rng() % 6; i < n; ++i) {
      TokenLogProbs lp(1 + rng() % 12);
      for (auto& v : lp) v = -5.0 * unit(rng);
      group.rollouts.push_back({0.0, lp, lp, std::nullopt, a});
    }
    worst_const = std::max(worst_const, std::abs(grpo_loss(group, {}).loss + a));
  }
  if (worst_const > 1e-12) problems.push_back(fmt::format("policy=reference loss off by {:.3g}", worst_const));

  double min_kl = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double pol = -10.0 * unit(rng);
    const double ref = -10.0 * unit(rng);
    min_kl = std::min(min_kl, kl_token(pol, ref));
  }
  if (min_kl < 0.0) problems.push_back(fmt::format("negative KL {:.3g}", min_kl));

  const GrpoParams params;
  double worst_rel = 0.0;
  std::size_t checked = 0;
  for (int trial = 0; trial < 50; ++trial) {
    RolloutGroup group;
    for (std::size_t i = 0, n = 2 + rng() % 4; i < n; ++i) {
      TokenLogProbs ref(1 + rng() % 6), pol;
      for (auto& v : ref) v = -4.0 * unit(rng) - 0.1;
      for (double v : ref) pol.push_back(v + 0.05 * normal(rng));
      group.rollouts.push_back({normal(rng), pol, ref, std::nullopt, std::nullopt});
    }
    group.compute_advantages();
    for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
      for (std::size_t t = 0; t < group.rollouts[i].policy.size(); ++t) {
        const auto& r = group.rollouts[i];
        const double ratio = std::exp(r.policy[t] - r.reference[t]);
        if (std::abs(ratio - 1.0) > params.epsilon - 0.02) continue;  // stay clear of the clip kink
        const double h = 1e-6;
        auto plus = group, minus = group;
        plus.rollouts[i].policy[t] += h;
        minus.rollouts[i].policy[t] -= h;
        const double numeric = (grpo_loss(plus, params).loss - grpo_loss(minus, params).loss) / (2.0 * h);
        const double analytic = oracle::grpo_unclipped_grad(group, params, i, t);
        if (std::abs(analytic) < 1e-6) continue;
        worst_rel = std::max(worst_rel, std::abs(numeric - analytic) / std::abs(analytic));
        ++checked;
      }
    }
  }
  if (checked < 100 || worst_rel > 1e-4) {
    problems.push_back(fmt::format("finite differences: {} tokens, max rel err {:.3g}", checked, worst_rel));
  }

  if (!problems.empty()) return {false, problems.front()};
  return {true, fmt::format("advantages normalized; const loss err {:.1g}; min KL {:.1g}; {} FD tokens, max rel {:.2g}",
                            worst_const, min_kl, checked, worst_rel)};
}

std::string pipeline_bytes(std::size_t concurrency) {
  fixture::BundleSpec spec;
  spec.queries = 12;
  spec.candidates = 40;
  spec.graded = true;
  spec.seed = 31;
  const auto bundle = fixture::make_bundle(spec);

  std::vector<SynthesisInput> inputs;
  for (const auto& [qid, list] : bundle.run) {
    SynthesisInput in;
    in.query = bundle.queries.at(qid);
    in.answer = "answer for " + qid;
    in.domain = kAllDomains[inputs.size() % 4];
    for (const auto& e : list.entries) in.candidates.push_back(bundle.corpus.at(e.id));
    inputs.push_back(std::move(in));
  }
  auto teacher = quiet_gateway(std::make_shared<NoisyBackend>(5, 0.2, bundle.qrels));
  SynthesisConfig config;
  config.seed = 5;
  config.concurrency = concurrency;
  const auto synthesized = synthesize(inputs, teacher, config);
  const auto filtered = self_consistency_filter(synthesized.records, kDefaultConsistencyAlpha);

  auto reranker = quiet_gateway(std::make_shared<NoisyBackend>(5, 0.1, bundle.qrels));
  RunOptions options;
  options.concurrency = concurrency;
  options.rerank.window = {40, 20, 10};
  const auto run = run_rerank(bundle, reranker, options);

  std::ostringstream out;
  write_records(out, synthesized.records);
  out << filter_report_kv(filtered.report);
  write_run(out, run.rankings, "det");
  out << eval_report_kv(evaluate_run(run.rankings, bundle.qrels, 10));
  return out.str();
}

Outcome determinism() {
  const auto a = pipeline_bytes(1);
  const auto b = pipeline_bytes(1);
  const auto c = pipeline_bytes(8);
  const auto d = pipeline_bytes(8);
  const bool ok = !a.empty() && a == b && a == c && c == d;
  return {ok, fmt::format("{} bytes; serial runs {}, concurrency 8 {}", a.size(), a == b ? "equal" : "differ",
                          a == c && c == d ? "equal" : "differ")};
}

Outcome backend_robustness() {
  fixture::BundleSpec spec;
  spec.queries = 1;
  spec.candidates = 20;
  const auto bundle = fixture::make_bundle(spec);
  auto flaky = std::make_shared<FlakyBackend>(std::make_shared<IdentityBackend>(), 2);
  auto gateway = quiet_gateway(flaky, 1, 2);
  RunOptions options;
  options.rerank.window = {20, 20, 10};
  const auto run = run_rerank(bundle, gateway, options);
  const auto kv = run_report_kv(run.report);
  const bool ok = run.report.failed == 0 && run.report.calls == 1 && run.report.attempts == 3 &&
                  flaky->calls() == 3 && kv.find("\nattempts=3\n") != std::string::npos;
  return {ok, fmt::format("{} call, {} attempts recorded, failed queries {}", run.report.calls, run.report.attempts,
                          run.report.failed)};
}

}  // namespace

int main() {
  run_criterion(1, "NDCG@10 worked example", 1.0, ndcg_worked_example);
  run_criterion(2, "reward gating over 200 responses", 1000.0, reward_gating);
  run_criterion(3, "default constants and window counts", 0, default_constants);
  run_criterion(4, "consistency filter boundary", 0, filter_boundary);
  run_criterion(5, "metric oracle equivalence", 0, metric_oracles);
  run_criterion(6, "end-to-end oracle and identity runs", 10000.0, end_to_end_oracle);
  run_criterion(7, "permutation safety fuzz", 0, permutation_fuzz);
  run_criterion(8, "GRPO math", 0, grpo_math);
  run_criterion(9, "pipeline determinism", 0, determinism);
  run_criterion(10, "backend retry robustness", 0, backend_robustness);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
