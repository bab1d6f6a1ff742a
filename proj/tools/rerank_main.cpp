// Command-line front end: rerank, eval, reward, filter, synthesize, plan-windows, latency.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "rerank/dataset.hpp"
#include "rerank/harness.hpp"
#include "rerank/http_backend.hpp"
#include "rerank/mock_backend.hpp"
#include "rerank/records.hpp"
#include "rerank/synthesis.hpp"
#include "rerank/window.hpp"

namespace fs = std::filesystem;
using namespace rerank;

namespace {

struct BackendFlags {
  std::string backend = "identity";
  std::optional<std::string> config;
  std::optional<std::string> model;
  std::optional<double> temperature;
  std::optional<int> max_tokens;
  std::optional<int> retries;
  std::size_t concurrency = 1;
  std::uint64_t seed = 42;
  double swap_rate = 0.1;
  std::string malformed_mode = "no-tags";
};

struct DatasetFlags {
  std::string corpus;
  std::string queries;
  std::string run;
  std::optional<std::string> qrels;
};

void add_backend_flags(CLI::App& cmd, BackendFlags& f) {
  cmd.add_option("--backend", f.backend, "identity | reverse | oracle | noisy | malformed | http(s)://endpoint")
      ->capture_default_str();
  cmd.add_option("--config", f.config, "JSON backend config (endpoint, model, temperature, ...)");
  cmd.add_option("--model", f.model, "Model name sent to remote endpoints");
  cmd.add_option("--temperature", f.temperature, "Sampling temperature");
  cmd.add_option("--max-tokens", f.max_tokens, "Completion token budget");
  cmd.add_option("--retries", f.retries, "Extra attempts after a retryable failure");
  cmd.add_option("--concurrency", f.concurrency, "Parallel queries and in-flight requests")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd.add_option("--seed", f.seed, "Seed for noisy mocks and list assembly")->capture_default_str();
  cmd.add_option("--swap-rate", f.swap_rate, "Adjacent swap probability for the noisy mock")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cmd.add_option("--malformed-mode", f.malformed_mode, "Broken reply shape for the malformed mock")
      ->capture_default_str();
}

void add_dataset_flags(CLI::App& cmd, DatasetFlags& f, bool qrels_required) {
  cmd.add_option("--corpus", f.corpus, "Passages, one JSON object per line")->required()->check(CLI::ExistingFile);
  cmd.add_option("--queries", f.queries, "Queries, one JSON object per line")->required()->check(CLI::ExistingFile);
  cmd.add_option("--run", f.run, "Retrieval run (TREC format)")->required()->check(CLI::ExistingFile);
  auto* q = cmd.add_option("--qrels", f.qrels, "Relevance judgments (TREC format)")->check(CLI::ExistingFile);
  if (qrels_required) q->required();
}

void add_window_flags(CLI::App& cmd, WindowParams& w) {
  cmd.add_option("--topn", w.top_n, "Candidates reranked per query")->capture_default_str();
  cmd.add_option("--window", w.window, "Window size")->capture_default_str();
  cmd.add_option("--stride", w.stride, "Window stride")->capture_default_str();
}

BackendConfig load_backend_config(const BackendFlags& f) {
  BackendConfig config;
  if (f.config) {
    std::ifstream in(*f.config);
    if (!in) throw std::runtime_error("cannot open " + *f.config);
    const auto doc = nlohmann::json::parse(in);
    for (const auto& key : {"api_key", "apiKey", "key", "token"}) {
      if (doc.contains(key)) {
        throw std::runtime_error(fmt::format("{}: credentials are read from {} only, remove '{}'", *f.config,
                                             kApiKeyEnv, key));
      }
    }
    config.endpoint = doc.value("endpoint", config.endpoint);
    config.model = doc.value("model", config.model);
    config.temperature = doc.value("temperature", config.temperature);
    config.max_tokens = doc.value("max_tokens", config.max_tokens);
    config.timeout_seconds = doc.value("timeout_seconds", config.timeout_seconds);
    config.retries = doc.value("retries", config.retries);
    config.backoff_base_ms = doc.value("backoff_base_ms", config.backoff_base_ms);
    config.backoff_max_ms = doc.value("backoff_max_ms", config.backoff_max_ms);
    config.concurrency = doc.value("concurrency", config.concurrency);
  }
  if (f.model) config.model = *f.model;
  if (f.temperature) config.temperature = *f.temperature;
  if (f.max_tokens) config.max_tokens = *f.max_tokens;
  if (f.retries) config.retries = *f.retries;
  config.concurrency = std::max(config.concurrency, static_cast<int>(f.concurrency));
  if (f.backend.starts_with("http://") || f.backend.starts_with("https://")) config.endpoint = f.backend;
  config.validate();
  return config;
}

std::shared_ptr<ChatBackend> make_backend(const BackendFlags& f, const BackendConfig& config,
                                          const RelevanceJudgments* judgments) {
  const auto& b = f.backend;
  if (b == "identity") return std::make_shared<IdentityBackend>();
  if (b == "reverse") return std::make_shared<ReverseBackend>();
  if (b == "oracle") {
    if (!judgments) throw std::runtime_error("the oracle backend needs --qrels");
    return std::make_shared<OracleBackend>(*judgments);
  }
  if (b == "noisy") {
    std::optional<RelevanceJudgments> j;
    if (judgments) j = *judgments;
    return std::make_shared<NoisyBackend>(f.seed, f.swap_rate, std::move(j));
  }
  if (b == "malformed") {
    const auto mode = parse_malformed_mode(f.malformed_mode);
    if (!mode) throw std::runtime_error("unknown --malformed-mode " + f.malformed_mode);
    return std::make_shared<MalformedBackend>(*mode);
  }
  if (b.starts_with("http://") || b.starts_with("https://") || b == "http") {
    if (config.endpoint.empty()) throw std::runtime_error("no endpoint: pass a URL to --backend or set it in --config");
    if (config.model.empty()) throw std::runtime_error("remote endpoints need --model");
    return std::make_shared<HttpBackend>(config);
  }
  throw std::runtime_error("unknown --backend " + b);
}

void write_text(const std::optional<std::string>& path, const std::string& text) {
  if (!path || *path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(*path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + *path);
  out << text;
}

RunOptions make_run_options(const WindowParams& window, const BackendFlags& backend, bool strict,
                            const std::optional<std::string>& prompt, std::size_t max_chars) {
  RunOptions options;
  options.rerank.window = window;
  options.rerank.max_passage_chars = max_chars;
  if (prompt) options.rerank.prompt = PromptTemplate::from_file(*prompt);
  options.concurrency = backend.concurrency;
  options.strict = strict;
  return options;
}

DatasetBundle load_bundle(const DatasetFlags& f, std::size_t top_n) {
  DatasetPaths paths{f.corpus, f.queries, f.run, std::nullopt};
  if (f.qrels) paths.qrels = fs::path(*f.qrels);
  return load_dataset(paths, top_n);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Listwise reasoning reranker toolkit"};
  app.require_subcommand(1);

  // rerank
  DatasetFlags rr_data;
  BackendFlags rr_backend;
  WindowParams rr_window;
  bool rr_strict = false;
  std::optional<std::string> rr_prompt, rr_report, rr_trace;
  std::string rr_out, rr_tag = "rerank";
  std::size_t rr_max_chars = 0;
  auto* rerank_cmd = app.add_subcommand("rerank", "Rerank a retrieval run with a sliding window");
  add_dataset_flags(*rerank_cmd, rr_data, false);
  add_backend_flags(*rerank_cmd, rr_backend);
  add_window_flags(*rerank_cmd, rr_window);
  rerank_cmd->add_option("--out", rr_out, "Output run file")->required();
  rerank_cmd->add_option("--tag", rr_tag, "Run tag column")->capture_default_str();
  rerank_cmd->add_option("--prompt", rr_prompt, "Prompt template file with {query} and {passages}");
  rerank_cmd->add_option("--max-passage-chars", rr_max_chars, "Truncate passages in prompts (0 = off)");
  rerank_cmd->add_option("--report", rr_report, "Write key=value report lines here");
  rerank_cmd->add_option("--trace", rr_trace, "Write per-window raw responses as JSON lines");
  rerank_cmd->add_flag("--strict", rr_strict, "Abort on the first failed query");

  // eval
  std::string ev_run, ev_qrels;
  std::size_t ev_k = 10;
  std::optional<std::string> ev_report;
  auto* eval_cmd = app.add_subcommand("eval", "NDCG@k of a run against judgments");
  eval_cmd->add_option("--run", ev_run, "Run file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--qrels", ev_qrels, "Judgments")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--k", ev_k, "Cutoff")->check(CLI::PositiveNumber)->capture_default_str();
  eval_cmd->add_option("--report", ev_report, "Write key=value lines here ('-' for stdout)");

  // reward
  std::string rw_rollouts, rw_records;
  std::optional<std::string> rw_out;
  RewardParams rw_params;
  GrpoParams rw_grpo;
  auto* reward_cmd = app.add_subcommand("reward", "Score rollouts and compute group advantages");
  reward_cmd->add_option("--rollouts", rw_rollouts, "Rollouts, one JSON object per line")
      ->required()
      ->check(CLI::ExistingFile);
  reward_cmd->add_option("--records", rw_records, "Training records the rollouts answer")
      ->required()
      ->check(CLI::ExistingFile);
  reward_cmd->add_option("--out", rw_out, "Output JSON lines (default stdout)");
  reward_cmd->add_option("--phi", rw_params.phi, "Recall weight")->capture_default_str();
  reward_cmd->add_option("--gamma", rw_params.gamma, "RBO weight")->capture_default_str();
  reward_cmd->add_option("--rbo-p", rw_params.rbo_p, "RBO persistence")->capture_default_str();
  reward_cmd->add_option("--epsilon", rw_grpo.epsilon, "Clip width")->capture_default_str();
  reward_cmd->add_option("--beta", rw_grpo.beta, "KL weight")->capture_default_str();

  // filter
  std::string fl_records, fl_out;
  double fl_alpha = kDefaultConsistencyAlpha;
  std::optional<std::string> fl_report;
  auto* filter_cmd = app.add_subcommand("filter", "Drop records whose gold list disagrees with pointwise labels");
  filter_cmd->add_option("--records", fl_records, "Records file")->required()->check(CLI::ExistingFile);
  filter_cmd->add_option("--out", fl_out, "Kept records")->required();
  filter_cmd->add_option("--alpha", fl_alpha, "Minimum NDCG@10 consistency")->capture_default_str();
  filter_cmd->add_option("--report", fl_report, "Write key=value lines here");

  // synthesize
  std::string sy_inputs, sy_out;
  std::optional<std::string> sy_qrels;
  BackendFlags sy_backend;
  SynthesisConfig sy_config;
  auto* synth_cmd = app.add_subcommand("synthesize", "Build teacher-labelled training lists");
  synth_cmd->add_option("--inputs", sy_inputs, "Synthesis inputs, one JSON object per line")
      ->required()
      ->check(CLI::ExistingFile);
  synth_cmd->add_option("--out", sy_out, "Output records")->required();
  synth_cmd->add_option("--qrels", sy_qrels, "Judgments for the oracle/noisy teacher")->check(CLI::ExistingFile);
  synth_cmd->add_option("--pool-size", sy_config.pool_size, "Passages per selection call")->capture_default_str();
  synth_cmd->add_option("--list-cap", sy_config.list_cap, "Passages per training list")->capture_default_str();
  synth_cmd->add_option("--max-passage-chars", sy_config.max_passage_chars, "Split limit for documents");
  add_backend_flags(*synth_cmd, sy_backend);

  // plan-windows
  WindowParams pw_window;
  std::optional<std::size_t> pw_len;
  auto* plan_cmd = app.add_subcommand("plan-windows", "Print the window schedule");
  add_window_flags(*plan_cmd, pw_window);
  plan_cmd->add_option("--len", pw_len, "Candidate list length (default: --topn)");

  // latency
  DatasetFlags lt_data;
  BackendFlags lt_backend;
  WindowParams lt_window;
  std::size_t lt_repeats = 3;
  std::optional<std::string> lt_report;
  auto* latency_cmd = app.add_subcommand("latency", "Seconds per query over repeated reranks");
  add_dataset_flags(*latency_cmd, lt_data, false);
  add_backend_flags(*latency_cmd, lt_backend);
  add_window_flags(*latency_cmd, lt_window);
  latency_cmd->add_option("--repeats", lt_repeats, "Full passes over the queries")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  latency_cmd->add_option("--report", lt_report, "Write key=value lines here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*rerank_cmd) {
      const auto bundle = load_bundle(rr_data, rr_window.top_n);
      const auto config = load_backend_config(rr_backend);
      Gateway gateway(make_backend(rr_backend, config, rr_data.qrels ? &bundle.qrels : nullptr), config);
      const auto options = make_run_options(rr_window, rr_backend, rr_strict, rr_prompt, rr_max_chars);
      const auto result = run_rerank(bundle, gateway, options);
      std::ostringstream run_text;
      write_run(run_text, result.rankings, rr_tag);
      write_text(rr_out, run_text.str());
      if (rr_trace) {
        std::string lines;
        for (const auto& [qid, trace] : result.traces) {
          for (const auto& w : trace.windows) {
            nlohmann::ordered_json doc;
            doc["qid"] = qid;
            doc["begin"] = w.range.begin;
            doc["end"] = w.range.end;
            doc["format_status"] = std::string(to_string(w.format_status));
            doc["attempts"] = w.attempts;
            doc["raw"] = w.raw;
            lines += doc.dump() + "\n";
          }
        }
        write_text(rr_trace, lines);
      }
      std::cout << format_run_report(result.report);
      if (rr_report) write_text(rr_report, run_report_kv(result.report));
      return result.report.failed > 0 ? 3 : 0;
    }
    if (*eval_cmd) {
      const auto run = run_as_rankings(read_run(fs::path(ev_run)));
      const auto qrels = read_qrels(fs::path(ev_qrels));
      const auto report = evaluate_run(run, qrels, ev_k);
      std::cout << format_eval_table(report);
      if (ev_report) write_text(ev_report, eval_report_kv(report));
      return 0;
    }
    if (*reward_cmd) {
      const auto rollouts = read_rollouts(fs::path(rw_rollouts));
      const auto records = read_records(fs::path(rw_records));
      const auto report = compute_rewards(rollouts, records, rw_params, rw_grpo);
      std::string lines;
      for (const auto& row : report.rows) lines += reward_row_line(row) + "\n";
      for (const auto& group : report.groups) lines += group_summary_line(group) + "\n";
      write_text(rw_out, lines);
      if (report.errors > 0) std::cerr << report.errors << " record-level error(s), see \"error\" fields\n";
      return report.errors > 0 ? 3 : 0;
    }
    if (*filter_cmd) {
      auto records = read_records(fs::path(fl_records));
      const auto result = self_consistency_filter(std::move(records), fl_alpha);
      std::ostringstream kept;
      write_records(kept, result.kept);
      write_text(fl_out, kept.str());
      std::cout << format_filter_table(result.report);
      if (fl_report) write_text(fl_report, filter_report_kv(result.report));
      return 0;
    }
    if (*synth_cmd) {
      const auto inputs = read_synthesis_inputs(fs::path(sy_inputs));
      RelevanceJudgments judgments;
      if (sy_qrels) judgments = read_qrels(fs::path(*sy_qrels));
      const auto config = load_backend_config(sy_backend);
      Gateway gateway(make_backend(sy_backend, config, sy_qrels ? &judgments : nullptr), config);
      sy_config.seed = sy_backend.seed;
      sy_config.concurrency = sy_backend.concurrency;
      const auto outcome = synthesize(inputs, gateway, sy_config);
      std::ostringstream out;
      write_records(out, outcome.records);
      write_text(sy_out, out.str());
      for (const auto& w : outcome.warnings) std::cerr << "warning: " << w << '\n';
      for (const auto& s : outcome.skipped) std::cerr << "skipped " << s.qid << ": " << s.reason << '\n';
      std::cout << fmt::format("records={}\nskipped={}\nbackend_calls={}\n", outcome.records.size(),
                               outcome.skipped.size(), outcome.backend_calls);
      return 0;
    }
    if (*plan_cmd) {
      const auto plan = plan_windows(pw_window, pw_len.value_or(pw_window.top_n));
      for (std::size_t i = 0; i < plan.ranges.size(); ++i) {
        const auto& r = plan.ranges[i];
        std::cout << fmt::format("{:>3}  [{}, {})\n", i + 1, r.begin, r.end);
      }
      std::cout << fmt::format("windows={}\n", plan.ranges.size());
      return 0;
    }
    if (*latency_cmd) {
      const auto bundle = load_bundle(lt_data, lt_window.top_n);
      const auto config = load_backend_config(lt_backend);
      Gateway gateway(make_backend(lt_backend, config, lt_data.qrels ? &bundle.qrels : nullptr), config);
      const auto options = make_run_options(lt_window, lt_backend, false, std::nullopt, 0);
      const auto report = measure_latency(bundle, gateway, options, lt_repeats);
      std::cout << format_latency_table(report.summary);
      if (lt_report) write_text(lt_report, latency_kv(report.summary));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
