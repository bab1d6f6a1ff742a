#pragma once

// Independent reference implementations and fixture builders shared by the unit
// and acceptance tests. Nothing here calls into the metric code under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rerank/dataset.hpp"
#include "rerank/training.hpp"
#include "rerank/types.hpp"

namespace oracle {

inline int grade(const rerank::Grades& g, const std::string& id) {
  auto it = g.find(id);
  return it == g.end() ? 0 : it->second;
}

inline double dcg(const std::vector<int>& grades_in_order, std::size_t k) {
  double s = 0.0;
  for (std::size_t i = 0; i < grades_in_order.size() && i < k; ++i) {
    s += (std::pow(2.0, grades_in_order[i]) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
  }
  return s;
}

inline double ndcg(const rerank::RankedList& ranked, const rerank::Grades& g, std::size_t k) {
  std::vector<int> got;
  for (const auto& id : ranked) got.push_back(grade(g, id));
  std::vector<int> ideal;
  for (const auto& [id, v] : g) ideal.push_back(v);
  std::sort(ideal.rbegin(), ideal.rend());
  const double idcg = dcg(ideal, k);
  return idcg == 0.0 ? 0.0 : dcg(got, k) / idcg;
}

inline double recall(const rerank::RankedList& ranked, const rerank::Grades& g, std::size_t k) {
  std::set<std::string> relevant;
  for (const auto& [id, v] : g)
    if (v > 0) relevant.insert(id);
  if (relevant.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) hit += relevant.count(ranked[i]);
  return static_cast<double>(hit) / static_cast<double>(relevant.size());
}

// Recounts the prefix intersection from scratch at every depth.
inline double rbo(const rerank::RankedList& a, const rerank::RankedList& b, double p) {
  double s = 0.0;
  for (std::size_t d = 1; d <= a.size(); ++d) {
    std::set<std::string> sa(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(d));
    std::size_t overlap = 0;
    for (std::size_t j = 0; j < d; ++j) overlap += sa.count(b[j]);
    s += std::pow(p, static_cast<double>(d - 1)) * static_cast<double>(overlap) / static_cast<double>(d);
  }
  return (1.0 - p) * s;
}

// d loss / d policy[i][t] where the unclipped arm is active.
inline double grpo_unclipped_grad(const rerank::RolloutGroup& group, const rerank::GrpoParams& params,
                                  std::size_t i, std::size_t t) {
  const auto& r = group.rollouts[i];
  const auto& base = r.ratio_base ? *r.ratio_base : r.reference;
  const double G = static_cast<double>(group.rollouts.size());
  const double len = static_cast<double>(r.policy.size());
  const double ratio = std::exp(r.policy[t] - base[t]);
  const double d_surrogate = ratio * *r.advantage / (G * len);
  const double d_kl = (1.0 - std::exp(r.reference[t] - r.policy[t])) / (G * len);
  return -d_surrogate + params.beta * d_kl;
}

}  // namespace oracle

namespace fixture {

struct BundleSpec {
  std::size_t queries = 50;
  std::size_t candidates = 100;
  std::size_t max_relevant = 3;  // at most this many positives per query, anywhere in the list
  bool graded = false;
  std::uint64_t seed = 7;
};

inline std::string qid_of(std::size_t q) {
  std::ostringstream s;
  s << "q" << (q < 10 ? "0" : "") << q;
  return s.str();
}

// Synthetic corpus/run/qrels with relevant passages scattered through each list.
inline rerank::DatasetBundle make_bundle(const BundleSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  rerank::DatasetBundle b;
  for (std::size_t q = 0; q < spec.queries; ++q) {
    const auto qid = qid_of(q);
    b.queries[qid] = {qid, "synthetic question number " + std::to_string(q), std::nullopt};
    rerank::CandidateList list;
    list.qid = qid;
    for (std::size_t i = 0; i < spec.candidates; ++i) {
      const auto id = qid + "-d" + std::to_string(i);
      b.corpus[id] = {id, "text of passage " + std::to_string(i) + " for " + qid, "synthetic"};
      list.entries.push_back({id, 1000.0 - static_cast<double>(i)});
    }
    const std::size_t n_rel = 1 + rng() % spec.max_relevant;
    std::set<std::size_t> picked;
    while (picked.size() < n_rel) picked.insert(rng() % spec.candidates);
    auto& grades = b.qrels[qid];
    for (auto pos : picked) grades[list.entries[pos].id] = spec.graded ? 1 + static_cast<int>(rng() % 3) : 1;
    // one judged non-relevant passage
    grades[list.entries[rng() % spec.candidates].id] += 0;
    b.run[qid] = std::move(list);
  }
  return b;
}

inline void write_bundle(const rerank::DatasetBundle& b, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream corpus(dir / "corpus.jsonl"), queries(dir / "queries.jsonl"), run(dir / "run.trec"),
      qrels(dir / "qrels.txt");
  std::vector<std::string> ids;
  for (const auto& [id, _] : b.corpus) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  for (const auto& id : ids) corpus << R"({"id":")" << id << R"(","text":")" << b.corpus.at(id).text << "\"}\n";
  for (const auto& [qid, q] : b.queries) queries << R"({"qid":")" << qid << R"(","text":")" << q.text << "\"}\n";
  for (const auto& [qid, list] : b.run) {
    for (std::size_t i = 0; i < list.entries.size(); ++i) {
      run << qid << " Q0 " << list.entries[i].id << ' ' << i + 1 << ' ' << list.entries[i].score << " bm25\n";
    }
  }
  for (const auto& [qid, grades] : b.qrels) {
    std::vector<std::pair<std::string, int>> rows(grades.begin(), grades.end());
    std::sort(rows.begin(), rows.end());
    for (const auto& [id, g] : rows) qrels << qid << " 0 " << id << ' ' << g << '\n';
  }
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline std::filesystem::path fixtures_dir() { return FIXTURES_DIR; }

}  // namespace fixture
