#include "rerank/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

namespace rerank {
namespace {

using json = nlohmann::json;

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(path.string(), 0, "cannot open file");
  return in;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string tok; ss >> tok;) out.push_back(std::move(tok));
  return out;
}

template <class T>
std::optional<T> parse_number(const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

// from_chars for double is missing from older libstdc++; strtod is locale-bound but
// fine for the "C" locale the tools run in.
std::optional<double> parse_double(const std::string& text) {
  if (text.empty()) return std::nullopt;
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size()) return std::nullopt;
  return value;
}

template <class Fn>
void for_each_json_line(std::istream& in, const std::string& name, Fn&& fn) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto doc = json::parse(line);
      if (!doc.is_object()) throw LoadError(name, number, "expected a JSON object");
      fn(doc, number);
    } catch (const json::exception& e) {
      throw LoadError(name, number, e.what());
    }
  }
}

}  // namespace

Corpus read_corpus(std::istream& in, const std::string& name) {
  Corpus corpus;
  for_each_json_line(in, name, [&](const json& doc, std::size_t line) {
    Passage p;
    p.id = doc.at("id").get<std::string>();
    p.text = doc.at("text").get<std::string>();
    p.source = doc.value("source", std::string{});
    if (p.id.empty()) throw LoadError(name, line, "empty passage id");
    const auto id = p.id;
    if (!corpus.emplace(id, std::move(p)).second) throw LoadError(name, line, "duplicate passage id " + id);
  });
  return corpus;
}

std::map<std::string, Query> read_queries(std::istream& in, const std::string& name) {
  std::map<std::string, Query> queries;
  for_each_json_line(in, name, [&](const json& doc, std::size_t line) {
    Query q;
    q.qid = doc.at("qid").get<std::string>();
    q.text = doc.at("text").get<std::string>();
    if (const auto it = doc.find("rewritten"); it != doc.end() && !it->is_null()) q.rewritten = it->get<std::string>();
    if (q.qid.empty() || q.text.empty()) throw LoadError(name, line, "qid and text must be non-empty");
    const auto qid = q.qid;
    if (!queries.emplace(qid, std::move(q)).second) throw LoadError(name, line, "duplicate qid " + qid);
  });
  return queries;
}

std::map<std::string, CandidateList> read_run(std::istream& in, const std::string& name, std::size_t top_n,
                                              const Corpus* corpus) {
  struct Row {
    std::string docid;
    long rank;
    double score;
    std::size_t line;
  };
  std::map<std::string, std::vector<Row>> rows;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto cols = split_ws(line);
    if (cols.empty()) continue;
    if (cols.size() != 6) throw LoadError(name, number, fmt::format("expected 6 columns, found {}", cols.size()));
    if (cols[1] != "Q0") throw LoadError(name, number, "second column must be Q0");
    const auto rank = parse_number<long>(cols[3]);
    const auto score = parse_double(cols[4]);
    if (!rank || *rank < 1) throw LoadError(name, number, "rank must be a positive integer");
    if (!score) throw LoadError(name, number, "score must be a number");
    if (corpus && !corpus->contains(cols[2])) throw LoadError(name, number, "unknown docid " + cols[2]);
    rows[cols[0]].push_back({cols[2], *rank, *score, number});
  }

  std::map<std::string, CandidateList> run;
  for (auto& [qid, entries] : rows) {
    std::stable_sort(entries.begin(), entries.end(), [](const Row& a, const Row& b) { return a.rank < b.rank; });
    std::unordered_set<std::string> docs;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (i > 0 && entries[i].rank == entries[i - 1].rank) {
        throw LoadError(name, entries[i].line, fmt::format("duplicate rank {} for {}", entries[i].rank, qid));
      }
      if (i > 0 && entries[i].score > entries[i - 1].score) {
        throw LoadError(name, entries[i].line, "score increases with rank for " + qid);
      }
      if (!docs.insert(entries[i].docid).second) {
        throw LoadError(name, entries[i].line, "duplicate docid " + entries[i].docid + " for " + qid);
      }
    }
    CandidateList list;
    list.qid = qid;
    for (const auto& e : entries) {
      if (top_n > 0 && list.entries.size() == top_n) break;
      list.entries.push_back({e.docid, e.score});
    }
    run.emplace(qid, std::move(list));
  }
  return run;
}

RelevanceJudgments read_qrels(std::istream& in, const std::string& name) {
  RelevanceJudgments qrels;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto cols = split_ws(line);
    if (cols.empty()) continue;
    if (cols.size() != 4) throw LoadError(name, number, fmt::format("expected 4 columns, found {}", cols.size()));
    const auto grade = parse_number<int>(cols[3]);
    if (!grade) throw LoadError(name, number, "grade must be an integer");
    qrels[cols[0]][cols[2]] = std::max(0, *grade);
  }
  return qrels;
}

std::map<std::string, CandidateList> read_run(const std::filesystem::path& path, std::size_t top_n) {
  auto in = open_or_throw(path);
  return read_run(in, path.string(), top_n);
}

RelevanceJudgments read_qrels(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return read_qrels(in, path.string());
}

DatasetBundle load_dataset(const DatasetPaths& paths, std::size_t top_n) {
  DatasetBundle bundle;
  {
    auto in = open_or_throw(paths.corpus);
    bundle.corpus = read_corpus(in, paths.corpus.string());
  }
  {
    auto in = open_or_throw(paths.queries);
    bundle.queries = read_queries(in, paths.queries.string());
  }
  {
    auto in = open_or_throw(paths.run);
    bundle.run = read_run(in, paths.run.string(), top_n, &bundle.corpus);
  }
  for (const auto& [qid, _] : bundle.run) {
    if (!bundle.queries.contains(qid)) throw LoadError(paths.run.string(), 0, "run references unknown qid " + qid);
  }
  if (paths.qrels) {
    bundle.qrels = read_qrels(*paths.qrels);
    for (const auto& [qid, _] : bundle.qrels) {
      if (!bundle.queries.contains(qid)) {
        throw LoadError(paths.qrels->string(), 0, "qrels reference unknown qid " + qid);
      }
    }
  }
  return bundle;
}

void write_run(std::ostream& out, const std::map<std::string, RankedList>& rankings, const std::string& tag) {
  for (const auto& [qid, ids] : rankings) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto rank = i + 1;
      out << fmt::format("{} Q0 {} {} {} {}\n", qid, ids[i], rank, 1.0 / static_cast<double>(rank), tag);
    }
  }
}

std::map<std::string, RankedList> run_as_rankings(const std::map<std::string, CandidateList>& run) {
  std::map<std::string, RankedList> out;
  for (const auto& [qid, list] : run) out.emplace(qid, list.ids());
  return out;
}

}  // namespace rerank
