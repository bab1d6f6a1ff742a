#include "rerank/records.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

namespace rerank {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

template <class Fn>
void for_each_json_line(std::istream& in, const std::string& name, Fn&& fn) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      throw LoadError(name, number, std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw LoadError(name, number, "expected a JSON object");
    try {
      fn(doc, number);
    } catch (const json::exception& e) {
      throw LoadError(name, number, e.what());
    } catch (const std::invalid_argument& e) {
      throw LoadError(name, number, e.what());
    }
  }
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(path.string(), 0, "cannot open file");
  return in;
}

std::vector<Passage> read_passages(const json& doc, const char* key) {
  std::vector<Passage> out;
  const auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) return out;
  if (!it->is_array()) throw std::invalid_argument(std::string(key) + " must be an array");
  for (const auto& p : *it) {
    Passage passage;
    passage.id = p.at("id").get<std::string>();
    passage.text = p.at("text").get<std::string>();
    passage.source = p.value("source", std::string{});
    if (passage.id.empty()) throw std::invalid_argument(std::string(key) + ": empty passage id");
    out.push_back(std::move(passage));
  }
  return out;
}

Grades read_grades(const json& obj) {
  Grades out;
  for (const auto& [id, g] : obj.items()) {
    const int grade = g.get<int>();
    if (grade < 0) throw std::invalid_argument("negative grade for " + id);
    out[id] = grade;
  }
  return out;
}

Domain read_domain(const json& doc) {
  const auto text = doc.at("domain").get<std::string>();
  const auto domain = parse_domain(text);
  if (!domain) throw std::invalid_argument("unknown domain '" + text + "'");
  return *domain;
}

Query read_query(const json& doc) {
  Query q;
  q.qid = doc.at("qid").get<std::string>();
  q.text = doc.at("query").get<std::string>();
  if (q.qid.empty() || q.text.empty()) throw std::invalid_argument("qid and query must be non-empty");
  return q;
}

std::optional<TokenLogProbs> read_logprobs(const json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) return std::nullopt;
  return it->get<TokenLogProbs>();
}

}  // namespace

std::vector<SynthesisInput> read_synthesis_inputs(std::istream& in, const std::string& name) {
  std::vector<SynthesisInput> out;
  for_each_json_line(in, name, [&](const json& doc, std::size_t) {
    SynthesisInput input;
    input.query = read_query(doc);
    input.answer = doc.value("answer", std::string{});
    input.domain = read_domain(doc);
    input.candidates = read_passages(doc, "candidates");
    input.documents = read_passages(doc, "documents");
    input.hard_candidates = read_passages(doc, "hard_candidates");
    input.hard_documents = read_passages(doc, "hard_documents");
    if (const auto it = doc.find("labels"); it != doc.end() && !it->is_null()) input.labels = read_grades(*it);
    out.push_back(std::move(input));
  });
  return out;
}

std::vector<SynthesisInput> read_synthesis_inputs(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return read_synthesis_inputs(in, path.string());
}

std::string record_to_line(const SynthesisRecord& record) {
  ordered_json doc;
  doc["qid"] = record.query.qid;
  doc["query"] = record.query.text;
  doc["domain"] = std::string(to_string(record.domain));
  auto passages = ordered_json::array();
  auto pointwise = ordered_json::object();
  for (const auto& p : record.passages) {
    ordered_json entry;
    entry["id"] = p.id;
    entry["text"] = p.text;
    entry["source"] = p.source;
    passages.push_back(std::move(entry));
    pointwise[p.id] = grade_of(record.pointwise, p.id);
  }
  doc["passages"] = std::move(passages);
  doc["pointwise"] = std::move(pointwise);
  doc["think"] = record.label.think;
  doc["gold"] = record.label.gold;
  doc["consistency"] = record.consistency;
  return doc.dump();
}

void write_records(std::ostream& out, std::span<const SynthesisRecord> records) {
  for (const auto& r : records) out << record_to_line(r) << '\n';
}

std::vector<SynthesisRecord> read_records(std::istream& in, const std::string& name) {
  std::vector<SynthesisRecord> out;
  for_each_json_line(in, name, [&](const json& doc, std::size_t) {
    SynthesisRecord record;
    record.query = read_query(doc);
    record.domain = read_domain(doc);
    record.passages = read_passages(doc, "passages");
    record.pointwise = read_grades(doc.at("pointwise"));
    record.label.think = doc.value("think", std::string{});
    record.label.gold = doc.at("gold").get<RankedList>();
    record.consistency = doc.value("consistency", 0.0);

    std::vector<std::string> ids;
    for (const auto& p : record.passages) ids.push_back(p.id);
    if (ids.size() > kTrainingListCap) throw std::invalid_argument("more than 20 passages in a training list");
    if (!is_permutation_of(ids, record.label.gold)) {
      throw std::invalid_argument("gold list is not a permutation of the record's passages");
    }
    for (const auto& [id, g] : record.pointwise) {
      if (std::find(ids.begin(), ids.end(), id) == ids.end()) {
        throw std::invalid_argument("pointwise label for unknown passage " + id);
      }
    }
    out.push_back(std::move(record));
  });
  return out;
}

std::vector<SynthesisRecord> read_records(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return read_records(in, path.string());
}

std::vector<RolloutRecord> read_rollouts(std::istream& in, const std::string& name) {
  std::vector<RolloutRecord> out;
  for_each_json_line(in, name, [&](const json& doc, std::size_t line) {
    RolloutRecord r;
    r.group = doc.at("group").get<std::string>();
    r.qid = doc.at("qid").get<std::string>();
    r.response = doc.value("response", std::string{});
    if (const auto it = doc.find("reward"); it != doc.end() && !it->is_null()) r.reward = it->get<double>();
    if (!r.reward && !doc.contains("response")) throw std::invalid_argument("rollout needs a response or a reward");
    r.policy = read_logprobs(doc, "policy_logprobs").value_or(TokenLogProbs{});
    r.reference = read_logprobs(doc, "ref_logprobs").value_or(TokenLogProbs{});
    r.old_policy = read_logprobs(doc, "old_logprobs");
    r.line = line;
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<RolloutRecord> read_rollouts(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return read_rollouts(in, path.string());
}

}  // namespace rerank
