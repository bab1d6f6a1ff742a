#include "rerank/synthesis.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <unordered_set>

#include <fmt/format.h>

#include "rerank/metrics.hpp"
#include "rerank/parallel.hpp"
#include "rerank/random.hpp"

namespace rerank {
namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool is_blank(std::string_view line) { return trim(line).empty(); }

// Byte offset just past the first `n` code points (or size() when shorter).
std::size_t byte_offset_of(std::string_view s, std::size_t n) {
  std::size_t chars = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) {
      if (chars == n) return i;
      ++chars;
    }
  }
  return s.size();
}

void cut_long_piece(std::string_view piece, std::size_t max_chars, std::vector<std::string>& out) {
  while (!piece.empty()) {
    const auto limit = byte_offset_of(piece, max_chars);
    if (limit >= piece.size()) {
      out.emplace_back(piece);
      return;
    }
    std::size_t cut = 0;
    for (std::size_t i = limit; i > 0; --i) {
      const char c = piece[i - 1];
      const bool sentence_end = (c == '.' || c == '!' || c == '?') && i < piece.size() && is_space(piece[i]);
      if (c == '\n' || sentence_end) {
        cut = i;
        break;
      }
    }
    if (cut == 0) cut = limit;
    const auto head = trim(piece.substr(0, cut));
    if (!head.empty()) out.emplace_back(head);
    piece = trim(piece.substr(cut));
  }
}

std::string normalize_newlines(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\r') {
      out += '\n';
      if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
    } else {
      out += text[i];
    }
  }
  return out;
}

bool is_none_reply(std::string_view reply) {
  std::string s;
  for (char c : trim(reply)) {
    if (c != '"' && c != '\'' && c != '.') s += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return s == "none";
}

std::vector<std::string> texts_of(std::span<const Passage> passages) {
  std::vector<std::string> out;
  out.reserve(passages.size());
  for (const auto& p : passages) out.push_back(p.text);
  return out;
}

std::vector<std::string> ids_of(std::span<const Passage> passages) {
  std::vector<std::string> out;
  out.reserve(passages.size());
  for (const auto& p : passages) out.push_back(p.id);
  return out;
}

SelectionResult run_selection(RequestPurpose purpose, std::string_view tmpl, const Query& query,
                              std::string_view answer, std::span<const Passage> candidates, Gateway& gateway,
                              std::size_t pool_size) {
  if (pool_size == 0) throw std::invalid_argument("selection pool size must be >= 1");
  SelectionResult result;
  for (std::size_t begin = 0, batch = 0; begin < candidates.size(); begin += pool_size, ++batch) {
    const auto chunk = candidates.subspan(begin, std::min(pool_size, candidates.size() - begin));
    const auto texts = texts_of(chunk);

    ChatRequest request;
    request.request_id = fmt::format("{}/{}/{}", query.qid, to_string(purpose), batch);
    request.purpose = purpose;
    request.qid = query.qid;
    request.item_ids = ids_of(chunk);
    request.messages.push_back({"user", render_selection_prompt(tmpl, query.text, answer, texts)});

    const auto response = gateway.complete(request);
    ++result.calls;
    auto parsed = parse_selection(response.text, request.item_ids);
    result.ids.insert(result.ids.end(), parsed.ids.begin(), parsed.ids.end());
    for (auto& w : parsed.warnings) result.warnings.push_back(fmt::format("{}: {}", request.request_id, w));
  }
  return result;
}

}  // namespace

std::vector<std::string> split_document(std::string_view text, std::size_t max_chars) {
  const auto normalized = normalize_newlines(text);
  const std::string_view body(normalized);

  std::vector<std::string> pieces;
  std::size_t segment_begin = 0;
  std::size_t pos = 0;
  const auto flush = [&](std::size_t end) {
    const auto piece = trim(body.substr(segment_begin, end - segment_begin));
    if (piece.empty()) return;
    if (max_chars > 0) {
      cut_long_piece(piece, max_chars, pieces);
    } else {
      pieces.emplace_back(piece);
    }
  };
  while (pos <= body.size()) {
    const auto eol = body.find('\n', pos);
    const auto line_end = eol == std::string_view::npos ? body.size() : eol;
    if (is_blank(body.substr(pos, line_end - pos))) {
      flush(pos);
      segment_begin = line_end;
    }
    if (eol == std::string_view::npos) break;
    pos = eol + 1;
  }
  flush(body.size());
  return pieces;
}

SelectionResult parse_selection(std::string_view reply, std::span<const std::string> candidate_ids) {
  static const std::regex token(R"(\[\s*(\d{1,9})\s*\])");
  SelectionResult result;
  if (is_none_reply(reply)) return result;

  const std::string text(reply);
  std::vector<bool> picked(candidate_ids.size(), false);
  std::size_t tokens = 0;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), token); it != std::sregex_iterator(); ++it) {
    ++tokens;
    const auto k = std::stoul((*it)[1].str());
    if (k < 1 || k > candidate_ids.size()) {
      result.warnings.push_back(fmt::format("selection index [{}] outside 1..{} dropped", k, candidate_ids.size()));
      continue;
    }
    picked[k - 1] = true;
  }
  if (tokens == 0) {
    result.warnings.push_back(fmt::format("unparseable selection reply: {:.80}", trim(reply)));
    return result;
  }
  for (std::size_t i = 0; i < candidate_ids.size(); ++i) {
    if (picked[i]) result.ids.push_back(candidate_ids[i]);
  }
  return result;
}

SelectionResult select_positives(const Query& query, std::string_view gold_answer, Domain domain,
                                 std::span<const Passage> candidates, Gateway& gateway, std::size_t pool_size) {
  return run_selection(RequestPurpose::SelectPositives, positives_template(domain), query, gold_answer, candidates,
                       gateway, pool_size);
}

SelectionResult select_hard_negatives(const Query& query, std::string_view gold_answer,
                                      std::span<const Passage> candidates, std::span<const std::string> exclude,
                                      Gateway& gateway, std::size_t pool_size) {
  auto result = run_selection(RequestPurpose::SelectHardNegatives, hard_negatives_template(), query, gold_answer,
                              candidates, gateway, pool_size);
  const std::unordered_set<std::string_view> excluded(exclude.begin(), exclude.end());
  std::vector<std::string> kept;
  for (auto& id : result.ids) {
    if (excluded.contains(id)) {
      result.warnings.push_back(fmt::format("{}: hard negative {} is already a positive; dropped", query.qid, id));
    } else {
      kept.push_back(std::move(id));
    }
  }
  result.ids = std::move(kept);
  return result;
}

TrainingList assemble_training_list(std::span<const Passage> positives, std::span<const Passage> hard_negatives,
                                    std::span<const Passage> negatives, std::size_t cap, std::uint64_t seed) {
  if (cap == 0) throw std::invalid_argument("training list cap must be >= 1");
  {
    std::unordered_set<std::string_view> ids;
    for (auto set : {positives, hard_negatives, negatives}) {
      for (const auto& p : set) {
        if (!ids.insert(p.id).second) throw std::invalid_argument("passage " + p.id + " appears in two pools");
      }
    }
  }

  TrainingList out;
  if (positives.empty()) {
    out.usable = false;
    out.warnings.emplace_back("no positives; list cannot be scored");
    return out;
  }
  if (positives.size() > cap) {
    out.warnings.push_back(fmt::format("{} positives truncated to {}", positives.size(), cap));
  }
  for (const auto& p : positives.first(std::min(cap, positives.size()))) {
    out.passages.push_back(p);
    out.labels[p.id] = 1;
  }
  for (const auto& p : hard_negatives) {
    if (out.passages.size() == cap) break;
    out.passages.push_back(p);
    out.labels[p.id] = 0;
  }

  Rng rng(seed);
  std::vector<std::size_t> order(negatives.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = 0; i < order.size() && out.passages.size() < cap; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_below(rng, order.size() - i));
    std::swap(order[i], order[j]);
    const auto& p = negatives[order[i]];
    out.passages.push_back(p);
    out.labels[p.id] = 0;
  }
  seeded_shuffle(std::span<Passage>(out.passages), rng);
  return out;
}

LabelResult generate_listwise_label(const Query& query, std::span<const Passage> training_list, Gateway& gateway) {
  LabelResult result;
  if (training_list.empty()) {
    result.skip_reason = "empty training list";
    return result;
  }
  const auto texts = texts_of(training_list);
  ChatRequest request;
  request.request_id = fmt::format("{}/listwise-label", query.qid);
  request.purpose = RequestPurpose::ListwiseLabel;
  request.qid = query.qid;
  request.item_ids = ids_of(training_list);
  request.messages = listwise_label_messages(query.text, texts);

  ChatResponse response;
  try {
    response = gateway.complete(request);
  } catch (const BackendError& e) {
    result.skip_reason = fmt::format("teacher call failed: {}", e.what());
    return result;
  }
  if (trim(response.text).empty()) {
    result.skip_reason = "teacher returned an empty response";
    return result;
  }
  const auto parsed = parse_response(response.text, training_list.size());
  auto ranked = parse_ranking(ranking_text(parsed), request.item_ids);
  result.repair = ranked.report;
  if (ranked.report.full_repair) {
    result.skip_reason = "teacher response contains no ranking";
    return result;
  }
  ListwiseLabel label;
  if (response.reasoning) {
    label.think = *response.reasoning;
  } else if (parsed.think) {
    label.think = *parsed.think;
  }
  label.gold = std::move(ranked.ranking);
  result.label = std::move(label);
  return result;
}

double consistency_score(const SynthesisRecord& record) {
  return ndcg_at_k(record.label.gold, record.pointwise, kConsistencyCutoff);
}

std::size_t FilterReport::kept() const {
  std::size_t n = 0;
  for (const auto& [_, c] : per_domain) n += c.kept;
  return n;
}

std::size_t FilterReport::dropped() const {
  std::size_t n = 0;
  for (const auto& [_, c] : per_domain) n += c.dropped;
  return n;
}

FilterResult self_consistency_filter(std::vector<SynthesisRecord> records, double alpha) {
  FilterResult result;
  result.report.alpha = alpha;
  for (auto& record : records) {
    record.consistency = consistency_score(record);
    auto& counts = result.report.per_domain[std::string(to_string(record.domain))];
    if (record.consistency >= alpha) {
      ++counts.kept;
      result.kept.push_back(std::move(record));
    } else {
      ++counts.dropped;
    }
  }
  return result;
}

std::vector<Passage> split_documents(std::span<const Passage> documents, std::size_t max_chars) {
  std::vector<Passage> out;
  for (const auto& doc : documents) {
    const auto pieces = split_document(doc.text, max_chars);
    for (std::size_t i = 0; i < pieces.size(); ++i) {
      out.push_back({fmt::format("{}#{}", doc.id, i + 1), pieces[i], doc.source});
    }
  }
  return out;
}

namespace {

struct Slot {
  std::optional<SynthesisRecord> record;
  std::string skip_reason;
  std::vector<std::string> warnings;
  std::size_t calls = 0;
};

Slot synthesize_one(const SynthesisInput& input, Gateway& gateway, const SynthesisConfig& config) {
  Slot slot;
  auto pool = input.candidates;
  for (auto& p : split_documents(input.documents, config.max_passage_chars)) pool.push_back(std::move(p));
  auto hard_pool = input.hard_candidates;
  for (auto& p : split_documents(input.hard_documents, config.max_passage_chars)) hard_pool.push_back(std::move(p));
  {
    std::vector<std::string> all = ids_of(pool);
    for (const auto& p : hard_pool) all.push_back(p.id);
    if (has_duplicates(all)) {
      slot.skip_reason = "duplicate passage ids across candidate pools";
      return slot;
    }
  }

  std::vector<Passage> positives, hard, negatives;
  if (input.labels) {
    for (const auto& p : pool) (grade_of(*input.labels, p.id) > 0 ? positives : negatives).push_back(p);
  } else if (input.domain == Domain::WebSearch) {
    slot.skip_reason = "web-search inputs need pre-annotated labels";
    return slot;
  } else {
    auto pos = select_positives(input.query, input.answer, input.domain, pool, gateway, config.pool_size);
    slot.calls += pos.calls;
    slot.warnings.insert(slot.warnings.end(), pos.warnings.begin(), pos.warnings.end());
    const std::unordered_set<std::string> chosen(pos.ids.begin(), pos.ids.end());
    for (const auto& p : pool) (chosen.contains(p.id) ? positives : negatives).push_back(p);

    if (!hard_pool.empty()) {
      auto neg = select_hard_negatives(input.query, input.answer, hard_pool, pos.ids, gateway, config.pool_size);
      slot.calls += neg.calls;
      slot.warnings.insert(slot.warnings.end(), neg.warnings.begin(), neg.warnings.end());
      const std::unordered_set<std::string> hard_ids(neg.ids.begin(), neg.ids.end());
      for (const auto& p : hard_pool) {
        if (hard_ids.contains(p.id)) hard.push_back(p);
      }
    }
  }

  auto list = assemble_training_list(positives, hard, negatives, config.list_cap,
                                     stable_hash(input.query.qid, config.seed));
  for (auto& w : list.warnings) slot.warnings.push_back(input.query.qid + ": " + w);
  if (!list.usable) {
    slot.skip_reason = "no positives";
    return slot;
  }

  auto label = generate_listwise_label(input.query, list.passages, gateway);
  ++slot.calls;
  if (!label.label) {
    slot.skip_reason = label.skip_reason;
    return slot;
  }
  if (!label.repair.clean()) {
    slot.warnings.push_back(fmt::format("{}: teacher ranking repaired (out_of_range={} duplicates={} appended={})",
                                        input.query.qid, label.repair.out_of_range, label.repair.duplicates,
                                        label.repair.appended));
  }

  SynthesisRecord record;
  record.query = input.query;
  record.domain = input.domain;
  record.passages = std::move(list.passages);
  record.pointwise = std::move(list.labels);
  record.label = std::move(*label.label);
  record.consistency = consistency_score(record);
  slot.record = std::move(record);
  return slot;
}

}  // namespace

SynthesisOutcome synthesize(std::span<const SynthesisInput> inputs, Gateway& gateway,
                            const SynthesisConfig& config) {
  std::vector<Slot> slots(inputs.size());
  parallel_for(inputs.size(), config.concurrency, [&](std::size_t i) {
    try {
      slots[i] = synthesize_one(inputs[i], gateway, config);
    } catch (const std::exception& e) {
      slots[i] = Slot{};
      slots[i].skip_reason = e.what();
    }
  });

  SynthesisOutcome outcome;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    auto& slot = slots[i];
    outcome.backend_calls += slot.calls;
    for (auto& w : slot.warnings) outcome.warnings.push_back(std::move(w));
    if (slot.record) {
      outcome.records.push_back(std::move(*slot.record));
    } else {
      outcome.skipped.push_back({inputs[i].query.qid, slot.skip_reason});
    }
  }
  return outcome;
}

}  // namespace rerank
