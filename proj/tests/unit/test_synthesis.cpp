#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "rerank/mock_backend.hpp"
#include "rerank/synthesis.hpp"
#include "support.hpp"

using namespace rerank;

namespace {

std::vector<Passage> passages(const std::string& prefix, std::size_t n) {
  std::vector<Passage> out;
  for (std::size_t i = 1; i <= n; ++i) out.push_back({prefix + std::to_string(i), "passage " + prefix + std::to_string(i), ""});
  return out;
}

std::vector<std::string> ids(std::span<const Passage> ps) {
  std::vector<std::string> out;
  for (const auto& p : ps) out.push_back(p.id);
  return out;
}

Gateway gateway_for(std::shared_ptr<ChatBackend> backend, int concurrency = 4) {
  BackendConfig c;
  c.concurrency = concurrency;
  return Gateway(std::move(backend), c, [](std::chrono::milliseconds) {});
}

// 20-passage record whose gold order is p1..p20; `positive_ranks` are 1-based gold ranks.
SynthesisRecord record_with(const std::string& qid, Domain domain, const std::set<std::size_t>& positive_ranks) {
  SynthesisRecord r;
  r.query = {qid, "question " + qid, std::nullopt};
  r.domain = domain;
  r.passages = passages(qid + "-p", 20);
  for (std::size_t i = 1; i <= 20; ++i) {
    const auto id = qid + "-p" + std::to_string(i);
    r.label.gold.push_back(id);
    r.pointwise[id] = positive_ranks.contains(i) ? 1 : 0;
  }
  r.label.think = "reasoning";
  return r;
}

}  // namespace

TEST_CASE("split_document on blank lines") {
  CHECK(split_document("a\n\nb") == std::vector<std::string>{"a", "b"});
  CHECK(split_document("  one\ntwo  \n \n\n\tthree\n") == std::vector<std::string>{"one\ntwo", "three"});
  CHECK(split_document("x\r\n\r\ny") == std::vector<std::string>{"x", "y"});
  CHECK(split_document("").empty());
  CHECK(split_document("\n \n\t\n").empty());
}

TEST_CASE("split_document respects a character limit") {
  const auto pieces = split_document("First sentence here. Second one follows. Third.", 25);
  REQUIRE(pieces.size() == 3);
  CHECK(pieces[0] == "First sentence here.");
  CHECK(pieces[1] == "Second one follows.");
  CHECK(pieces[2] == "Third.");

  const auto hard = split_document("abcdefghij", 4);
  CHECK(hard == std::vector<std::string>{"abcd", "efgh", "ij"});

  // code points, not bytes
  const auto utf = split_document("\xc3\xa9\xc3\xa9\xc3\xa9", 2);
  CHECK(utf == std::vector<std::string>{"\xc3\xa9\xc3\xa9", "\xc3\xa9"});
}

TEST_CASE("split_documents numbers pieces per document") {
  const std::vector<Passage> docs{{"doc", "alpha\n\nbeta", "wiki"}, {"empty", "  ", "wiki"}};
  const auto out = split_documents(docs, 0);
  REQUIRE(out.size() == 2);
  CHECK(out[0].id == "doc#1");
  CHECK(out[1].id == "doc#2");
  CHECK(out[1].text == "beta");
  CHECK(out[1].source == "wiki");
}

TEST_CASE("parse_selection") {
  const std::vector<std::string> cand{"a", "b", "c", "d"};
  CHECK(parse_selection("[2] [4]", cand).ids == std::vector<std::string>{"b", "d"});
  CHECK(parse_selection("[4], [ 2 ], [4]", cand).ids == std::vector<std::string>{"b", "d"});
  for (const auto* none : {"None", "none.", "\"NONE\"", "  None  "}) {
    const auto r = parse_selection(none, cand);
    CHECK(r.ids.empty());
    CHECK(r.warnings.empty());
  }
  const auto out = parse_selection("[0] [3] [9]", cand);
  CHECK(out.ids == std::vector<std::string>{"c"});
  CHECK(out.warnings.size() == 2);
  const auto junk = parse_selection("I am not sure", cand);
  CHECK(junk.ids.empty());
  REQUIRE(junk.warnings.size() == 1);
  CHECK(junk.warnings[0].find("unparseable") != std::string::npos);
}

TEST_CASE("selection batches large pools") {
  RelevanceJudgments j;
  j["q"]["c3"] = 1;
  j["q"]["c45"] = 2;
  j["q"]["c90"] = 1;
  auto g = gateway_for(std::make_shared<OracleBackend>(j));
  const Query q{"q", "question", std::nullopt};
  const auto cands = passages("c", 95);

  const auto pos = select_positives(q, "answer", Domain::ComplexQa, cands, g);
  CHECK(pos.calls == 3);
  CHECK(pos.ids == std::vector<std::string>{"c3", "c45", "c90"});

  const auto small = select_positives(q, "answer", Domain::ComplexQa, cands, g, 10);
  CHECK(small.calls == 10);
  CHECK(small.ids == pos.ids);
  CHECK_THROWS_AS((void)select_positives(q, "a", Domain::Coding, cands, g, 0), std::invalid_argument);
}

TEST_CASE("hard negatives exclude chosen positives") {
  RelevanceJudgments j;
  j["q"]["h1"] = 0;
  j["q"]["h2"] = 0;
  auto g = gateway_for(std::make_shared<OracleBackend>(j));
  const Query q{"q", "question", std::nullopt};
  const auto hard = passages("h", 5);
  const std::vector<std::string> exclude{"h2"};
  const auto res = select_hard_negatives(q, "answer", hard, exclude, g);
  CHECK(res.ids == std::vector<std::string>{"h1"});
  REQUIRE(res.warnings.size() == 1);
  CHECK(res.warnings[0].find("h2") != std::string::npos);
}

TEST_CASE("assemble_training_list composition") {
  const auto pos = passages("pos", 3);
  const auto hard = passages("hard", 5);
  const auto neg = passages("neg", 30);
  const auto list = assemble_training_list(pos, hard, neg, 20, 11);
  REQUIRE(list.usable);
  CHECK(list.passages.size() == 20);
  CHECK(list.labels.size() == 20);
  std::size_t n_pos = 0, n_hard = 0, n_neg = 0;
  for (const auto& p : list.passages) {
    if (p.id.starts_with("pos")) ++n_pos;
    if (p.id.starts_with("hard")) ++n_hard;
    if (p.id.starts_with("neg")) ++n_neg;
    CHECK(list.labels.at(p.id) == (p.id.starts_with("pos") ? 1 : 0));
  }
  CHECK(n_pos == 3);
  CHECK(n_hard == 5);
  CHECK(n_neg == 12);
  CHECK(list.warnings.empty());

  const auto again = assemble_training_list(pos, hard, neg, 20, 11);
  CHECK(ids(again.passages) == ids(list.passages));
  const auto other = assemble_training_list(pos, hard, neg, 20, 12);
  CHECK(ids(other.passages) != ids(list.passages));
}

TEST_CASE("assemble_training_list edge cases") {
  const auto many = passages("pos", 25);
  const auto capped = assemble_training_list(many, {}, passages("neg", 5), 20, 1);
  CHECK(capped.passages.size() == 20);
  for (const auto& p : capped.passages) CHECK(p.id.starts_with("pos"));
  REQUIRE(capped.warnings.size() == 1);
  CHECK(capped.warnings[0].find("25") != std::string::npos);

  const auto short_pool = assemble_training_list(passages("pos", 2), {}, passages("neg", 4), 20, 1);
  CHECK(short_pool.passages.size() == 6);

  const auto none = assemble_training_list({}, passages("hard", 2), passages("neg", 4), 20, 1);
  CHECK_FALSE(none.usable);
  CHECK(none.passages.empty());

  const auto dup = passages("x", 2);
  CHECK_THROWS_AS((void)assemble_training_list(dup, dup, {}, 20, 1), std::invalid_argument);
  CHECK_THROWS_AS((void)assemble_training_list(dup, {}, {}, 0, 1), std::invalid_argument);
}

TEST_CASE("property: training lists are disjoint unions of their pools") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto pos = passages("p", 1 + rng() % 25);
    const auto hard = passages("h", rng() % 10);
    const auto neg = passages("n", rng() % 40);
    const std::size_t cap = 1 + rng() % 30;
    const auto list = assemble_training_list(pos, hard, neg, cap, rng());
    const auto got = ids(list.passages);
    CHECK_FALSE(has_duplicates(got));
    CHECK(list.passages.size() == std::min(cap, pos.size() + hard.size() + neg.size()));
    std::size_t n_pos = 0, n_hard = 0;
    for (const auto& id : got) {
      n_pos += id[0] == 'p';
      n_hard += id[0] == 'h';
    }
    CHECK(n_pos == std::min(cap, pos.size()));
    CHECK(n_hard == std::min(cap - n_pos, hard.size()));
  }
}

TEST_CASE("listwise labels") {
  const Query q{"q", "question", std::nullopt};
  const auto list = passages("p", 5);
  RelevanceJudgments j;
  j["q"]["p4"] = 2;
  j["q"]["p2"] = 1;

  SUBCASE("well-formed teacher") {
    auto g = gateway_for(std::make_shared<OracleBackend>(j));
    const auto res = generate_listwise_label(q, list, g);
    REQUIRE(res.label);
    CHECK(res.label->gold == std::vector<std::string>{"p4", "p2", "p1", "p3", "p5"});
    CHECK_FALSE(res.label->think.empty());
    CHECK(res.repair.clean());
  }
  SUBCASE("missing ids are appended") {
    auto g = gateway_for(std::make_shared<FunctionBackend>(
        "partial", [](const ChatRequest&) { return std::string("<think>t</think><answer>[5] > [1]</answer>"); }));
    const auto res = generate_listwise_label(q, list, g);
    REQUIRE(res.label);
    CHECK(res.label->gold == std::vector<std::string>{"p5", "p1", "p2", "p3", "p4"});
    CHECK(res.label->think == "t");
    CHECK(res.repair.appended == 3);
  }
  SUBCASE("empty reply is skipped") {
    auto g = gateway_for(std::make_shared<MalformedBackend>(MalformedMode::Empty));
    const auto res = generate_listwise_label(q, list, g);
    CHECK_FALSE(res.label);
    CHECK_FALSE(res.skip_reason.empty());
  }
  SUBCASE("reply without any ranking is skipped") {
    auto g = gateway_for(std::make_shared<MalformedBackend>(MalformedMode::Garbage));
    CHECK_FALSE(generate_listwise_label(q, list, g).label);
  }
  SUBCASE("empty list") {
    auto g = gateway_for(std::make_shared<IdentityBackend>());
    CHECK_FALSE(generate_listwise_label(q, {}, g).label);
  }
}

TEST_CASE("consistency filter boundaries") {
  const auto r39 = record_with("a", Domain::ComplexQa, {2, 6, 9, 11, 12, 13});
  const auto r40 = record_with("b", Domain::Coding, {1, 4, 5, 11, 12, 13, 14, 15, 16, 17});
  const auto r41 = record_with("c", Domain::MathProblem, {2, 6, 7, 9, 11, 12, 13, 14});
  CHECK(consistency_score(r39) == doctest::Approx(0.389802).epsilon(1e-6));
  CHECK(consistency_score(r40) == doctest::Approx(0.400023).epsilon(1e-6));
  CHECK(consistency_score(r41) == doctest::Approx(0.410147).epsilon(1e-6));
  for (const auto* r : {&r39, &r40, &r41}) {
    CHECK(consistency_score(*r) == doctest::Approx(oracle::ndcg(r->label.gold, r->pointwise, 10)).epsilon(1e-12));
  }

  const auto res = self_consistency_filter({r39, r40, r41}, 0.4);
  REQUIRE(res.kept.size() == 2);
  CHECK(res.kept[0].query.qid == "b");
  CHECK(res.kept[1].query.qid == "c");
  CHECK(res.report.kept() == 2);
  CHECK(res.report.dropped() == 1);
  CHECK(res.report.per_domain.at("complex-qa").dropped == 1);

  // a record exactly at alpha is kept
  const double exact = consistency_score(r40);
  CHECK(self_consistency_filter({r40}, exact).kept.size() == 1);
  CHECK(self_consistency_filter({r39, r40, r41}, 0.0).kept.size() == 3);
  CHECK(self_consistency_filter({r39, r40, r41}, 1.01).kept.empty());
}

TEST_CASE("property: filter keeps exactly the records at or above alpha") {
  std::mt19937_64 rng(17);
  std::vector<SynthesisRecord> records;
  for (int i = 0; i < 100; ++i) {
    std::set<std::size_t> ranks;
    const auto n = 1 + rng() % 8;
    while (ranks.size() < n) ranks.insert(1 + rng() % 20);
    records.push_back(record_with("r" + std::to_string(i), kAllDomains[rng() % 5], ranks));
  }
  for (double alpha : {0.0, 0.25, 0.4, 0.6, 0.9, 1.0}) {
    const auto res = self_consistency_filter(records, alpha);
    std::size_t expected = 0;
    for (const auto& r : records) expected += oracle::ndcg(r.label.gold, r.pointwise, 10) >= alpha;
    CHECK(res.kept.size() == expected);
    CHECK(res.report.kept() + res.report.dropped() == records.size());
  }
}

namespace {

std::vector<SynthesisInput> synthesis_inputs(RelevanceJudgments& j) {
  std::vector<SynthesisInput> inputs;
  for (int q = 0; q < 12; ++q) {
    SynthesisInput in;
    const auto qid = "s" + std::to_string(q);
    in.query = {qid, "question " + qid, std::nullopt};
    in.answer = "answer " + qid;
    in.domain = kAllDomains[q % 4];
    in.candidates = passages(qid + "-c", 30);
    in.documents = {{qid + "-doc", "first part\n\nsecond part\n\nthird part", ""}};
    in.hard_candidates = passages(qid + "-h", 8);
    j[qid][qid + "-c" + std::to_string(1 + q % 30)] = 1;
    j[qid][qid + "-doc#2"] = 2;
    j[qid][qid + "-h3"] = 0;
    j[qid][qid + "-h5"] = 0;
    inputs.push_back(std::move(in));
  }
  SynthesisInput web;
  web.query = {"web", "web question", std::nullopt};
  web.domain = Domain::WebSearch;
  web.candidates = passages("web-c", 10);
  inputs.push_back(web);
  web.query.qid = "web-labelled";
  web.labels = Grades{{"web-c2", 1}};
  inputs.push_back(web);
  return inputs;
}

}  // namespace

TEST_CASE("synthesize end to end with the oracle teacher") {
  RelevanceJudgments j;
  const auto inputs = synthesis_inputs(j);
  auto g = gateway_for(std::make_shared<OracleBackend>(j));
  SynthesisConfig config;
  const auto out = synthesize(inputs, g, config);
  REQUIRE(out.records.size() == 13);
  REQUIRE(out.skipped.size() == 1);
  CHECK(out.skipped[0].qid == "web");
  CHECK(out.records.back().query.qid == "web-labelled");
  // selection (1 batch positives + 1 hard) + label for 12 inputs, label only for the labelled web input
  CHECK(out.backend_calls == 12 * 3 + 1);
  for (const auto& r : out.records) {
    CHECK(r.passages.size() <= kTrainingListCap);
    CHECK(is_permutation_of(r.label.gold, ids(r.passages)));
    if (r.query.qid != "web-labelled") CHECK(r.consistency == doctest::Approx(1.0));
  }
  const auto& first = out.records[0];
  CHECK(first.pointwise.at("s0-doc#2") == 1);
  CHECK(first.pointwise.at("s0-h3") == 0);
  CHECK(first.pointwise.at("s0-h5") == 0);
  CHECK(first.label.gold[0] == "s0-doc#2");
  CHECK(first.label.gold[1] == "s0-c1");
}

TEST_CASE("synthesize is deterministic across concurrency") {
  RelevanceJudgments j;
  const auto inputs = synthesis_inputs(j);
  std::vector<std::string> lines;
  for (std::size_t conc : {1, 3, 8}) {
    auto g = gateway_for(std::make_shared<NoisyBackend>(3, 0.3, j), 8);
    SynthesisConfig config;
    config.concurrency = conc;
    const auto out = synthesize(inputs, g, config);
    std::string all;
    for (const auto& r : out.records) {
      for (const auto& id : r.label.gold) all += id + ",";
      all += "|";
    }
    lines.push_back(all);
  }
  CHECK(lines[0] == lines[1]);
  CHECK(lines[0] == lines[2]);
}
