#include <fmt/format.h>
#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "drivecombo/eval_harness.hpp"

using namespace drivecombo;

namespace {

const std::string kDataDir = std::string(DRIVECOMBO_SOURCE_DIR) + "/data";

Mcq question(std::string id, int level, Jurisdiction j = Jurisdiction::China, char gold = 'A', int num_rules = 2) {
  Mcq m;
  m.id = std::move(id);
  m.level = level;
  m.jurisdiction = j;
  m.num_rules = level == 1 ? 1 : num_rules;
  m.scenario_description = "A car approaches a junction.";
  m.question_stem = "What should the ego vehicle do?";
  m.options = {"stop", "go", "turn", "reverse"};
  m.correct_option = gold;
  m.frame_refs = {"f0.png", "f1.png", "f2.png", "f3.png"};
  m.scene_text = "A car approaches a junction with a red light.";
  return m;
}

std::vector<Mcq> fixture_questions() { return read_dataset(kDataDir + "/eval/questions.jsonl"); }

// Retriever returning the first k of a fixed list, for prompt snapshots.
class FixedRetriever final : public Retriever {
 public:
  explicit FixedRetriever(std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) passages_.push_back({"p#" + std::to_string(i + 1), {}, "passage " + std::to_string(i + 1)});
  }
  std::vector<Passage> retrieve(const std::string&, std::size_t k, std::optional<Jurisdiction>) const override {
    return {passages_.begin(), passages_.begin() + static_cast<std::ptrdiff_t>(std::min(k, passages_.size()))};
  }

 private:
  std::vector<Passage> passages_;
};

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

// ── Split ───────────────────────────────────────────────────────────────────

TEST(Split, HundredCompositesGiveEightyTwenty) {
  std::vector<Mcq> qs;
  for (int i = 0; i < 100; ++i)
    qs.push_back(question("Q" + std::to_string(i), 2 + i % 4, all_values<Jurisdiction>()[(i / 4) % 5]));
  for (int i = 0; i < 30; ++i) qs.push_back(question("S" + std::to_string(i), 1));
  const auto s = split_dataset(qs, 7);
  EXPECT_EQ(s.test.size(), 20u);
  EXPECT_EQ(s.train.size(), 110u);
  for (const auto& id : s.test) EXPECT_EQ(id[0], 'Q');
  std::set<std::string> all(s.train.begin(), s.train.end());
  for (const auto& id : s.test) EXPECT_TRUE(all.insert(id).second);
  EXPECT_EQ(all.size(), qs.size());
  EXPECT_EQ(split_dataset(qs, 7).test, s.test);
  EXPECT_NE(split_dataset(qs, 8).test, s.test);
}

TEST(Split, AllLevelOneLeavesTestEmpty) {
  const auto s = split_dataset({question("a", 1), question("b", 1)}, 0);
  EXPECT_TRUE(s.test.empty());
  EXPECT_EQ(s.train.size(), 2u);
  ASSERT_FALSE(s.warnings.empty());
  EXPECT_NE(s.warnings.front().find("empty"), std::string::npos);
}

TEST(Split, RejectsBadInput) {
  EXPECT_THROW(split_dataset({}, 0), ValidationError);
  EXPECT_THROW(split_dataset({question("a", 2), question("a", 3)}, 0), ValidationError);
}

TEST(Split, SmallStrataAreMergedWithWarning) {
  std::vector<Mcq> qs;
  for (int i = 0; i < 3; ++i) qs.push_back(question("uk" + std::to_string(i), 3, Jurisdiction::UK));
  for (int i = 0; i < 3; ++i) qs.push_back(question("jp" + std::to_string(i), 3, Jurisdiction::Japan));
  const auto s = split_dataset(qs, 1);
  EXPECT_EQ(s.test.size(), 1u);  // round(6 / 5)
  EXPECT_EQ(s.warnings.size(), 2u);
  EXPECT_NE(s.warnings.front().find("merged into L3/*"), std::string::npos);
}

TEST(Split, StratifiedQuotasProperty) {
  SeededRng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Mcq> qs;
    const std::size_t n = 1 + rng.index(300);
    for (std::size_t i = 0; i < n; ++i) {
      const int level = 1 + static_cast<int>(rng.index(5));
      qs.push_back(question("q" + std::to_string(i), level, all_values<Jurisdiction>()[rng.index(5)]));
    }
    const auto s = split_dataset(qs, static_cast<std::uint64_t>(trial));
    std::map<std::string, int> level_of;
    std::map<std::string, std::pair<int, int>> per_stratum;  // size, test count
    std::size_t composites = 0;
    for (const auto& q : qs) {
      level_of[q.id] = q.level;
      if (q.level > 1) {
        ++composites;
        ++per_stratum[std::to_string(q.level) + to_token(q.jurisdiction).data()].first;
      }
    }
    ASSERT_EQ(s.test.size(), static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(composites))));
    ASSERT_EQ(s.test.size() + s.train.size(), qs.size());
    for (const auto& id : s.test) ASSERT_GT(level_of[id], 1);
    for (const auto& q : qs)
      if (std::binary_search(s.test.begin(), s.test.end(), q.id))
        ++per_stratum[std::to_string(q.level) + to_token(q.jurisdiction).data()].second;
    // Strata large enough to stand alone get floor or ceil of their share and
    // keep at least one item on each side.
    for (const auto& [key, st] : per_stratum) {
      if (st.first < 5) continue;
      ASSERT_GE(st.second, st.first / 5) << key;
      ASSERT_LE(st.second, (st.first + 4) / 5) << key;
      ASSERT_GE(st.second, 1);
      ASSERT_LT(st.second, st.first);
    }
  }
}

// ── Variants and prompts ────────────────────────────────────────────────────

TEST(Prompt, TextVariantKeepsGold) {
  for (const auto& q : fixture_questions()) {
    const auto t = derive_text_variant(q);
    EXPECT_TRUE(t.frame_refs.empty());
    EXPECT_EQ(t.options, q.options);
    EXPECT_EQ(t.correct_option, q.correct_option);
  }
  auto q = question("x", 2);
  q.scene_text.reset();
  EXPECT_THROW(derive_text_variant(q), ValidationError);
}

TEST(Prompt, PlainTextTemplate) {
  const auto q = question("x", 2, Jurisdiction::Japan);
  const auto r = build_prompt(q, {Variant::Text, false, false});
  EXPECT_EQ(r.system, prompts::test_text("", "", "").system);
  EXPECT_EQ(r.user,
            "Jurisdiction: Japan. Answer according to the traffic laws of Japan.\n\n"
            "Scenario Description: A car approaches a junction with a red light.\n\n"
            "Question Stem: What should the ego vehicle do?\n\n"
            "Options: A. stop\nB. go\nC. turn\nD. reverse\n\nOutput:");
  EXPECT_TRUE(r.image_paths.empty());
  EXPECT_EQ(r.decoding.temperature, 0.0);
  EXPECT_EQ(r.decoding.top_p, 1.0);
  EXPECT_EQ(r.decoding.top_k, 1);
}

TEST(Prompt, CotAndRagSnapshot) {
  const FixedRetriever retriever(8);
  const auto r = build_prompt(question("x", 5, Jurisdiction::UK), {Variant::Text, true, true}, &retriever);
  EXPECT_EQ(r.user,
            "Jurisdiction: UK. Answer according to the traffic laws of UK.\n\n"
            "Relevant traffic rule passages:\n[1] passage 1\n[2] passage 2\n[3] passage 3\n[4] passage 4\n"
            "[5] passage 5\n\n"
            "Let's think step by step.\n\n"
            "Scenario Description: A car approaches a junction with a red light.\n\n"
            "Question Stem: What should the ego vehicle do?\n\n"
            "Options: A. stop\nB. go\nC. turn\nD. reverse\n\nOutput:");
}

TEST(Prompt, VisualAttachesFrames) {
  const auto q = question("x", 3);
  const auto r = build_prompt(q, {Variant::Visual, false, false});
  EXPECT_EQ(r.image_paths, q.frame_refs);
  EXPECT_EQ(r.system, prompts::test_visual("", "", "").system);
  EXPECT_NE(r.user.find(kFramePlaceholder), std::string::npos);
  EXPECT_EQ(r.user.find("red light"), std::string::npos);
  auto no_frames = q;
  no_frames.frame_refs.clear();
  EXPECT_THROW(build_prompt(no_frames, {Variant::Visual, false, false}), ValidationError);
  EXPECT_THROW(build_prompt(q, {Variant::Text, false, true}), ConfigError);
}

TEST(Prompt, RagPassageCountIsMinOfFiveAndCorpus) {
  for (std::size_t n : {0u, 1u, 3u, 5u, 6u, 40u}) {
    const FixedRetriever retriever(n);
    const auto r = build_prompt(question("x", 2), {Variant::Text, false, true}, &retriever);
    EXPECT_EQ(count_of(r.user, "\n["), std::min<std::size_t>(n, 5));
  }
  const Bm25Retriever bm25(load_rule_books(kDataDir + "/corpus"));
  for (const auto& q : fixture_questions()) {
    const auto r = build_prompt(q, {Variant::Text, false, true}, &bm25);
    ASSERT_EQ(count_of(r.user, "\n["), 5u) << q.id;
  }
}

// ── Retrieval ───────────────────────────────────────────────────────────────

TEST(Retrieval, ChunksByArticle) {
  const auto p = chunk_rule_book("Preamble text.\n\nArticle 1 Keep right.\nMore.\nArticle 2 Stop on red.\n", "cn",
                                 Jurisdiction::China);
  ASSERT_EQ(p.size(), 3u);
  EXPECT_EQ(p[0].text, "Preamble text.");
  EXPECT_EQ(p[1].text, "Article 1 Keep right.\nMore.");
  EXPECT_EQ(p[2].id, "cn#3");
  EXPECT_EQ(p[2].jurisdiction, Jurisdiction::China);
  const auto paras = chunk_rule_book("one\ntwo\n\n\nthree\n", "x");
  ASSERT_EQ(paras.size(), 2u);
  EXPECT_EQ(paras[0].text, "one\ntwo");
}

TEST(Retrieval, ShippedCorpus) {
  const auto passages = load_rule_books(kDataDir + "/corpus");
  for (const auto j : all_values<Jurisdiction>()) {
    const auto n = std::count_if(passages.begin(), passages.end(), [&](const Passage& p) { return p.jurisdiction == j; });
    EXPECT_GE(n, 6) << to_token(j);
  }
  const Bm25Retriever r(passages);
  const auto top = r.retrieve("give way to ambulances and fire engines with sirens", 5, Jurisdiction::China);
  ASSERT_EQ(top.size(), 5u);
  EXPECT_NE(top.front().text.find("Article 4"), std::string::npos);
  for (const auto& p : top) EXPECT_EQ(p.jurisdiction, Jurisdiction::China);
  EXPECT_THROW(load_rule_books(kDataDir + "/missing"), ConfigError);
}

TEST(Retrieval, MatchesIndependentBm25) {
  const std::vector<std::string> docs{"red light stop line stop", "pedestrian crossing give way",
                                      "stop sign stop and give way", "speed limit on the highway",
                                      "give way to emergency vehicles"};
  std::vector<Passage> passages;
  for (std::size_t i = 0; i < docs.size(); ++i) passages.push_back({std::to_string(i), {}, docs[i]});
  const Bm25Retriever r(passages);
  const std::string query = "stop and give way";

  // Textbook BM25 with k1 = 1.2, b = 0.75 over whitespace terms.
  std::vector<std::vector<std::string>> terms;
  for (const auto& d : docs) terms.push_back(tokenize(d));
  double avg = 0;
  for (const auto& t : terms) avg += static_cast<double>(t.size());
  avg /= static_cast<double>(terms.size());
  std::vector<std::pair<double, std::size_t>> expected;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    double s = 0;
    for (const std::string q : {"stop", "give", "way"}) {
      double df = 0;
      for (const auto& t : terms) df += std::count(t.begin(), t.end(), q) > 0 ? 1 : 0;
      const double tf = static_cast<double>(std::count(terms[i].begin(), terms[i].end(), q));
      const double idf = std::log(1 + (5 - df + 0.5) / (df + 0.5));
      s += idf * tf * 2.2 / (tf + 1.2 * (0.25 + 0.75 * static_cast<double>(terms[i].size()) / avg));
    }
    expected.emplace_back(-s, i);
  }
  std::sort(expected.begin(), expected.end());
  const auto got = r.retrieve(query, 5, std::nullopt);
  ASSERT_EQ(got.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(got[i].id, std::to_string(expected[i].second));
}

TEST(Retrieval, Tokenizer) {
  EXPECT_EQ(tokenize("The Vehicle shall STOP, at 60 km/h!"), (std::vector<std::string>{"vehicle", "stop", "60", "km", "h"}));
}

// ── Extraction ──────────────────────────────────────────────────────────────

TEST(Extract, PublishedRule) {
  EXPECT_EQ(extract_choice("B"), 'B');
  EXPECT_EQ(extract_choice("The answer is C because the light is red."), 'C');
  EXPECT_EQ(extract_choice("none of these"), std::nullopt);
  EXPECT_EQ(extract_choice("Answer: D"), 'D');
  EXPECT_EQ(extract_choice("\"A\""), 'A');
  EXPECT_EQ(extract_choice("I pick (B), not C."), 'B');
  EXPECT_EQ(extract_choice("ABCD"), std::nullopt);
  EXPECT_EQ(extract_choice("b is right"), std::nullopt);
  EXPECT_EQ(extract_choice("E or F"), std::nullopt);
  EXPECT_EQ(extract_choice("A1 then B"), 'B');
  EXPECT_EQ(extract_choice(""), std::nullopt);
}

// ── Running ─────────────────────────────────────────────────────────────────

TEST(Run, GoldStubScoresEverything) {
  auto qs = fixture_questions();
  std::map<std::string, char> gold;
  for (const auto& q : qs) gold[q.id] = q.correct_option;
  StubEndpoint stub([&](const ChatRequest& r) { return std::string(1, gold.at(r.tag.substr(0, r.tag.find('/')))); });
  const auto recs = run_evaluation(qs, stub, {Variant::Text, false, false});
  ASSERT_EQ(recs.size(), 180u);
  for (const auto& r : recs) EXPECT_TRUE(r.correct);
  const auto rep = compute_report(recs, qs);
  for (const auto& row : rep.rows)
    if (row.total().attempted > 0) EXPECT_EQ(row.mean_percent(), "100.00") << row.stratum;
}

TEST(Run, ConstantAnswerMatchesGoldShare) {
  const auto qs = fixture_questions();
  StubEndpoint stub([](const ChatRequest&) { return std::string("A"); });
  const auto recs = run_evaluation(qs, stub, {Variant::Text, false, false}, nullptr, {1, 4, 3});
  const auto gold_a = std::count_if(qs.begin(), qs.end(), [](const Mcq& q) { return q.correct_option == 'A'; });
  const auto correct = std::count_if(recs.begin(), recs.end(), [](const EvalRecord& r) { return r.correct; });
  EXPECT_EQ(correct, gold_a);
  EXPECT_EQ(compute_report(recs, qs).row("overall", "all").mean_percent(),
            format_percent(static_cast<std::size_t>(gold_a), qs.size()));
}

TEST(Run, CardinalityOrderTagsAndDecoding) {
  std::vector<Mcq> qs;
  for (int i = 19; i >= 0; --i) qs.push_back(question(fmt::format("q{:02}", i), 2 + i % 4));
  std::mutex mu;
  std::vector<ChatRequest> seen;
  StubEndpoint stub([&](const ChatRequest& r) {
    std::lock_guard lock(mu);
    seen.push_back(r);
    return std::string("B");
  });
  const auto recs = run_evaluation(qs, stub, {Variant::Text, true, false}, nullptr, {3, 8, 1});
  ASSERT_EQ(recs.size(), 60u);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(recs[i].question_id, fmt::format("q{:02}", i / 3));
    EXPECT_EQ(recs[i].repeat, static_cast<int>(i % 3) + 1);
  }
  std::set<std::string> tags;
  for (const auto& r : seen) {
    EXPECT_EQ(r.decoding, DecodingParams{});
    EXPECT_EQ(r.decoding.temperature, 0.0);
    tags.insert(r.tag);
  }
  EXPECT_EQ(tags.size(), 60u);
  EXPECT_TRUE(tags.contains("q07/2/text+cot"));
  EXPECT_EQ(run_evaluation(qs, stub, {Variant::Text, true, false}, nullptr, {3, 1, 1}), recs);
}

TEST(Run, TransportFailuresAreKept) {
  const auto qs = std::vector<Mcq>{question("a", 2), question("b", 3)};
  int calls = 0;
  StubEndpoint stub([&](const ChatRequest& r) -> std::string {
    ++calls;
    if (r.tag.starts_with("b/")) throw TransportError("down");
    return "A";
  });
  const auto recs = run_evaluation(qs, stub, {Variant::Text, false, false}, nullptr, {3, 1, 2});
  ASSERT_EQ(recs.size(), 6u);
  EXPECT_EQ(calls, 3 + 3 * 2);
  for (std::size_t i = 3; i < 6; ++i) {
    EXPECT_TRUE(recs[i].failed);
    EXPECT_FALSE(recs[i].correct);
    EXPECT_EQ(recs[i].extracted, std::nullopt);
  }
  const auto rep = compute_report(recs, qs);
  EXPECT_EQ(rep.transport_failures, 3u);
  EXPECT_EQ(rep.unparsed, 3u);
}

TEST(Run, ConfigurationErrors) {
  const auto qs = std::vector<Mcq>{question("a", 2)};
  StubEndpoint text_only([](const ChatRequest&) { return std::string("A"); });
  EXPECT_THROW(run_evaluation(qs, text_only, {Variant::Visual, false, false}), ConfigError);
  StubEndpoint vision([](const ChatRequest& r) { return r.image_paths.size() == 4 ? "A" : "B"; }, true);
  const auto recs = run_evaluation(qs, vision, {Variant::Visual, false, false});
  EXPECT_TRUE(recs.front().correct);
  EXPECT_THROW(run_evaluation(qs, text_only, {Variant::Text, false, false}, nullptr, {4, 1, 1}), ConfigError);
  EXPECT_THROW(run_evaluation(qs, text_only, {Variant::Text, false, false}, nullptr, {0, 1, 1}), ConfigError);
}

TEST(Run, SplitOverload) {
  const auto qs = fixture_questions();
  const auto split = split_dataset(qs, 3);
  StubEndpoint stub([](const ChatRequest&) { return std::string("C"); });
  const auto recs = run_evaluation(split, qs, stub, {Variant::Text, false, false});
  EXPECT_EQ(recs.size(), split.test.size() * 3);
}

TEST(Run, RecordsRoundTrip) {
  EvalRecord r{"q", 2, {Variant::Visual, true, true}, "Answer: \"B\"\n", 'B', true, 0.0, false, ""};
  EXPECT_EQ(record_from_json(record_to_jsonl(r)), r);
  r.extracted.reset();
  r.failed = true;
  r.error = "timeout";
  EXPECT_EQ(record_from_json(record_to_jsonl(r)), r);
  EXPECT_THROW(record_from_json("{}"), ParseError);
  EXPECT_THROW(Condition::parse("text+rag+cot"), ParseError);
  for (const auto v : all_values<Variant>())
    for (bool cot : {false, true})
      for (bool rag : {false, true}) EXPECT_EQ(Condition::parse(Condition{v, cot, rag}.label()), (Condition{v, cot, rag}));
}

// ── Report ──────────────────────────────────────────────────────────────────

TEST(Report, Percentages) {
  EXPECT_EQ(format_percent(7, 10), "70.00");
  EXPECT_EQ(format_percent(1, 3), "33.33");
  EXPECT_EQ(format_percent(2, 3), "66.67");
  EXPECT_EQ(format_percent(1, 8), "12.50");
  EXPECT_EQ(format_percent(1, 20000), "0.01");  // exactly 0.005 rounds up
  EXPECT_EQ(format_percent(1, 20001), "0.00");
  EXPECT_EQ(format_percent(0, 5), "0.00");
  EXPECT_EQ(format_percent(5, 5), "100.00");
}

TEST(Report, SevenOfTen) {
  std::vector<Mcq> qs;
  std::vector<EvalRecord> recs;
  for (int i = 0; i < 10; ++i) {
    qs.push_back(question("q" + std::to_string(i), 3, Jurisdiction::USA));
    recs.push_back({qs.back().id, 1, {}, "", 'A', i < 7, 0, false, ""});
  }
  const auto rep = compute_report(recs, qs);
  EXPECT_EQ(rep.row("level", "L3").mean_percent(), "70.00");
  EXPECT_EQ(rep.row("jurisdiction", "USA").run_percent(0), "70.00");
  EXPECT_EQ(rep.row("level", "L2").mean_percent(), std::nullopt);
  EXPECT_NE(report_markdown(rep).find("| L2 | 0 | 0 | n/a | n/a |"), std::string::npos);
}

TEST(Report, Errors) {
  EXPECT_THROW(compute_report({}, {question("a", 2)}), ValidationError);
  EXPECT_THROW(compute_report({{"ghost", 1, {}, "", 'A', true, 0, false, ""}}, {question("a", 2)}), ValidationError);
  EXPECT_THROW(compute_report({{"a", 1, {}, "", 'A', true, 0, false, ""},
                               {"a", 2, {Variant::Text, true, false}, "", 'A', true, 0, false, ""}},
                              {question("a", 2)}),
               ValidationError);
}

TEST(Report, ReplayFixtureMatchesHandTable) {
  const auto qs = fixture_questions();
  ASSERT_EQ(qs.size(), 60u);
  auto replay = ReplayEndpoint::from_file(kDataDir + "/eval/replay_text.jsonl", false);
  const auto recs = run_evaluation(qs, replay, {Variant::Text, false, false}, nullptr, {3, 4, 1});
  ASSERT_EQ(recs.size(), 180u);
  const auto rep = compute_report(recs, qs);
  EXPECT_EQ(report_csv(rep), read_file(kDataDir + "/eval/expected_report_text.csv"));
  EXPECT_EQ(rep.transport_failures, 1u);
  // Attempted counts per dimension add up to |test| x repeats.
  for (const std::string dim : {"level", "jurisdiction", "num_rules"}) {
    std::size_t sum = 0;
    for (const auto& row : rep.rows)
      if (row.dimension == dim) sum += row.total().attempted;
    EXPECT_EQ(sum, 180u) << dim;
  }
  const auto again = compute_report(run_evaluation(qs, replay, {Variant::Text, false, false}), qs);
  EXPECT_EQ(report_csv(again), report_csv(rep));
  EXPECT_EQ(report_markdown(again), report_markdown(rep));
}

TEST(Report, PermutationInvariantAndBounded) {
  const auto qs = fixture_questions();
  auto replay = ReplayEndpoint::from_file(kDataDir + "/eval/replay_text.jsonl", false);
  auto recs = run_evaluation(qs, replay, {Variant::Text, false, false});
  const auto base = report_csv(compute_report(recs, qs));
  SeededRng rng(9);
  for (int i = 0; i < 20; ++i) {
    rng.shuffle(recs);
    const auto rep = compute_report(recs, qs);
    ASSERT_EQ(report_csv(rep), base);
    for (const auto& row : rep.rows) {
      if (const auto m = row.mean_percent()) {
        ASSERT_GE(std::stod(*m), 0.0);
        ASSERT_LE(std::stod(*m), 100.0);
      }
    }
  }
}
