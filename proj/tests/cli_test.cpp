#include "drivecombo/cli.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include "drivecombo/common.hpp"

namespace fs = std::filesystem;
using namespace drivecombo;

namespace {

const std::string kSrc = DRIVECOMBO_SOURCE_DIR;

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::random_device rd;
    dir_ = fs::temp_directory_path() / ("drivecombo_cli_" + std::to_string(rd()));
    fs::create_directories(dir_);
    write_config(base_config());
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string base_config(const std::string& rules = kSrc + "/data/rules/china_fixture.yaml",
                          const std::string& scenes = kSrc + "/data/scenes") const {
    return "jurisdiction: china\n"
           "rules: " + rules + "\n"
           "maps: [" + kSrc + "/data/maps]\n"
           "catalog: " + kSrc + "/data/catalog/assets.yaml\n"
           "scenes: " + scenes + "\n"
           "corpus: " + kSrc + "/data/corpus\n"
           "output: " + (dir_ / "out").string() + "\n"
           "endpoints:\n"
           "  judges: {backend: stub, response: \"Output Decision: 1\"}\n"
           "  scorers: {backend: stub, response: \"0.9\"}\n";
  }
  void write_config(const std::string& text) { write_file(config(), text); }
  std::string config() const { return (dir_ / "project.yaml").string(); }
  std::string out(const std::string& name) const { return (dir_ / "out" / name).string(); }

  CliResult run(std::vector<std::string> args) {
    args.insert(args.begin(), {"-c", config()});
    std::ostringstream o, e;
    const int code = run_cli(args, o, e);
    return {code, o.str(), e.str()};
  }

  fs::path dir_;
};

TEST_F(CliTest, CraftBuildsEveryLevel) {
  const auto r = run({"craft"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(fs::exists(out("hierarchy.yaml")));
  for (int l = 1; l <= 5; ++l) EXPECT_EQ(r.out.find("L" + std::to_string(l) + ": 0\n"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("L1: 35\n"), std::string::npos) << r.out;
}

TEST_F(CliTest, CraftOnEmptyRuleFileWarns) {
  const auto rules = (dir_ / "empty.yaml").string();
  write_file(rules, "");
  write_config(base_config(rules));
  const auto r = run({"craft"});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.err.find("holds no rules"), std::string::npos) << r.err;
}

TEST_F(CliTest, MissingConfigAndPathsAreConfigErrors) {
  std::ostringstream o, e;
  EXPECT_EQ(run_cli({"-c", (dir_ / "nope.yaml").string(), "craft"}, o, e), kExitConfig);
  write_config(base_config((dir_ / "missing.yaml").string()));
  EXPECT_EQ(run({"craft"}).code, kExitConfig);
}

TEST_F(CliTest, OutOfRangeConfigValuesAreConfigErrors) {
  for (const std::string extra : {"thresholds: {quality: 1.5}\n", "thresholds: {resample_rounds: 0}\n",
                                  "thresholds: {retry_budget: 11}\n", "eval: {repeats: 4}\n",
                                  "eval: {concurrency: 0}\n", "combo_sizes: [6]\n", "unknown_key: 1\n"}) {
    write_config(base_config() + extra);
    EXPECT_EQ(run({"craft"}).code, kExitConfig) << extra;
  }
}

TEST_F(CliTest, UsageErrors) {
  std::ostringstream o, e;
  EXPECT_EQ(run_cli({"craft"}, o, e), kExitUsage);
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run({"eval", "--repeats", "4"}).code, kExitUsage);
  EXPECT_EQ(run_cli({"--help"}, o, e), kExitOk);
}

TEST_F(CliTest, GenerateRequiresHierarchyAndPanel) {
  EXPECT_EQ(run({"generate"}).code, kExitConfig);
  ASSERT_EQ(run({"craft"}).code, kExitOk);
  const auto text = base_config();
  write_config(text.substr(0, text.find("endpoints:")));
  EXPECT_EQ(run({"generate"}).code, kExitConfig);
}

TEST_F(CliTest, GenerateCountsAndReviewSample) {
  ASSERT_EQ(run({"craft"}).code, kExitOk);
  const auto r = run({"generate"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto dataset = read_dataset(out("dataset.jsonl"));
  ASSERT_FALSE(dataset.empty());
  std::set<int> levels;
  for (const auto& m : dataset) levels.insert(m.level);
  EXPECT_EQ(levels, (std::set<int>{1, 2, 3, 4, 5}));

  std::smatch m;
  ASSERT_TRUE(std::regex_search(r.out, m, std::regex(R"(attempted: (\d+), accepted: (\d+))"))) << r.out;
  EXPECT_EQ(std::stoul(m[2]), dataset.size());
  EXPECT_LE(dataset.size(), std::stoul(m[1]));

  const auto queue = read_review_queue(out("review_queue.jsonl"));
  const auto sampled = std::count_if(queue.begin(), queue.end(), [](const ReviewItem& i) { return i.reason != "quality_flag"; });
  EXPECT_EQ(static_cast<std::size_t>(sampled), static_cast<std::size_t>(std::ceil(dataset.size() * 0.05)));
}

TEST_F(CliTest, CompileMatchesGoldens) {
  const auto r = run({"compile"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(kSrc + "/data/golden")) {
    EXPECT_EQ(read_file(out("scenarios/" + e.path().filename().string())), read_file(e.path().string()))
        << e.path();
    ++n;
  }
  EXPECT_EQ(n, 9u);
  EXPECT_EQ(read_file(out("compile_failures.txt")), "");
}

TEST_F(CliTest, CompileWithNoDocsSucceeds) {
  const auto empty = dir_ / "no_scenes";
  fs::create_directories(empty);
  write_config(base_config(kSrc + "/data/rules/china_fixture.yaml", empty.string()));
  const auto r = run({"compile"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("no scene docs"), std::string::npos);
}

TEST_F(CliTest, CompileListsBrokenDocs) {
  const auto bad = (dir_ / "broken.yaml").string();
  write_file(bad, "road_network: {road_type: nowhere}\n");
  const auto good = kSrc + "/data/scenes/fog_following.yaml";
  const auto r = run({"compile", "--scene", good, "--scene", bad});
  EXPECT_EQ(r.code, kExitData);
  const auto failures = read_file(out("compile_failures.txt"));
  EXPECT_NE(failures.find("broken:"), std::string::npos) << failures;
  EXPECT_EQ(failures.find("fog_following"), std::string::npos);
  EXPECT_TRUE(fs::exists(out("scenarios/fog_following.xosc")));

  EXPECT_EQ(run({"validate", "--scene", bad}).code, kExitData);
  EXPECT_EQ(run({"validate"}).code, kExitOk);
}

TEST_F(CliTest, EvalAndReportWithGoldModel) {
  ASSERT_EQ(run({"craft"}).code, kExitOk);
  ASSERT_EQ(run({"generate"}).code, kExitOk);
  const auto e = run({"eval", "--repeats", "1"});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  EXPECT_TRUE(fs::exists(out("split.json")));
  const auto records = read_records(out("records_text.jsonl"));
  ASSERT_FALSE(records.empty());
  for (const auto& rec : records) EXPECT_TRUE(rec.correct) << rec.question_id;

  const auto r = run({"report"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto csv = read_file(out("report_text.csv"));
  EXPECT_NE(csv.find("text,overall,all,"), std::string::npos);
  EXPECT_NE(csv.find(",100.00,100.00\n"), std::string::npos) << csv;
  EXPECT_TRUE(fs::exists(out("report_text.md")));

  const auto rag = run({"eval", "--repeats", "1", "--rag", "--cot"});
  EXPECT_EQ(rag.code, kExitOk) << rag.err;
  EXPECT_TRUE(fs::exists(out("records_text+cot+rag.jsonl")));
}

TEST_F(CliTest, ReportWithoutRecordsFails) {
  const auto r = run({"report"});
  EXPECT_NE(r.code, kExitOk);
}

TEST_F(CliTest, UnreachableModelAnswersAreRecordedAsFailures) {
  ASSERT_EQ(run({"craft"}).code, kExitOk);
  ASSERT_EQ(run({"generate"}).code, kExitOk);
  const auto replay = (dir_ / "replay.jsonl").string();
  write_file(replay, "");
  write_config(base_config() + "  model: {backend: replay, file: " + replay + "}\n");
  const auto r = run({"eval", "--repeats", "1"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  for (const auto& rec : read_records(out("records_text.jsonl"))) EXPECT_TRUE(rec.failed);
}

TEST_F(CliTest, PipelineIsIdempotent) {
  const std::vector<std::string> names{"hierarchy.yaml", "dataset.jsonl", "generation_audit.jsonl",
                                       "review_queue.jsonl", "split.json", "records_text.jsonl",
                                       "report_text.csv", "report_text.md"};
  auto pipeline = [&] {
    for (const auto& cmd : {"craft", "generate", "eval", "report"}) ASSERT_EQ(run({cmd}).code, kExitOk) << cmd;
  };
  pipeline();
  std::map<std::string, std::string> first;
  for (const auto& n : names) first[n] = read_file(out(n));
  pipeline();
  for (const auto& n : names) {
    auto text = read_file(out(n));
    if (n == "records_text.jsonl") {
      // Latencies differ between runs; compare with them masked.
      static const std::regex latency(R"("latency_ms":[0-9.e+-]+)");
      EXPECT_EQ(std::regex_replace(text, latency, ""), std::regex_replace(first[n], latency, "")) << n;
    } else {
      EXPECT_EQ(text, first[n]) << n;
    }
  }
}

}  // namespace
