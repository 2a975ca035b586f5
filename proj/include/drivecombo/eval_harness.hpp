#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "drivecombo/chat_endpoint.hpp"
#include "drivecombo/mcq_builder.hpp"

namespace drivecombo {

// ── Split ───────────────────────────────────────────────────────────────────

struct BenchmarkSplit {
  std::vector<std::string> train;  // sorted ids
  std::vector<std::string> test;   // sorted ids
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

inline constexpr double kTestFraction = 0.2;

// Level-1 questions always go to train. Composite questions (level >= 2) are
// stratified by (level, jurisdiction); |test| = round(0.2 * composites), with
// per-stratum quotas by largest remainder. A stratum with fewer than 5 items
// cannot put one item on each side at that ratio: it is merged into its
// level's pool, then into a global pool, and a warning is recorded.
// Throws ValidationError for an empty input or duplicate ids.
BenchmarkSplit split_dataset(const std::vector<Mcq>& questions, std::uint64_t seed);

// ── Conditions and prompts ──────────────────────────────────────────────────

enum class Variant { Visual, Text };

template <>
struct EnumTraits<Variant> {
  static constexpr std::array entries{
      EnumEntry<Variant>{Variant::Visual, "visual"},
      EnumEntry<Variant>{Variant::Text, "text"},
  };
};

struct Condition {
  Variant variant = Variant::Text;
  bool cot = false;
  bool rag = false;

  // "text", "visual+cot", "text+cot+rag", ...
  std::string label() const;
  static Condition parse(std::string_view label);
  bool operator==(const Condition&) const = default;
};

// Text variant of a question: frames dropped, options and gold unchanged.
// Throws ValidationError when the question has no scene text.
Mcq derive_text_variant(const Mcq& mcq);

struct Passage {
  std::string id;  // "<source>#<n>"
  std::optional<Jurisdiction> jurisdiction;
  std::string text;

  bool operator==(const Passage&) const = default;
};

// Splits rule-book text into one passage per article. An article starts at a
// line beginning with "Article", "Section", "Rule" or "Regulation" followed by
// a number; text before the first heading is its own passage. Without any
// heading the text is split on blank lines.
std::vector<Passage> chunk_rule_book(const std::string& text, const std::string& source,
                                     std::optional<Jurisdiction> jurisdiction = std::nullopt);

// Every *.txt file in `dir`; the stem names the jurisdiction when it is a
// jurisdiction token ("china.txt"). Files are read in name order.
std::vector<Passage> load_rule_books(const std::string& dir);

// Lowercase alphanumeric terms, stop words removed.
std::vector<std::string> tokenize(std::string_view text);

class Retriever {
 public:
  virtual ~Retriever() = default;
  // At most `k` passages, best first. When `jurisdiction` has passages of its
  // own, only those are searched.
  virtual std::vector<Passage> retrieve(const std::string& query, std::size_t k,
                                        std::optional<Jurisdiction> jurisdiction) const = 0;
};

// Okapi BM25 over the passages; ties keep corpus order. A pool smaller than
// k returns all of it, including passages with zero score.
class Bm25Retriever final : public Retriever {
 public:
  explicit Bm25Retriever(std::vector<Passage> passages, double k1 = 1.2, double b = 0.75);
  std::vector<Passage> retrieve(const std::string& query, std::size_t k,
                                std::optional<Jurisdiction> jurisdiction) const override;
  std::size_t size() const { return passages_.size(); }

 private:
  double score(std::size_t doc, const std::vector<std::string>& query_terms, const std::vector<std::size_t>& pool,
               const std::map<std::string, std::size_t>& df, double avg_len) const;

  std::vector<Passage> passages_;
  std::vector<std::map<std::string, std::size_t>> term_counts_;
  std::vector<std::size_t> lengths_;
  double k1_;
  double b_;
};

inline constexpr std::size_t kRagPassages = 5;
// Stands in for the scene in the visual template; the frames travel as images.
inline constexpr std::string_view kFramePlaceholder = "[see the attached scene frames]";

// Request for one question under one condition, decoding pinned to greedy.
// The user message is: jurisdiction line, retrieved passages (RAG), the
// step-by-step instruction (CoT), then the test template. Throws
// ValidationError for a visual condition without frames or a text condition
// without scene text, ConfigError for RAG without a retriever.
ChatRequest build_prompt(const Mcq& mcq, const Condition& condition, const Retriever* retriever = nullptr);

// ── Running ─────────────────────────────────────────────────────────────────

// The first uppercase A, B, C or D that stands alone (no letter or digit on
// either side), scanning left to right. Covers "B", "\"B\"", "Answer: B",
// "(B)" and "The answer is B because...".
std::optional<char> extract_choice(std::string_view response);

struct EvalRecord {
  std::string question_id;
  int repeat = 1;  // 1-based
  Condition condition;
  std::string response;
  std::optional<char> extracted;
  bool correct = false;
  double latency_ms = 0.0;
  // Transport failed after the retry budget; the record is kept and scored wrong.
  bool failed = false;
  std::string error;

  bool operator==(const EvalRecord&) const = default;
};

// Request tag: "<question id>/<repeat>/<condition label>".
std::string eval_tag(const std::string& question_id, int repeat, const Condition& condition);

std::string record_to_jsonl(const EvalRecord& record);
EvalRecord record_from_json(const std::string& line);
void write_records(const std::string& path, const std::vector<EvalRecord>& records);
std::vector<EvalRecord> read_records(const std::string& path);

struct EvalOptions {
  int repeats = 3;
  std::size_t concurrency = 4;
  int transport_attempts = 3;
};

// One record per (question, repeat), ordered by question id then repeat.
// Throws ConfigError for a visual condition on an endpoint without image
// support and for repeats outside 1..3.
std::vector<EvalRecord> run_evaluation(const std::vector<Mcq>& questions, ChatEndpoint& model,
                                       const Condition& condition, const Retriever* retriever = nullptr,
                                       const EvalOptions& options = {});

// Evaluates the split's test questions, looked up in `dataset`.
std::vector<EvalRecord> run_evaluation(const BenchmarkSplit& split, const std::vector<Mcq>& dataset,
                                       ChatEndpoint& model, const Condition& condition,
                                       const Retriever* retriever = nullptr, const EvalOptions& options = {});

// ── Report ──────────────────────────────────────────────────────────────────

struct Cell {
  std::size_t correct = 0;
  std::size_t attempted = 0;

  bool operator==(const Cell&) const = default;
};

struct ReportRow {
  std::string dimension;  // "overall", "level", "jurisdiction", "num_rules"
  std::string stratum;    // "all", "L3", "China", "4"
  std::vector<Cell> runs; // index r holds repeat r + 1

  Cell total() const;
  // Percent with two decimals ("70.00"); nullopt for an empty stratum.
  std::optional<std::string> run_percent(std::size_t run) const;
  // Mean of the per-run accuracies over non-empty runs.
  std::optional<std::string> mean_percent() const;
};

struct Report {
  std::string condition;
  int repeats = 0;
  std::size_t records = 0;
  std::size_t unparsed = 0;            // no choice extracted
  std::size_t transport_failures = 0;  // subset of unparsed
  std::vector<ReportRow> rows;

  const ReportRow& row(std::string_view dimension, std::string_view stratum) const;
};

// Exact percentage of correct/attempted, half-up to two decimals.
std::string format_percent(std::size_t correct, std::size_t attempted);

// Rows: overall, L1..L5, each jurisdiction, num_rules 1..5. Throws
// ValidationError when a record names an unknown question, the records mix
// conditions, or there are no records.
Report compute_report(const std::vector<EvalRecord>& records, const std::vector<Mcq>& questions);

std::string report_csv(const Report& report);
std::string report_markdown(const Report& report);

}  // namespace drivecombo
