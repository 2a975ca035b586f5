#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "drivecombo/chat_endpoint.hpp"
#include "drivecombo/prompts.hpp"
#include "drivecombo/rule_crafter.hpp"

namespace drivecombo {

// Level-5 arbitration found no strict maximum among the members' priority classes.
class SamePriorityTie : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// What a compliant driver does for one action type. `norm` is the combined
// deontic status (obligatory: do it, forbidden: refrain, permissive: may do
// it). Speed directives carry the admissible interval instead.
struct ActionDirective {
  ActionType action = ActionType::Overtake;
  NormType norm = NormType::Obligatory;
  std::optional<SpeedRange> speed;
  // Members whose constraint the directive represents.
  std::vector<RuleId> sources;

  bool operator==(const ActionDirective&) const = default;
};

// Ground-truth action for a level-1 entry or a Feasible labeled combo.
// Throws SamePriorityTie for a level-5 combo without a unique top class.
ActionDirective determine_correct_action(const RuleCombo& combo, const RuleIndex& index);

// Plain-language rendering, e.g. "do not overtake" or "keep speed within [0, 30] km/h".
std::string describe(const ActionDirective& directive);

// ── Option matching ─────────────────────────────────────────────────────────

enum class Mention { Silent, Affirmed, Negated };

// How an option text refers to `action`: keyword hits from the action lexicon,
// negated when a negation cue precedes the hit inside the same clause.
Mention classify_mention(const std::string& option, ActionType action);

// Speeds written as "<number> km/h" (also kph, km per hour).
std::vector<double> extract_speeds(const std::string& option);

// 2 = explicitly compliant, 1 = silent, nullopt = violates the directive.
std::optional<int> option_score(const std::string& option, const ActionDirective& directive);

// The unique best-scoring option index (0..3), or nullopt when no option
// stands out or all violate.
std::optional<std::size_t> oracle_option(const std::array<std::string, 4>& options,
                                         const ActionDirective& directive);

// Lexicon phrase for composing options: "overtake the vehicle ahead", etc.
std::string action_phrase(ActionType action);

// ── MCQ records ─────────────────────────────────────────────────────────────

struct Mcq {
  std::string id;
  int level = 1;
  Jurisdiction jurisdiction = Jurisdiction::China;
  int num_rules = 1;
  std::vector<RuleId> rule_ids;
  std::string scenario_description;
  std::string question_stem;
  std::array<std::string, 4> options;  // A..D
  std::string design_logic;
  char correct_option = 'A';
  std::string explanation;
  // Four opaque frame attachments for the visual condition; empty if none.
  std::vector<std::string> frame_refs;
  // Textual scene description used by the text variant.
  std::optional<std::string> scene_text;

  bool operator==(const Mcq&) const = default;
};

// Type invariants; empty when valid.
std::vector<std::string> check_mcq(const Mcq& mcq);

// Stable id: "<jurisdiction>-L<level>-<member+member...>".
std::string mcq_id(Jurisdiction j, const RuleCombo& combo);

// Generation-schema JSON (the six fields only), compact.
std::string question_json(const Mcq& mcq);

// Dataset record: generation fields plus provenance. One line, stable key order.
std::string mcq_to_jsonl(const Mcq& mcq);
Mcq mcq_from_json(const std::string& line);
std::vector<Mcq> read_dataset(const std::string& path);
void write_dataset(const std::string& path, const std::vector<Mcq>& mcqs);

// "A. ...\nB. ...\nC. ...\nD. ..."
std::string render_options(const Mcq& mcq);

// ── Generation ──────────────────────────────────────────────────────────────

// Throws ValidationError when `level` disagrees with the combo.
prompts::ChatPrompt render_generation_prompt(const RuleCombo& combo, const RuleIndex& index, int level);

struct GeneratedFields {
  std::string scenario_description;
  std::string question_stem;
  std::array<std::string, 4> options;
  std::string design_logic;
  char correct_option = 'A';
  std::string explanation;
};

// Parses generator output against the exact six-field schema (a surrounding
// ```json fence is tolerated). Throws ParseError naming the first problem.
GeneratedFields parse_generated(const std::string& text);

struct AuditRecord {
  std::string item;    // mcq or combo id
  std::string stage;   // "arbitration", "assembly", "consensus", "quality", "sample"
  std::string reason;
  std::string detail;

  bool operator==(const AuditRecord&) const = default;
};

struct AssemblyResult {
  std::optional<Mcq> mcq;
  std::vector<AuditRecord> audit;
  int attempts = 0;
  // Raw generator output of the accepted attempt (or the last one).
  std::string raw_output;
};

struct AssemblyOptions {
  int attempts = 3;
  // Transport retries per generator call.
  int transport_attempts = 3;
};

// Calls the generator until a schema-valid answer whose correct option
// matches the arbitration oracle comes back, up to `attempts` times.
// Propagates TransportError.
AssemblyResult assemble_mcq(const RuleCombo& combo, const RuleIndex& index, ChatEndpoint& generator,
                            const AssemblyOptions& options = {});

struct ValidationVerdict {
  std::array<int, 3> decisions{};
  std::array<std::string, 3> reasoning;
  bool accepted = false;
};

// Reads "Output Decision: 1", or a bare leading 0/1.
std::optional<int> parse_decision(const std::string& text);

// Unanimity over three judges. Unparseable judge output counts as 0;
// transport errors are retried `transport_attempts` times, then propagate.
ValidationVerdict consensus_validate(const Mcq& mcq, const std::array<ChatEndpoint*, 3>& judges,
                                     int transport_attempts = 3);

struct QualityScore {
  prompts::QualityStage stage = prompts::QualityStage::Transcription;
  std::array<double, 3> scores{};
  double mean = 0.0;
  bool flagged = false;
};

inline constexpr double kQualityThreshold = 0.6;

// Builds the flag (mean below `threshold`) from three scores in [0,1]. The
// mean is taken over micro-unit integers so decimal inputs compare exactly at
// the threshold.
QualityScore make_quality_score(prompts::QualityStage stage, const std::array<double, 3>& scores,
                                double threshold = kQualityThreshold);

// First number in the text if it lies in [0,1].
std::optional<double> parse_score(const std::string& text);

// Scorer output outside [0,1] (or non-numeric) is retried up to `attempts`;
// a scorer that never produces a valid value contributes 0.
QualityScore quality_score(prompts::QualityStage stage, const std::string& stage_prompt,
                           const std::string& stage_output, const std::array<ChatEndpoint*, 3>& scorers,
                           int attempts = 3, double threshold = kQualityThreshold);

// ceil(5% of n) items by seeded sampling without replacement, in input order.
std::vector<Mcq> sample_for_human_review(const std::vector<Mcq>& accepted, std::uint64_t seed);

struct ReviewItem {
  std::string id;
  std::string reason;  // "quality_flag" or "sampled"
  double quality_mean = 0.0;

  bool operator==(const ReviewItem&) const = default;
};

void append_review_queue(const std::string& path, const std::vector<ReviewItem>& items);
std::vector<ReviewItem> read_review_queue(const std::string& path);
std::string audit_to_jsonl(const std::vector<AuditRecord>& records);

struct GenerationOptions {
  AssemblyOptions assembly;
  int judge_transport_attempts = 3;
  int score_attempts = 3;
  double quality_threshold = kQualityThreshold;
  std::size_t max_in_flight = 4;
  std::uint64_t seed = 0;
  // Combos larger than this are not turned into questions.
  std::size_t max_rules = 5;
};

struct GenerationResult {
  std::vector<Mcq> accepted;  // ordered by level, then member ids
  std::vector<AuditRecord> audit;
  std::vector<ReviewItem> review;
  std::size_t attempted = 0;
  std::size_t rejected_by_consensus = 0;
};

// Runs arbitration, assembly, consensus and transcription scoring for every
// entry of the hierarchy, then samples accepted questions for review.
GenerationResult generate_dataset(const HierarchicalRuleSet& hierarchy, ChatEndpoint& generator,
                                  const std::array<ChatEndpoint*, 3>& judges,
                                  const std::array<ChatEndpoint*, 3>& scorers, const GenerationOptions& options = {});

// Offline generator: reads the rule contents from the prompt, looks the rules
// up by content, and writes a question whose options are composed from the
// action lexicon with the arbitration answer in a deterministic slot.
class TemplateGenerator final : public ChatEndpoint {
 public:
  explicit TemplateGenerator(std::vector<AtomicRule> rules);
  ChatResponse complete(const ChatRequest& request) override;

 private:
  std::vector<AtomicRule> rules_;
};

// Rule contents from "Input Rule: ..." / "Input Rule N[ (if necessary)]: ..." lines.
std::vector<std::string> input_rules_from_prompt(const std::string& user_text);

}  // namespace drivecombo
