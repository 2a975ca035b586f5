#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace drivecombo::prompts {

// A rendered two-part prompt.
struct ChatPrompt {
  std::string system;
  std::string user;

  // Single-text form: system, blank line, user.
  std::string text() const { return system + "\n\n" + user; }
  bool operator==(const ChatPrompt&) const = default;
};

// "two" .. "five"; throws std::out_of_range outside 2..5.
std::string_view count_word(std::size_t n);

// Rule-combination coexistence check (answers 0/1 plus reasoning).
ChatPrompt coexistence(const std::vector<std::string>& rule_contents);

// MCQ generation, one template per level band. `rule_contents` holds exactly
// one entry for level 1 and 2..5 entries otherwise.
ChatPrompt mcq_generation_level1(const std::string& rule_content);
ChatPrompt mcq_generation_level2to4(const std::vector<std::string>& rule_contents);
ChatPrompt mcq_generation_level5(const std::vector<std::string>& rule_contents);

// Validator prompt; `question_json` is the MCQ in the generation schema.
ChatPrompt mcq_check(const std::string& question_json);

ChatPrompt semantic_structuring(const std::string& traffic_rule);
ChatPrompt dsl_translation(const std::string& scene_text, const std::string& rule_text);

enum class QualityStage { SemanticStructuring, Coexistence, Transcription, DslTranslation };

// Scorer prompt for one pipeline stage; answers a single float in [0,1].
ChatPrompt quality_scoring(QualityStage stage, const std::string& stage_prompt, const std::string& stage_output);

// Evaluation prompts. `options` is already rendered ("A. ...\nB. ...").
ChatPrompt test_visual(const std::string& scenario_placeholder, const std::string& stem, const std::string& options);
ChatPrompt test_text(const std::string& scenario_text, const std::string& stem, const std::string& options);

// The fixed step-by-step instruction used for chain-of-thought runs.
inline constexpr std::string_view kChainOfThought = "Let's think step by step.";

// The arbitration order as it appears in the level-5 template.
inline constexpr std::string_view kPriorityHierarchy =
    "Pedestrian life safety > Emergency avoidance vehicles > On-site command personnel > Traffic lights > "
    "Traffic signs > Road markings > Interactive right-of-way > Defensive driving > Emergency exceptions.";

}  // namespace drivecombo::prompts
