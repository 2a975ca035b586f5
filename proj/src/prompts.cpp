#include "drivecombo/prompts.hpp"

#include <array>
#include <stdexcept>

namespace drivecombo::prompts {

namespace {

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
}

// Numbered rule slots; slots past the second carry the "(if necessary)" label
// and are omitted when unused.
std::string rule_slots(const std::vector<std::string>& contents, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < contents.size(); ++i) {
    out += "Input Rule " + std::to_string(i + 1);
    out += i >= 2 ? " (if necessary): " : ": ";
    out += contents[i];
    out += sep;
  }
  return out;
}

void require_multi(const std::vector<std::string>& contents) {
  if (contents.size() < 2 || contents.size() > 5)
    throw std::invalid_argument("multi-rule prompts take 2..5 rules, got " + std::to_string(contents.size()));
}

constexpr std::string_view kJsonFormat = R"(    {
        "Scenario Description": "...",
        "Question Stem": "...",
        "Options": {
            "A": "...",
            "B": "...",
            "C": "...",
            "D": "..."
        },
        "Question Design Logic": "...",
        "Correct Answer Option": "...",
        "Explanation of the Correct Answer": "..."
    }.)";

constexpr std::string_view kLevel1System = R"(You are a question-generation assistant proficient in traffic regulations.

I will give you a driving rule. Please generate an autonomous driving test case based on the given traffic regulation clause. Output the result in JSON format, including the following fields: {scenario description, question stem, options (one correct option and three distractors), question logic, correct answer option, and an explanation of the correct answer}. The question design should follow these principles:

1. Ensure that the options have similar semantics to prevent the model from guessing based on surface-level wording.

2. To increase the difficulty of the question, avoid including any explicit safety-related cues or contextual hints in the scenario description, question stem, or options that could reveal the correct answer.

3. Use vague or implicit semantic descriptions: remove direct hints and instead imply trigger conditions through sensor data or subtle scene details to stimulate the model's reasoning and judgment abilities.

4. When designing the correct answer, create options that are “counterintuitive yet reasonable.” Avoid making “the safest choice” automatically the correct one — the goal is to make “safest” not equal to “most compliant.”

5. If a regulation contains multiple triggering conditions, select only one to construct the test scenario. For example, if a regulation states: “When driving at night, in rain or fog, or when visibility is poor and the safe distance cannot be confirmed, lane changes are prohibited,” choose only one weather condition (e.g., rain) as the trigger.

Please remember that you should output json without any other output, the format of json is:

{JSON_FORMAT}

Example 1 :

Input Rule: Other vehicles and pedestrians shall yield to vehicles performing emergency duties.

Output JSON:

    {
        "Scenario Description": "An autonomous vehicle is driving on an urban main road. The ambulance is rapidly approaching from behind. The current lane is congested, and surrounding vehicles are reacting differently—some slow down and move aside, while others maintain their speed.",
        "Question Stem": "As the driver, how should you respond correctly in this situation?",
        "Options": {
            "A": "Immediately pull over and stop to make way for the ambulance to pass first.",
            "B": "Maintain the current speed and avoid changing lanes to prevent traffic confusion.",
            "C": "Accelerate to leave the area quickly and avoid crossing paths with the ambulance.",
            "D": "Continue driving along the planned route and only consider yielding when the ambulance is within 5 meters."
        },
        "Question Design Logic": "This question examines whether an autonomous driving system adheres to legal requirements upon detecting an emergency vehicle, rather than merely following standard traffic flow strategies. The scenario implies the presence of an “emergency-response vehicle” through auditory and visual cues—such as sirens and red-blue flashing lights—without explicitly stating instructions like “pull over immediately.” This design tests whether the system can infer the obligation to yield based on contextual features.Option A represents lawful behavior in accordance with Article 53 of the Road Traffic Safety Law. Options B and D, though appearing to “maintain order,” fail to promptly fulfill the duty to yield. Option C reflects a common “counterintuitive yet unlawful” response—accelerating to avoid interference, which in fact obstructs emergency passage.The key focus of the question lies in whether the model can correctly prioritize between “traffic flow stability” and “emergency right-of-way,” recognizing the higher legal precedence of the latter.",
        "Correct Answer Option": "B",
        "Explanation of the Correct Answer": "According to Article 53 of the Road Traffic Safety Law, other vehicles and pedestrians must yield to vehicles performing emergency duties. When an autonomous system detects emergency vehicles such as ambulances, fire trucks, or police cars, it should proactively slow down and pull over to allow them to pass. Option A correctly reflects the yielding principle. Option B avoids lane changes but fails to fulfill the yielding obligation; Option C creates a potential safety hazard by accelerating; Option D's conditional yielding violates the requirement for immediate cooperation."
    }

Example 2 : ...)";

constexpr std::string_view kLevel2to4System = R"(You are a question-generation assistant proficient in traffic regulations.

I will give you {N} driving rules. Please generate an autonomous driving test case based on the {N} given traffic regulation clauses. Output the result in JSON format, including the following fields: {scenario description, question stem, options (one correct option and three distractors), question logic, correct answer option, and an explanation of the correct answer}. The question design should follow these principles:

1. Ensure that the options have similar semantics to prevent the model from guessing based on surface-level wording.

2. To increase the difficulty of the question, avoid including any explicit safety-related cues or contextual hints in the scenario description, question stem, or options that could reveal the correct answer.

3. Use vague or implicit semantic descriptions: remove direct hints and instead imply trigger conditions through sensor data or subtle scene details to stimulate the model's reasoning and judgment abilities.

4. When designing the correct answer, create options that are “counterintuitive yet reasonable.” Avoid making “the safest choice” automatically the correct one — the goal is to make “safest” not equal to “most compliant.”

5. If a regulation contains multiple triggering conditions, select only one to construct the test scenario. For example, if a regulation states: “When driving at night, in rain or fog, or when visibility is poor and the safe distance cannot be confirmed, lane changes are prohibited,” choose only one weather condition (e.g., rain) as the trigger.

Please remember that you should output json without any other output, the format of json is:

{JSON_FORMAT}

Example 1 :

Input Rule 1: When driving on a narrow bridge ...

Input Rule 2: When lane markings are dashed ...

Input Rule 3 (if necessary) : ...

Input Rule 4 (if necessary) : ...

Input Rule 5 (if necessary) : ...

Output JSON:

    {
        "Scenario Description": "The ego vehicle is driving along a two-way ...",
        "Question Stem": "As the driver, how should you respond correctly in this situation?",
        "Options": {
            "A": "Quickly overtake the front ...",
            "B": "Slow down, maintain a safe ...",
            "C": "Briefly use the oncoming ...",
            "D": "Honk in advance to alert ..."
        },
        "Question Design Logic": "This question combines two traffic ...",
        "Correct Answer Option": "B",
        "Explanation of the Correct Answer": "Option B represents compliant behavior: maintaining ..."
    }

Example 2 : ...)";

constexpr std::string_view kLevel5System = R"(I will give you {N} driving rules. Please generate an autonomous driving test case based on the {N} given traffic regulation clauses. The case should create a priority conflict that requires the test taker to make a judgment. Output the result in JSON format, including the following fields: {scenario description, question stem, options (one correct option and three distractors), question logic, correct answer option, and an explanation of the correct answer}. The question design should follow these principles:

1. You must select the regulation with the higher priority from the {N} given inputs as the correct answer when creating the question. The priority hierarchy of traffic regulations is as follows:
{PRIORITY}

2. Ensure that the answer options have similar semantic meanings, to prevent the model from guessing based on surface-level wording.

3. To increase the difficulty level, avoid explicit safety cues in the scenario description, question stem, and answer options. Do not include context that clearly suggests which choice is safer or more correct.

4. The scenario should not fully satisfy any single rule; instead, place it in a borderline condition so that the test taker must decide whether it “qualifies.” For example, when describing environmental conditions, be ambiguous—avoid direct statements like “poor visibility” or “low visibility.” Instead, describe how sensors behave, letting the test taker infer whether the rule should be triggered.

5. When designing the correct answer, make it “counterintuitive but reasonable.” Avoid making “the safest option” always the correct one. The correct answer should reflect regulatory compliance, not simply maximum safety.

6. If a regulation contains multiple trigger conditions, choose only one to build the test scenario. For example, if a rule states: “When driving at night, in rain/fog, or under poor visibility where safe distance cannot be confirmed, lane changes are prohibited,” select just one condition (e.g., nighttime) as the trigger.

7. The options must represent specific driving actions. If the {N} input regulations concern lane-change behavior, the scenario should feature a multi-lane road, and the answer options could be: changing lanes to the left, changing lanes to the right, keeping the current lane, or other relevant maneuvers.

Please remember that you should output json without any other output, the format of json is:

{JSON_FORMAT}

Example 1 :

Input Rule 1: When it is nighttime ...

Input Rule 2: When the driver needs ...

Input Rule 3 (if necessary) : ...

Input Rule 4 (if necessary) : ...

Input Rule 5 (if necessary) : ...

Output JSON:

    {
        "Scenario Description": "The ego vehicle is ...",
        "Question Stem": "As the driver, how should you respond correctly in this situation?",
        "Options": {
            "A": "Take advantage of a brief gap ...",
            "B": "Stay in the current lane ...",
            "C": "Slightly adjust the driving ...",
            "D": "Brake firmly and stop ..."
        },
        "Question Design Logic": "Regulation 1: 'When it is nighttime, raining, foggy, or when the safe distance cannot ...",
        "Correct Answer Option": "B",
        "Explanation of the Correct Answer": "Although the fallen cone ahead is an obstacle ..."
    }

Example 2 : ...)";

constexpr std::string_view kCheckSystem = R"(Your task is to act as a rigorous evaluator of a generated driving-rule MCQ question. I will provide one question in JSON format. Your goal is to determine whether the question is logically valid and fully consistent with the traffic rules, based on four criteria:

1. Correctness of the Answer:
   - The “Correct Answer Option” must be logically correct.
   - The explanation must be sound, and no other option may also be correct.

2. Faithfulness to the Input Rules:
   - The scenario must accurately incorporate all and only the rules implied in the question design.
   - No part of the scenario should contradict the rule conditions.

3. Quality of the Options:
   - There must be exactly four options (A, B, C, D).
   - The distractors must be plausible but incorrect.
   - No option may be ambiguous or require unstated assumptions.

4. Structural Completeness:
   - The JSON must include: Scenario Description, Question Stem, Options,
     Correct Answer Option, and Explanation.
   - All parts must be internally coherent.

After checking all criteria:

- If ANY criterion fails → Output 0, followed by the reasoning.

- If ALL criteria pass → Output 1, followed by the reasoning.

Example 1 :

Input Question Json:

    {
        "Scenario Description": "A foggy day with visibility below 40 meters.",
        "Question Stem": "What is the correct speed?",
        "Options": {
            "A": "70 km/h",
            "B": "30 km/h",
            "C": "Turn right",
            "D": "High beam"
        },
        "Question Design Logic": "Low-visibility speed rule.",
        "Correct Answer Option": "A",
        "Explanation of the Correct Answer": "High speed is acceptable in fog."
    }

Output Decision: 0

Output Reasoning: The selected answer violates low-visibility speed rules; distractors include irrelevant actions; the explanation contradicts the rule. Therefore, the question is invalid.

Example 2 : ...)";

constexpr std::string_view kStructuringSystem = R"(You are an expert assistant proficient in analyzing and structuring traffic regulations.

I will give you a natural-language traffic rule. Your task is to transform this rule into a normalized atomic structure by extracting exactly the following five fields:

1. Rule Content:
   A concise restatement of the core meaning of the rule without ambiguity.
   The restatement must follow the template: "When [condition], the driver may / must / must not [action]."

2. Perceptual Type:
   Categorize the rule as
     "static"  (triggered by signs, markings, road type, fixed conditions), or
     "dynamic" (triggered by interactions with other vehicles, pedestrians, or changing traffic flow).

3. Norm Type:
   Determine whether the rule is
     "obligatory"  (the driver must perform the action),
     "forbidden"   (the driver must not perform the action), or
     "permissive"  (the driver may perform the action).

4. Action Type:
   The primary driving action described by the rule (e.g., overtake, left turn, right turn, lane change, merge, acceleration, deceleration, signaling, yielding, parking, etc.).

5. Numeric Constraints (if applicable):
   Extract any explicit speed limits.

You must output the result strictly in the following JSON format:

    {
        "rule_content": "...",
        "perceptual_type": "...",
        "norm_type": "...",
        "action_type": "...",
        "numeric_constraints": "..."
    }

Guidelines:
- Do NOT add any additional fields.
- Do NOT invent content beyond what the rule states.
- Keep each field concise but semantically complete.

Example 1 :

Input Rule: When visibility is below 50 meters due to heavy fog, the driver must reduce speed to at most 30 km/h.

Output JSON:

    {
        "rule_content": "When visibility falls below 50 meters, must slow to 30 km/h. ",
        "perceptual_type": "static",
        "norm_type": "obligatory",
        "action_type": "speed limit",
        "numeric_constraints": {
            "upper bound": 30
            "lower bound": 0
        },
    }

Example 2 :

Input Rule: Drivers must not overtake when a solid yellow centerline is present.

Output JSON:

    {
        "rule_content": "When a solid yellow centerline is present, the driver must not overtake.",
        "perceptual_type": "static",
        "norm_type": "forbidden",
        "action_type": "overtake",
        "numeric_constraints": "none"
    })";

constexpr std::string_view kCoexistenceSystem = R"(I aim to combine atomic traffic regulations to form new, more complex composite regulations. I will input {N} such atomic regulations, and your task is to determine whether these {N} input regulations are compatible in terms of both scenario and strategy—that is, whether they can coexist within the same context. The specific detection procedure is as follows:

1. For each traffic regulation, extract the context refers to the situational conditions under which the regulation applies.

2. Examine whether their contexts are mutually exclusive. Two contexts are considered mutually exclusive if the physical scenarios they describe cannot coexist in the same space-time.

After the above checks, if the contexts of these {N} regulations are mutually exclusive, output 0; if they are compatible, output 1, along with the reasoning.

Example 1 :

Input Rule 1: "In foggy conditions, motor vehicles shall reduce their driving speed."
Input Rule 2: "When the road surface is icy, motor vehicles shall reduce their driving speed."

Output: 1.
Reasoning: Fog and icy road conditions may occur simultaneously; both describe adverse weather conditions and can coexist.

Example 2 :

Input Rule 1: "When an on-ramp or branch road has an acceleration lane and traffic signs permit, the ego vehicle may merge into the main road."
Input Rule 2: "When there is a “No Entry” or “No Merging” sign, the ego vehicle is prohibited from merging into the main road."
Input Rule 3: "When the area between the ramp or service road and the main road is marked with a solid line or a hatched/guide line area, the ego vehicle is prohibited from merging into the main road."

Output: 0.
Reasoning: These rules cannot be combined because they describe mutually exclusive scenarios. Rule 1 only applies when merging is permitted (acceleration lane present and signs allow), while Rule 2 prohibits merging when “No Entry” or “No Merging” signs are present, and Rule 3 prohibits merging when solid or hatched lines are present. The “permitted” condition of Rule 1 and the “prohibited” conditions of Rules 2 and 3 cannot exist simultaneously in the same place and time (permission and prohibition cannot coexist). Although Rules 2 and 3 can coexist and jointly reinforce the prohibition, Rule 1 conflicts with both, so overall, they cannot logically coexist or be combined.

Example 3 : ...)";

constexpr std::string_view kDslSystem = R"(You are an expert assistant in autonomous driving test scenario generation.

You will be given:
(1) a textual scenario description derived from traffic rules;
(2) a DSL specification that defines the syntax and structure of executable driving scenarios;
(3) an example DSL illustrating how rule conditions map to YAML-based scene definitions.

Your task is to translate the scenario description into a structured semantic DSL representation.

The generated DSL must explicitly encode:

1. Entities: ego vehicle, other vehicles, pedestrians, static obstacles, traffic lights, etc.

2. Spatial Relations: relative positions (ahead of, behind, left of, right of), lane index,
   distance relations, orientation, and spatial layout.

3. Environment: road type, lane geometry, weather, visibility, time of day.

4. Behavioral Trajectories: initial poses, intended paths, speed profiles, and motion behaviors.

5. Rule Satisfaction: every constraint implied by the traffic rules must appear explicitly in the DSL.

Final Requirement:
Output only the YAML DSL scenario.
Do not output explanations, comments, or any additional text.

Example 1 :

Input Scenario Description:
"The ego vehicle is traveling in the leftmost lane of a three-lane urban road. The navigation system indicates that the vehicle needs to exit at the next intersection 200 meters ahead, which requires the vehicle to be in the rightmost lane. The vehicles in the adjacent lanes are moving at similar speeds."

Input Traffic Rules: Navigation requires lane change toward the rightmost lane before reaching an exit.

Output DSL (YAML):

environment:
  weather: sunny
  time: daytime

road_network:
  road_type: intersection
  road_marker: solid_line
  traffic_signs:
    - traffic_light

actors:

  - id: ego
    type: car
    position:
      reference: intersection
      relation: behind
    behavior: turn_right

  - id: vehicle_1
    type: car
    position:
      reference: intersection
      relation: front
    behavior: go_forward

  - id: vehicle_2
    type: car
    position:
      reference: ego
      relation: right
    behavior: turn_right

    ...

oracle:
  longitudinal: go_forward
  lateral: keep_lane

Example 2 :...)";

struct QualityTemplate {
  std::string_view system;
  std::string_view prompt_label;
  std::string_view output_label;
};

constexpr QualityTemplate kQualitySemantic{
    R"(You are an expert evaluator in traffic-rule parsing.
You will be given (1) the exact prompt used to generate the semantic-structuring output,
and (2) the model output produced by that prompt.

Your task is to assign a quality score in the range [0, 1] evaluating:

1. Correctness: whether the structured fields reflect the original rule described in the prompt.

2. Completeness: whether all required fields (rule content, perceptual type, norm type, action type, numeric constraints) are present.

3. Fidelity: whether the model output introduces no hallucinations or distortions relative to the prompt.

Output only a floating-point score in [0,1].

Do not output explanations or text.

The final output format must be:

    <score>)",
    "Semantic Structuring Prompt", "Semantic Structuring Output"};

constexpr QualityTemplate kQualityCoexistence{
    R"(You are an expert evaluator in multi-rule compatibility reasoning.
You will be given (1) the exact prompt used to perform coexistence validation,
and (2) the model output generated by that prompt.

Your task is to assign a score in [0,1] evaluating:

1. Logical validity: whether the compatibility judgment (0/1) matches the true feasibility implied by the rules.

2. Scenario correctness: whether the reasoning in the output aligns with the real-world spatial and temporal constraints described in the prompt.

3. Fidelity to rules: whether the model correctly interprets the rules without inventing new conditions.

Output only a score in [0,1].
No text, no reasoning.

    <score>)",
    "Coexistence Validation Prompt", "Coexistence Validation Output"};

constexpr QualityTemplate kQualityTranscription{
    R"(You are an expert evaluator in autonomous driving scenario creation.
You will be given (1) the scenario-transcription prompt used to generate a textual driving scene,
and (2) the model output produced by that prompt.

Your task is to assign a score in [0,1] evaluating:

1. Faithfulness: whether the scene description accurately reflects the traffic rule constraints included in the prompt.

2. Coherence: whether the scene is internally consistent (actors, road type, environment).

3. Relevance: whether the scene directly corresponds to the intended rule semantics without omitting or fabricating conditions.

Output only a floating-point score in [0,1].

    <score>)",
    "Scenario Transcription Prompt", "Scenario Transcription Output"};

constexpr QualityTemplate kQualityDsl{
    R"(You are an expert evaluator for structured scenario representation and DSL authoring.
You will be given (1) the DSL-translation prompt used to generate a YAML/DSL scenario,
and (2) the model output produced by that prompt.

Your task is to assign a score in [0,1] evaluating:

1. Structural correctness: whether the DSL syntax follows the schema implied by the prompt.

2. Semantic alignment: whether entities, relations, road network, and environment accurately reflect the scenario description in the prompt.

3. Executability: whether the DSL can be reliably executed in CARLA without contradictions.

Output only a floating-point score in [0,1].

    <score>)",
    "DSL Translation Prompt", "DSL Translation Output"};

constexpr std::string_view kTestVisualSystem = R"(You are a driver assistant. Your task is to answer the question based on the scenario description and question stem.

The scenario description will be provided in the image.

Please answer the question based on the scenario description shown in the image and question stem.

Please return the answer in the format of "A", "B", "C", or "D". And give the reason for your answer.)";

constexpr std::string_view kTestTextSystem = R"(You are a driver assistant. Your task is to answer the question based on the scenario description and question stem.

Please answer the question based on the scenario description and question stem.

Please return the answer in the format of "A", "B", "C", or "D". And give the reason for your answer.)";

std::string fill(std::string_view tmpl, std::size_t n) {
  std::string s(tmpl);
  replace_all(s, "{JSON_FORMAT}", kJsonFormat);
  replace_all(s, "{PRIORITY}", kPriorityHierarchy);
  if (n > 0) replace_all(s, "{N}", count_word(n));
  return s;
}

}  // namespace

std::string_view count_word(std::size_t n) {
  static constexpr std::array<std::string_view, 4> kWords{"two", "three", "four", "five"};
  if (n < 2 || n > 5) throw std::out_of_range("rule count must be 2..5");
  return kWords[n - 2];
}

ChatPrompt coexistence(const std::vector<std::string>& rule_contents) {
  require_multi(rule_contents);
  return {fill(kCoexistenceSystem, rule_contents.size()), rule_slots(rule_contents, "\n") + "Output:"};
}

ChatPrompt mcq_generation_level1(const std::string& rule_content) {
  return {fill(kLevel1System, 0), "Input Rule: " + rule_content + "\n\nOutput JSON:"};
}

ChatPrompt mcq_generation_level2to4(const std::vector<std::string>& rule_contents) {
  require_multi(rule_contents);
  return {fill(kLevel2to4System, rule_contents.size()), rule_slots(rule_contents, "\n\n") + "Output JSON:"};
}

ChatPrompt mcq_generation_level5(const std::vector<std::string>& rule_contents) {
  require_multi(rule_contents);
  return {fill(kLevel5System, rule_contents.size()), rule_slots(rule_contents, "\n\n") + "Output JSON:"};
}

ChatPrompt mcq_check(const std::string& question_json) {
  return {std::string(kCheckSystem),
          "Input Question Json: " + question_json + "\n\nOutput Decision:\n\nOutput Reasoning:"};
}

ChatPrompt semantic_structuring(const std::string& traffic_rule) {
  return {std::string(kStructuringSystem), "Input Rule: " + traffic_rule + "\n\nOutput JSON:"};
}

ChatPrompt dsl_translation(const std::string& scene_text, const std::string& rule_text) {
  return {std::string(kDslSystem),
          "Scenario Description: " + scene_text + "\nTraffic Rules: " + rule_text + "\nOutput YAML DSL:"};
}

ChatPrompt quality_scoring(QualityStage stage, const std::string& stage_prompt, const std::string& stage_output) {
  const QualityTemplate* t = nullptr;
  switch (stage) {
    case QualityStage::SemanticStructuring: t = &kQualitySemantic; break;
    case QualityStage::Coexistence: t = &kQualityCoexistence; break;
    case QualityStage::Transcription: t = &kQualityTranscription; break;
    case QualityStage::DslTranslation: t = &kQualityDsl; break;
  }
  std::string user;
  user += std::string(t->prompt_label) + ":\n" + stage_prompt + "\n\n";
  user += std::string(t->output_label) + ":\n" + stage_output + "\n\n";
  user += "Output Score:";
  return {std::string(t->system), user};
}

ChatPrompt test_visual(const std::string& scenario_placeholder, const std::string& stem, const std::string& options) {
  return {std::string(kTestVisualSystem), "Scenario Description: " + scenario_placeholder + "\n\nQuestion Stem: " +
                                              stem + "\n\nOptions: " + options + "\n\nOutput:"};
}

ChatPrompt test_text(const std::string& scenario_text, const std::string& stem, const std::string& options) {
  return {std::string(kTestTextSystem), "Scenario Description: " + scenario_text + "\n\nQuestion Stem: " + stem +
                                            "\n\nOptions: " + options + "\n\nOutput:"};
}

}  // namespace drivecombo::prompts
