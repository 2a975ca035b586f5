#include "drivecombo/mcq_builder.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numeric>
#include <regex>
#include <sstream>

namespace drivecombo {

using nlohmann::json;
using nlohmann::ordered_json;

// ── Arbitration ─────────────────────────────────────────────────────────────

namespace {

std::vector<const AtomicRule*> members_of(const RuleCombo& combo, const RuleIndex& index) {
  std::vector<const AtomicRule*> out;
  for (const auto& id : combo.members) out.push_back(&index.at(id));
  return out;
}

ActionDirective directive_of(const AtomicRule& r) {
  return {r.action_type, r.norm_type, r.speed_range, {r.id}};
}

}  // namespace

ActionDirective determine_correct_action(const RuleCombo& combo, const RuleIndex& index) {
  if (combo.members.empty()) throw ValidationError("empty combination");
  const auto rules = members_of(combo, index);
  if (rules.size() == 1) return directive_of(*rules.front());

  const auto labeled = combo.level == 0 ? derive_labels(combo, index) : combo;
  if (labeled.level == 5) {
    const AtomicRule* top = rules.front();
    for (const auto* r : rules)
      if (outranks(r->priority_class, top->priority_class)) top = r;
    for (const auto* r : rules) {
      if (r != top && r->priority_class == top->priority_class)
        throw SamePriorityTie("members '" + top->id.value + "' and '" + r->id.value + "' share priority class " +
                              std::string(to_token(top->priority_class)));
    }
    return directive_of(*top);
  }

  ActionDirective d;
  d.action = rules.front()->action_type;
  for (const auto* r : rules) d.sources.push_back(r->id);
  if (d.action == ActionType::SpeedLimit) {
    std::vector<SpeedRange> ranges;
    for (const auto* r : rules) ranges.push_back(*r->speed_range);
    d.norm = NormType::Obligatory;
    d.speed = intersect(ranges);
    if (!d.speed) throw ValidationError("speed ranges of a harmonious combination do not intersect");
    return d;
  }
  const auto has = [&](NormType n) {
    return std::any_of(rules.begin(), rules.end(), [n](const AtomicRule* r) { return r->norm_type == n; });
  };
  d.norm = has(NormType::Obligatory) ? NormType::Obligatory
           : has(NormType::Forbidden) ? NormType::Forbidden
                                      : NormType::Permissive;
  return d;
}

// ── Lexicon ─────────────────────────────────────────────────────────────────

namespace {

struct LexiconEntry {
  ActionType action;
  std::vector<std::string> keywords;
  std::string phrase;
};

const std::vector<LexiconEntry>& lexicon() {
  using A = ActionType;
  static const std::vector<LexiconEntry> entries{
      {A::Overtake, {"overtake", "overtaking", "pass the vehicle", "pass the truck", "pass the car"},
       "overtake the vehicle ahead"},
      {A::LeftTurn, {"turn left", "left turn", "turning left"}, "turn left at the junction"},
      {A::RightTurn, {"turn right", "right turn", "turning right"}, "turn right at the junction"},
      {A::UTurn, {"u-turn", "u turn", "turn around"}, "make a U-turn"},
      {A::LaneChange, {"change lane", "change lanes", "changing lanes", "lane change", "switch lanes"},
       "change lanes"},
      {A::MergeMainRoad, {"merge", "merging"}, "merge into the main road"},
      {A::EnterRamp, {"enter the ramp", "take the ramp", "onto the ramp", "exit ramp"}, "enter the ramp"},
      {A::Acceleration, {"accelerate", "speed up", "accelerating"}, "accelerate"},
      {A::Deceleration, {"slow down", "decelerate", "reduce speed", "reduce your speed", "decelerating"},
       "slow down"},
      {A::Reverse, {"reverse", "back up", "reversing"}, "reverse"},
      {A::EmergencyLaneUsage, {"emergency lane", "hard shoulder"}, "drive in the emergency lane"},
      {A::LeftTurnSignal, {"left turn signal", "left indicator", "signal left"}, "switch on the left turn signal"},
      {A::RightTurnSignal, {"right turn signal", "right indicator", "signal right"},
       "switch on the right turn signal"},
      {A::LowBeam, {"low beam", "dipped headlights", "dipped beam"}, "use the low beam"},
      {A::HighBeam, {"high beam", "full beam"}, "use the high beam"},
      {A::FlashingHeadlights, {"flash the headlights", "flash headlights", "flashing headlights"},
       "flash the headlights"},
      {A::DoubleFlashers, {"hazard lights", "hazard warning", "double flashers"}, "switch on the hazard lights"},
      {A::FogLights, {"fog light", "fog lights", "fog lamp", "fog lamps"}, "switch on the fog lights"},
      {A::PositionLights, {"position lights", "position light", "sidelights"}, "switch on the position lights"},
      {A::HonkHorn, {"honk", "horn"}, "honk the horn"},
      {A::TemporaryParking, {"park", "parking", "stop temporarily"}, "park temporarily at the roadside"},
      {A::PullOver, {"pull over"}, "pull over"},
      {A::Yield, {"yield", "give way", "giving way"}, "yield"},
      {A::SpeedLimit, {}, "keep the speed"},
  };
  return entries;
}

const LexiconEntry& entry_for(ActionType action) {
  for (const auto& e : lexicon())
    if (e.action == action) return e;
  throw std::logic_error("action without lexicon entry");
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-'; }

// Positions where `word` occurs with word boundaries on both sides.
std::vector<std::size_t> find_word(const std::string& text, const std::string& word) {
  std::vector<std::size_t> hits;
  for (std::size_t pos = text.find(word); pos != std::string::npos; pos = text.find(word, pos + 1)) {
    const bool left = pos == 0 || !is_word_char(text[pos - 1]);
    const std::size_t end = pos + word.size();
    const bool right = end >= text.size() || !is_word_char(text[end]);
    if (left && right) hits.push_back(pos);
  }
  return hits;
}

const std::vector<std::string> kNegationCues{"not", "never", "don't", "avoid", "refrain", "without", "no",
                                             "nor", "cannot", "mustn't", "shouldn't"};

// Clause boundaries for negation scope.
std::vector<std::string> clauses(const std::string& text) {
  static const std::regex split(R"([.;,:!?]|\band\b|\bbut\b|\bthen\b|\bwhile\b|\bor\b)");
  std::vector<std::string> out;
  std::sregex_token_iterator it(text.begin(), text.end(), split, -1), end;
  for (; it != end; ++it) out.push_back(it->str());
  return out;
}

}  // namespace

std::string action_phrase(ActionType action) { return entry_for(action).phrase; }

Mention classify_mention(const std::string& option, ActionType action) {
  std::string text = to_lower(option);
  const auto& own = entry_for(action);
  // Mask longer keywords of other actions that contain one of ours
  // ("left turn signal" must not count as a left turn).
  for (const auto& other : lexicon()) {
    if (other.action == action) continue;
    for (const auto& k2 : other.keywords) {
      const bool contains = std::any_of(own.keywords.begin(), own.keywords.end(), [&](const std::string& k) {
        return k2.size() > k.size() && k2.find(k) != std::string::npos;
      });
      if (!contains) continue;
      for (const auto pos : find_word(text, k2)) text.replace(pos, k2.size(), std::string(k2.size(), '#'));
    }
  }

  bool affirmed = false, negated = false;
  for (const auto& clause : clauses(text)) {
    for (const auto& k : own.keywords) {
      for (const auto pos : find_word(clause, k)) {
        const std::string before = clause.substr(0, pos);
        const bool neg = std::any_of(kNegationCues.begin(), kNegationCues.end(),
                                     [&](const std::string& cue) { return !find_word(before, cue).empty(); });
        (neg ? negated : affirmed) = true;
      }
    }
  }
  if (affirmed) return Mention::Affirmed;
  if (negated) return Mention::Negated;
  return Mention::Silent;
}

std::vector<double> extract_speeds(const std::string& option) {
  static const std::regex speed(R"((\d+(?:\.\d+)?)\s*(?:km/h|kmh|kph|km per hour|kilometers per hour))",
                                std::regex::icase);
  std::vector<double> out;
  for (std::sregex_iterator it(option.begin(), option.end(), speed), end; it != end; ++it)
    out.push_back(std::stod((*it)[1].str()));
  return out;
}

std::optional<int> option_score(const std::string& option, const ActionDirective& directive) {
  if (directive.action == ActionType::SpeedLimit) {
    const auto speeds = extract_speeds(option);
    if (speeds.empty()) return 1;
    for (const double v : speeds)
      if (!directive.speed || v < directive.speed->lower || v > directive.speed->upper) return std::nullopt;
    return 2;
  }
  const auto mention = classify_mention(option, directive.action);
  switch (directive.norm) {
    case NormType::Obligatory:
      if (mention == Mention::Negated) return std::nullopt;
      return mention == Mention::Affirmed ? 2 : 1;
    case NormType::Forbidden:
      if (mention == Mention::Affirmed) return std::nullopt;
      return mention == Mention::Negated ? 2 : 1;
    case NormType::Permissive:
      return mention == Mention::Affirmed ? 2 : 1;
  }
  return std::nullopt;
}

std::optional<std::size_t> oracle_option(const std::array<std::string, 4>& options, const ActionDirective& directive) {
  std::optional<std::size_t> best;
  int best_score = 0;
  bool tie = false;
  for (std::size_t i = 0; i < options.size(); ++i) {
    const auto s = option_score(options[i], directive);
    if (!s) continue;
    if (*s > best_score) {
      best = i;
      best_score = *s;
      tie = false;
    } else if (*s == best_score) {
      tie = true;
    }
  }
  if (!best || tie) return std::nullopt;
  return best;
}

std::string describe(const ActionDirective& d) {
  if (d.action == ActionType::SpeedLimit) {
    if (!d.speed) return "no admissible speed";
    return fmt::format("keep speed within [{}, {}] km/h", format_number(d.speed->lower), format_number(d.speed->upper));
  }
  const auto phrase = action_phrase(d.action);
  switch (d.norm) {
    case NormType::Obligatory: return phrase;
    case NormType::Forbidden: return "do not " + phrase;
    case NormType::Permissive: return "may " + phrase;
  }
  return phrase;
}

// ── Records ─────────────────────────────────────────────────────────────────

std::vector<std::string> check_mcq(const Mcq& m) {
  std::vector<std::string> out;
  if (m.id.empty()) out.push_back("id must be non-empty");
  if (m.level < 1 || m.level > 5) out.push_back("level must be 1..5");
  if (m.num_rules != static_cast<int>(m.rule_ids.size())) out.push_back("num_rules must equal the rule id count");
  if ((m.level == 1) != (m.num_rules == 1)) out.push_back("level 1 holds exactly the single-rule questions");
  if (m.correct_option < 'A' || m.correct_option > 'D') out.push_back("correct option must be A..D");
  for (std::size_t i = 0; i < 4; ++i)
    if (trim(m.options[i]).empty()) out.push_back(fmt::format("option {} is empty", char('A' + i)));
  if (trim(m.question_stem).empty()) out.push_back("question stem is empty");
  if (!m.frame_refs.empty() && m.frame_refs.size() != 4) out.push_back("frame_refs must hold 4 entries");
  return out;
}

std::string mcq_id(Jurisdiction j, const RuleCombo& combo) {
  std::string members;
  for (const auto& m : combo.members) members += (members.empty() ? "" : "+") + m.value;
  const int level = combo.members.size() == 1 ? 1 : combo.level;
  return fmt::format("{}-L{}-{}", to_token(j), level, members);
}

namespace {

ordered_json generation_fields(const Mcq& m) {
  ordered_json j;
  j["Scenario Description"] = m.scenario_description;
  j["Question Stem"] = m.question_stem;
  j["Options"] = ordered_json{{"A", m.options[0]}, {"B", m.options[1]}, {"C", m.options[2]}, {"D", m.options[3]}};
  j["Question Design Logic"] = m.design_logic;
  j["Correct Answer Option"] = std::string(1, m.correct_option);
  j["Explanation of the Correct Answer"] = m.explanation;
  return j;
}

constexpr std::array<const char*, 6> kSchemaKeys{"Scenario Description",  "Question Stem",
                                                 "Options",               "Question Design Logic",
                                                 "Correct Answer Option", "Explanation of the Correct Answer"};

}  // namespace

std::string question_json(const Mcq& mcq) { return generation_fields(mcq).dump(); }

std::string mcq_to_jsonl(const Mcq& m) {
  ordered_json j;
  j["id"] = m.id;
  j["level"] = m.level;
  j["jurisdiction"] = std::string(to_token(m.jurisdiction));
  j["num_rules"] = m.num_rules;
  j["rule_ids"] = ordered_json::array();
  for (const auto& r : m.rule_ids) j["rule_ids"].push_back(r.value);
  const auto fields = generation_fields(m);
  for (auto& [k, v] : fields.items()) j[k] = v;
  j["frame_refs"] = m.frame_refs;
  j["scene_text"] = m.scene_text ? ordered_json(*m.scene_text) : ordered_json(nullptr);
  return j.dump();
}

Mcq mcq_from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("mcq record: ") + e.what());
  }
  try {
    Mcq m;
    m.id = j.at("id").get<std::string>();
    m.level = j.at("level").get<int>();
    const auto jur = parse_token<Jurisdiction>(j.at("jurisdiction").get<std::string>());
    if (!jur) throw ParseError("mcq " + m.id + ": unknown jurisdiction");
    m.jurisdiction = *jur;
    m.num_rules = j.at("num_rules").get<int>();
    for (const auto& r : j.at("rule_ids")) m.rule_ids.push_back(RuleId{r.get<std::string>()});
    m.scenario_description = j.at("Scenario Description").get<std::string>();
    m.question_stem = j.at("Question Stem").get<std::string>();
    const auto& opts = j.at("Options");
    for (std::size_t i = 0; i < 4; ++i) m.options[i] = opts.at(std::string(1, char('A' + i))).get<std::string>();
    m.design_logic = j.at("Question Design Logic").get<std::string>();
    const auto correct = j.at("Correct Answer Option").get<std::string>();
    if (correct.size() != 1) throw ParseError("mcq " + m.id + ": bad correct option");
    m.correct_option = correct[0];
    m.explanation = j.at("Explanation of the Correct Answer").get<std::string>();
    if (j.contains("frame_refs")) m.frame_refs = j["frame_refs"].get<std::vector<std::string>>();
    if (j.contains("scene_text") && j["scene_text"].is_string()) m.scene_text = j["scene_text"].get<std::string>();
    if (const auto v = check_mcq(m); !v.empty()) throw ValidationError("mcq " + m.id + ": " + v.front());
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("mcq record: ") + e.what());
  }
}

std::vector<Mcq> read_dataset(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<Mcq> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    try {
      out.push_back(mcq_from_json(line));
    } catch (const ParseError& e) {
      throw ParseError(path + ": " + e.what(), n);
    }
  }
  return out;
}

void write_dataset(const std::string& path, const std::vector<Mcq>& mcqs) {
  std::string out;
  for (const auto& m : mcqs) out += mcq_to_jsonl(m) + "\n";
  write_file(path, out);
}

std::string render_options(const Mcq& m) {
  return fmt::format("A. {}\nB. {}\nC. {}\nD. {}", m.options[0], m.options[1], m.options[2], m.options[3]);
}

// ── Generation ──────────────────────────────────────────────────────────────

prompts::ChatPrompt render_generation_prompt(const RuleCombo& combo, const RuleIndex& index, int level) {
  const auto rules = members_of(combo, index);
  const int actual = rules.size() == 1 ? 1 : combo.level;
  if (level != actual)
    throw ValidationError(fmt::format("level {} template requested for a level {} entry", level, actual));
  std::vector<std::string> contents;
  for (const auto* r : rules) contents.push_back(r->content);
  if (level == 1) return prompts::mcq_generation_level1(contents.front());
  if (level == 5) return prompts::mcq_generation_level5(contents);
  return prompts::mcq_generation_level2to4(contents);
}

GeneratedFields parse_generated(const std::string& text) {
  std::string body = trim(text);
  if (body.rfind("```", 0) == 0) {
    const auto first_nl = body.find('\n');
    const auto close = body.rfind("```");
    if (first_nl == std::string::npos || close <= first_nl) throw ParseError("unterminated code fence");
    body = body.substr(first_nl + 1, close - first_nl - 1);
  }
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("generator output is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("generator output must be a JSON object");
  for (const auto& key : kSchemaKeys)
    if (!j.contains(key)) throw ParseError(std::string("missing field \"") + key + "\"");
  for (const auto& [k, _] : j.items()) {
    if (std::find_if(kSchemaKeys.begin(), kSchemaKeys.end(), [&](const char* s) { return k == s; }) ==
        kSchemaKeys.end())
      throw ParseError("unexpected field \"" + k + "\"");
  }
  const auto str = [&](const char* key) {
    const auto& v = j[key];
    if (!v.is_string() || trim(v.get<std::string>()).empty())
      throw ParseError(std::string("field \"") + key + "\" must be a non-empty string");
    return v.get<std::string>();
  };
  GeneratedFields f;
  f.scenario_description = str("Scenario Description");
  f.question_stem = str("Question Stem");
  f.design_logic = str("Question Design Logic");
  f.explanation = str("Explanation of the Correct Answer");
  const auto& opts = j["Options"];
  if (!opts.is_object() || opts.size() != 4) throw ParseError("\"Options\" must hold exactly A, B, C and D");
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string key(1, char('A' + i));
    if (!opts.contains(key) || !opts[key].is_string() || trim(opts[key].get<std::string>()).empty())
      throw ParseError("option " + key + " missing or empty");
    f.options[i] = opts[key].get<std::string>();
  }
  auto correct = trim(str("Correct Answer Option"));
  if (correct.size() != 1 || correct[0] < 'A' || correct[0] > 'D')
    throw ParseError("\"Correct Answer Option\" must be one of A, B, C, D");
  f.correct_option = correct[0];
  return f;
}

AssemblyResult assemble_mcq(const RuleCombo& combo, const RuleIndex& index, ChatEndpoint& generator,
                            const AssemblyOptions& options) {
  const auto rules = members_of(combo, index);
  const int level = rules.size() == 1 ? 1 : combo.level;
  const auto id = mcq_id(rules.front()->jurisdiction, combo);
  const auto directive = determine_correct_action(combo, index);
  const auto prompt = render_generation_prompt(combo, index, level);

  AssemblyResult result;
  for (int attempt = 1; attempt <= std::max(options.attempts, 1); ++attempt) {
    result.attempts = attempt;
    ChatRequest req;
    req.system = prompt.system;
    req.user = prompt.user;
    req.tag = fmt::format("generate/{}/{}", id, attempt);
    result.raw_output = complete_with_retry(generator, req, options.transport_attempts).text;

    GeneratedFields f;
    try {
      f = parse_generated(result.raw_output);
    } catch (const ParseError& e) {
      result.audit.push_back({id, "assembly", "schema", fmt::format("attempt {}: {}", attempt, e.what())});
      continue;
    }
    const auto oracle = oracle_option(f.options, directive);
    if (!oracle) {
      result.audit.push_back({id, "assembly", "ambiguous_options",
                              fmt::format("attempt {}: no unique option satisfies '{}'", attempt, describe(directive))});
      continue;
    }
    const char oracle_letter = static_cast<char>('A' + *oracle);
    if (oracle_letter != f.correct_option) {
      result.audit.push_back({id, "assembly", "answer_mismatch",
                              fmt::format("attempt {}: generator claims {}, arbitration selects {} ({})", attempt,
                                          f.correct_option, oracle_letter, describe(directive))});
      continue;
    }

    Mcq m;
    m.id = id;
    m.level = level;
    m.jurisdiction = rules.front()->jurisdiction;
    m.num_rules = static_cast<int>(rules.size());
    for (const auto* r : rules) m.rule_ids.push_back(r->id);
    m.scenario_description = f.scenario_description;
    m.question_stem = f.question_stem;
    m.options = f.options;
    m.design_logic = f.design_logic;
    m.correct_option = f.correct_option;
    m.explanation = f.explanation;
    m.scene_text = f.scenario_description;
    result.mcq = std::move(m);
    return result;
  }
  result.audit.push_back({id, "assembly", "budget_exhausted",
                          fmt::format("no acceptable question after {} attempts", result.attempts)});
  return result;
}

std::optional<int> parse_decision(const std::string& text) {
  static const std::regex labelled(R"(Output\s+Decision\s*:\s*([01])(?![0-9]))", std::regex::icase);
  std::smatch m;
  if (std::regex_search(text, m, labelled)) return m[1] == "1" ? 1 : 0;
  const auto t = trim(text);
  if (!t.empty() && (t[0] == '0' || t[0] == '1') && (t.size() == 1 || !std::isdigit(static_cast<unsigned char>(t[1]))))
    return t[0] == '1' ? 1 : 0;
  return std::nullopt;
}

ValidationVerdict consensus_validate(const Mcq& mcq, const std::array<ChatEndpoint*, 3>& judges,
                                     int transport_attempts) {
  const auto prompt = prompts::mcq_check(question_json(mcq));
  ValidationVerdict v;
  for (std::size_t i = 0; i < judges.size(); ++i) {
    ChatRequest req;
    req.system = prompt.system;
    req.user = prompt.user;
    req.tag = fmt::format("check/{}/{}", mcq.id, i);
    const auto text = complete_with_retry(*judges[i], req, transport_attempts).text;
    v.decisions[i] = parse_decision(text).value_or(0);
    v.reasoning[i] = text;
  }
  v.accepted = std::all_of(v.decisions.begin(), v.decisions.end(), [](int d) { return d == 1; });
  return v;
}

QualityScore make_quality_score(prompts::QualityStage stage, const std::array<double, 3>& scores, double threshold) {
  QualityScore q;
  q.stage = stage;
  q.scores = scores;
  long long micro = 0;
  for (const double s : scores) micro += std::llround(s * 1e6);
  q.mean = static_cast<double>(micro) / 3e6;
  q.flagged = micro < std::llround(threshold * 1e6) * 3;
  return q;
}

std::optional<double> parse_score(const std::string& text) {
  static const std::regex number(R"([-+]?\d*\.?\d+(?:[eE][-+]?\d+)?)");
  std::smatch m;
  if (!std::regex_search(text, m, number)) return std::nullopt;
  const double v = std::stod(m.str());
  if (!std::isfinite(v) || v < 0.0 || v > 1.0) return std::nullopt;
  return v;
}

QualityScore quality_score(prompts::QualityStage stage, const std::string& stage_prompt,
                           const std::string& stage_output, const std::array<ChatEndpoint*, 3>& scorers, int attempts,
                           double threshold) {
  const auto prompt = prompts::quality_scoring(stage, stage_prompt, stage_output);
  std::array<double, 3> scores{};
  for (std::size_t i = 0; i < scorers.size(); ++i) {
    for (int a = 1; a <= std::max(attempts, 1); ++a) {
      ChatRequest req;
      req.system = prompt.system;
      req.user = prompt.user;
      req.tag = fmt::format("score/{}/{}/{}", static_cast<int>(stage), i, a);
      if (const auto s = parse_score(complete_with_retry(*scorers[i], req, attempts).text)) {
        scores[i] = *s;
        break;
      }
    }
  }
  return make_quality_score(stage, scores, threshold);
}

std::vector<Mcq> sample_for_human_review(const std::vector<Mcq>& accepted, std::uint64_t seed) {
  const std::size_t n = accepted.size();
  const std::size_t count = (n * 5 + 99) / 100;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  SeededRng rng(seed);
  for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + rng.index(n - i)]);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  std::vector<Mcq> out;
  for (const auto i : idx) out.push_back(accepted[i]);
  return out;
}

void append_review_queue(const std::string& path, const std::vector<ReviewItem>& items) {
  std::string out;
  for (const auto& it : items) {
    ordered_json j;
    j["id"] = it.id;
    j["reason"] = it.reason;
    j["quality_mean"] = it.quality_mean;
    out += j.dump() + "\n";
  }
  append_file(path, out);
}

std::vector<ReviewItem> read_review_queue(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<ReviewItem> out;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto j = json::parse(line);
    out.push_back({j.at("id").get<std::string>(), j.at("reason").get<std::string>(), j.at("quality_mean").get<double>()});
  }
  return out;
}

std::string audit_to_jsonl(const std::vector<AuditRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    ordered_json j;
    j["item"] = r.item;
    j["stage"] = r.stage;
    j["reason"] = r.reason;
    j["detail"] = r.detail;
    out += j.dump() + "\n";
  }
  return out;
}

namespace {

struct ItemOutcome {
  std::optional<Mcq> mcq;
  std::vector<AuditRecord> audit;
  std::optional<ReviewItem> flag;
  bool consensus_rejected = false;
};

}  // namespace

GenerationResult generate_dataset(const HierarchicalRuleSet& hierarchy, ChatEndpoint& generator,
                                  const std::array<ChatEndpoint*, 3>& judges,
                                  const std::array<ChatEndpoint*, 3>& scorers, const GenerationOptions& options) {
  const RuleIndex index(hierarchy.atomic);
  std::vector<RuleCombo> entries;
  for (int level = 1; level <= 5; ++level)
    for (auto& c : hierarchy.entries_at_level(level))
      if (c.members.size() <= options.max_rules) entries.push_back(std::move(c));

  const auto process = [&](const RuleCombo& combo) {
    ItemOutcome out;
    const auto id = mcq_id(hierarchy.jurisdiction, combo);
    try {
      determine_correct_action(combo, index);
    } catch (const SamePriorityTie& e) {
      out.audit.push_back({id, "arbitration", "same_priority_tie", e.what()});
      return out;
    }
    auto assembled = assemble_mcq(combo, index, generator, options.assembly);
    out.audit = std::move(assembled.audit);
    if (!assembled.mcq) return out;

    const auto verdict = consensus_validate(*assembled.mcq, judges, options.judge_transport_attempts);
    if (!verdict.accepted) {
      out.consensus_rejected = true;
      out.audit.push_back({id, "consensus", "rejected",
                           fmt::format("decisions {}{}{}", verdict.decisions[0], verdict.decisions[1],
                                       verdict.decisions[2])});
      return out;
    }
    const auto prompt = render_generation_prompt(combo, index, assembled.mcq->level);
    const auto q = quality_score(prompts::QualityStage::Transcription, prompt.text(), assembled.raw_output, scorers,
                                 options.score_attempts, options.quality_threshold);
    if (q.flagged) out.flag = ReviewItem{id, "quality_flag", q.mean};
    out.mcq = std::move(assembled.mcq);
    return out;
  };

  const auto outcomes = parallel_map(entries, process, options.max_in_flight);

  GenerationResult result;
  result.attempted = entries.size();
  for (const auto& o : outcomes) {
    result.audit.insert(result.audit.end(), o.audit.begin(), o.audit.end());
    if (o.consensus_rejected) ++result.rejected_by_consensus;
    if (o.flag) result.review.push_back(*o.flag);
    if (o.mcq) result.accepted.push_back(*o.mcq);
  }
  for (const auto& m : sample_for_human_review(result.accepted, options.seed))
    result.review.push_back({m.id, "sampled", 0.0});
  return result;
}

// ── Offline generator ───────────────────────────────────────────────────────

std::vector<std::string> input_rules_from_prompt(const std::string& user_text) {
  static const std::regex line(R"(^Input Rule(?: \d+)?(?: \(if necessary\))?\s*: (.*)$)");
  std::vector<std::string> out;
  std::istringstream in(user_text);
  std::string l;
  while (std::getline(in, l)) {
    std::smatch m;
    if (std::regex_match(l, m, line)) out.push_back(m[1].str());
  }
  return out;
}

TemplateGenerator::TemplateGenerator(std::vector<AtomicRule> rules) : rules_(std::move(rules)) {}

namespace {

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string humanize_tag(const std::string& tag) {
  std::string v = tag.substr(tag.find(':') + 1);
  std::replace(v.begin(), v.end(), '_', ' ');
  return v;
}

double mid(const SpeedRange& r) { return std::floor((r.lower + r.upper) / 2.0); }

// Correct phrase plus three distractors that the matcher rejects or ranks lower.
std::pair<std::string, std::array<std::string, 3>> compose_options(const ActionDirective& d,
                                                                   const std::vector<const AtomicRule*>& members) {
  if (d.action == ActionType::SpeedLimit) {
    const auto r = *d.speed;
    std::vector<double> wrong;
    for (const auto* m : members) {
      const double v = mid(*m->speed_range);
      if ((v < r.lower || v > r.upper) && std::find(wrong.begin(), wrong.end(), v) == wrong.end()) wrong.push_back(v);
    }
    for (double step = 20; wrong.size() < 3; step += 20) {
      const double v = r.upper + step;
      if (std::find(wrong.begin(), wrong.end(), v) == wrong.end()) wrong.push_back(v);
    }
    return {fmt::format("Adjust the speed to {} km/h and continue in the current lane", format_number(mid(r))),
            {fmt::format("Keep driving at {} km/h to match the surrounding traffic", format_number(wrong[0])),
             fmt::format("Settle at {} km/h and hold the lane", format_number(wrong[1])),
             fmt::format("Move at {} km/h until the road ahead clears", format_number(wrong[2]))}};
  }
  const auto phrase = action_phrase(d.action);
  switch (d.norm) {
    case NormType::Obligatory:
    case NormType::Permissive:
      return {capitalize(phrase) + " after checking the surroundings",
              {"Hold the current course and wait for a clearer signal from the traffic ahead",
               "Keep the present lane position and let the situation develop",
               "Stay behind the vehicle in front and keep observing"}};
    case NormType::Forbidden:
      return {"Do not " + phrase + "; keep the current lane position and observe",
              {capitalize(phrase) + " promptly while the gap is available",
               capitalize(phrase) + " carefully after a brief check of the mirrors",
               "Briefly " + phrase + " and then return to the original position"}};
  }
  return {};
}

}  // namespace

ChatResponse TemplateGenerator::complete(const ChatRequest& request) {
  const auto contents = input_rules_from_prompt(request.user);
  if (contents.empty()) throw Error("template generator: prompt has no input rules");
  std::vector<const AtomicRule*> members;
  RuleCombo combo;
  for (const auto& c : contents) {
    const auto it = std::find_if(rules_.begin(), rules_.end(), [&](const AtomicRule& r) { return r.content == c; });
    if (it == rules_.end()) throw Error("template generator: unknown rule content '" + c + "'");
    members.push_back(&*it);
    combo.members.push_back(it->id);
  }
  const RuleIndex index(rules_);
  std::sort(combo.members.begin(), combo.members.end());
  if (combo.members.size() > 1) combo = derive_labels(combo, index);
  const auto d = determine_correct_action(combo, index);
  const auto [correct, distractors] = compose_options(d, members);

  std::size_t hash = 0;
  for (const auto& id : combo.members)
    for (const char ch : id.value) hash = hash * 31 + static_cast<unsigned char>(ch);
  const std::size_t slot = hash % 4;
  std::array<std::string, 4> options;
  for (std::size_t i = 0, k = 0; i < 4; ++i) options[i] = i == slot ? correct : distractors[k++];

  std::set<std::string> tags;
  for (const auto* m : members) tags.insert(m->context_tags.begin(), m->context_tags.end());
  std::string setting;
  for (const auto& t : tags) setting += (setting.empty() ? "" : ", ") + humanize_tag(t);
  if (setting.empty()) setting = "ordinary traffic";

  ordered_json j;
  j["Scenario Description"] = "The ego vehicle approaches a section with " + setting + ".";
  j["Question Stem"] = "As the driver, how should you respond correctly in this situation?";
  j["Options"] = ordered_json{{"A", options[0]}, {"B", options[1]}, {"C", options[2]}, {"D", options[3]}};
  j["Question Design Logic"] = "Tests whether the driver applies: " + describe(d) + ".";
  j["Correct Answer Option"] = std::string(1, static_cast<char>('A' + slot));
  j["Explanation of the Correct Answer"] =
      "The applicable rule requires the driver to " + describe(d) + "; the other options deviate from it.";
  return {j.dump(4), 0.0};
}

}  // namespace drivecombo
