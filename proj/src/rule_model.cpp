#include "drivecombo/rule_model.hpp"

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "rule_yaml.hpp"
#include "yaml_support.hpp"

namespace drivecombo {

ActionCategory category_of(ActionType action) {
  switch (action) {
    case ActionType::Overtake:
    case ActionType::LeftTurn:
    case ActionType::RightTurn:
    case ActionType::UTurn:
    case ActionType::LaneChange:
    case ActionType::MergeMainRoad:
    case ActionType::EnterRamp:
    case ActionType::Acceleration:
    case ActionType::Deceleration:
    case ActionType::Reverse:
    case ActionType::EmergencyLaneUsage:
    case ActionType::SpeedLimit:
      return ActionCategory::DrivingManeuvers;
    case ActionType::LeftTurnSignal:
    case ActionType::RightTurnSignal:
    case ActionType::LowBeam:
    case ActionType::HighBeam:
    case ActionType::FlashingHeadlights:
    case ActionType::DoubleFlashers:
    case ActionType::FogLights:
    case ActionType::PositionLights:
    case ActionType::HonkHorn:
      return ActionCategory::LightingSignaling;
    case ActionType::TemporaryParking:
    case ActionType::PullOver:
    case ActionType::Yield:
      return ActionCategory::ParkingYielding;
  }
  throw std::logic_error("unhandled action type");
}

int priority_rank(PriorityClass cls) { return static_cast<int>(cls) + 1; }

std::string_view display_name(Jurisdiction j) {
  switch (j) {
    case Jurisdiction::USA: return "USA";
    case Jurisdiction::China: return "China";
    case Jurisdiction::UK: return "UK";
    case Jurisdiction::Japan: return "Japan";
    case Jurisdiction::Australia: return "Australia";
  }
  throw std::logic_error("unhandled jurisdiction");
}

std::optional<SpeedRange> intersect(const std::vector<SpeedRange>& ranges) {
  if (ranges.empty()) return std::nullopt;
  SpeedRange acc = ranges.front();
  for (const auto& r : ranges) {
    acc.lower = std::max(acc.lower, r.lower);
    acc.upper = std::min(acc.upper, r.upper);
  }
  if (acc.lower > acc.upper) return std::nullopt;
  return acc;
}

// ── Validation ───────────────────────────────────────────────────────────────

namespace {

constexpr std::array kRuleKeys{"id",          "content",          "perceptual_type", "norm_type",
                               "action_type", "numeric_constraints", "priority_class", "context_tags"};

bool valid_tag(const std::string& tag) {
  const auto colon = tag.find(':');
  return colon != std::string::npos && colon > 0 && colon + 1 < tag.size() &&
         tag.find(':', colon + 1) == std::string::npos &&
         std::none_of(tag.begin(), tag.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

std::vector<Violation> validate_rule(const RuleRecord& r, const RuleFileOptions& options) {
  std::vector<Violation> out;
  if (trim(r.id).empty()) out.push_back({"id", "id must be non-empty"});
  if (trim(r.content).empty()) out.push_back({"content", "content must be non-empty"});
  if (!parse_token<PerceptualType>(r.perceptual_type))
    out.push_back({"perceptual_type", "unknown perceptual type '" + r.perceptual_type + "'"});
  if (!parse_token<NormType>(r.norm_type))
    out.push_back({"norm_type", "unknown norm type '" + r.norm_type + "'"});
  const auto action = parse_token<ActionType>(r.action_type);
  if (!action) out.push_back({"action_type", "unknown action type '" + r.action_type + "'"});
  if (!parse_token<PriorityClass>(r.priority_class))
    out.push_back({"priority_class", "unknown priority class '" + r.priority_class + "'"});

  const bool is_speed = action == ActionType::SpeedLimit;
  if (r.has_numeric_constraints && action && !is_speed) {
    out.push_back({"numeric_constraints", "speed range is only allowed on speed_limit rules"});
  } else if (!r.has_numeric_constraints && is_speed) {
    out.push_back({"numeric_constraints", "speed_limit rules require a speed range"});
  } else if (r.has_numeric_constraints) {
    if (!r.lower && !r.upper) {
      out.push_back({"numeric_constraints", "at least one of lower/upper is required"});
    } else {
      const double lo = r.lower.value_or(0.0);
      const double hi = r.upper.value_or(options.max_speed_kmh);
      if (!std::isfinite(lo) || !std::isfinite(hi))
        out.push_back({"numeric_constraints", "bounds must be finite"});
      else if (lo < 0.0)
        out.push_back({"numeric_constraints.lower", "lower bound must be >= 0"});
      else if (lo > hi)
        out.push_back({"numeric_constraints", "lower bound must not exceed upper bound"});
    }
  }
  for (const auto& tag : r.context_tags) {
    if (!valid_tag(tag))
      out.push_back({"context_tags", "tag '" + tag + "' is not of the form namespace:value"});
  }
  return out;
}

RuleRecord to_record(const AtomicRule& rule) {
  RuleRecord r;
  r.id = rule.id.value;
  r.content = rule.content;
  r.perceptual_type = std::string(to_token(rule.perceptual_type));
  r.norm_type = std::string(to_token(rule.norm_type));
  r.action_type = std::string(to_token(rule.action_type));
  if (rule.speed_range) {
    r.has_numeric_constraints = true;
    r.lower = rule.speed_range->lower;
    r.upper = rule.speed_range->upper;
  }
  r.priority_class = std::string(to_token(rule.priority_class));
  r.context_tags.assign(rule.context_tags.begin(), rule.context_tags.end());
  return r;
}

std::vector<Violation> validate_rule(const AtomicRule& rule) {
  RuleFileOptions opts;
  if (rule.speed_range) opts.max_speed_kmh = std::max(opts.max_speed_kmh, rule.speed_range->upper);
  return validate_rule(to_record(rule), opts);
}

// ── Parsing ──────────────────────────────────────────────────────────────────

namespace {

RuleRecord read_record(const YAML::Node& node, std::size_t index) {
  const auto where = [&](const std::string& msg) {
    return "record " + std::to_string(index) + ": " + msg;
  };
  if (!node.IsMap()) throw ParseError(where("expected a mapping"), yaml::line_of(node));

  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::find(kRuleKeys.begin(), kRuleKeys.end(), key) == kRuleKeys.end())
      throw ParseError(where("unknown key '" + key + "'"), yaml::line_of(kv.first));
  }
  for (const char* required : {"id", "content", "perceptual_type", "norm_type", "action_type",
                               "priority_class", "context_tags"}) {
    if (!node[required]) throw ParseError(where(std::string("missing key '") + required + "'"), yaml::line_of(node));
  }

  RuleRecord r;
  r.id = yaml::scalar(node["id"], where("id"));
  r.content = yaml::scalar(node["content"], where("content"));
  r.perceptual_type = yaml::scalar(node["perceptual_type"], where("perceptual_type"));
  r.norm_type = yaml::scalar(node["norm_type"], where("norm_type"));
  r.action_type = yaml::scalar(node["action_type"], where("action_type"));
  r.priority_class = yaml::scalar(node["priority_class"], where("priority_class"));

  const auto tags = node["context_tags"];
  if (!tags.IsSequence() && !tags.IsNull())
    throw ParseError(where("context_tags must be a list"), yaml::line_of(tags));
  for (const auto& t : tags) r.context_tags.push_back(yaml::scalar(t, where("context_tags")));

  if (const auto nc = node["numeric_constraints"]) {
    if (!nc.IsMap()) throw ParseError(where("numeric_constraints must be a mapping with lower/upper"), yaml::line_of(nc));
    r.has_numeric_constraints = true;
    for (const auto& kv : nc) {
      const auto key = kv.first.as<std::string>();
      if (key != "lower" && key != "upper")
        throw ParseError(where("unknown numeric_constraints key '" + key + "'"), yaml::line_of(kv.first));
    }
    if (nc["lower"]) r.lower = yaml::number(nc["lower"], where("numeric_constraints.lower"));
    if (nc["upper"]) r.upper = yaml::number(nc["upper"], where("numeric_constraints.upper"));
  }
  return r;
}

AtomicRule to_rule(const RuleRecord& r, Jurisdiction j, const RuleFileOptions& options) {
  AtomicRule rule;
  rule.id = RuleId{r.id};
  rule.content = r.content;
  rule.perceptual_type = *parse_token<PerceptualType>(r.perceptual_type);
  rule.norm_type = *parse_token<NormType>(r.norm_type);
  rule.action_type = *parse_token<ActionType>(r.action_type);
  rule.priority_class = *parse_token<PriorityClass>(r.priority_class);
  rule.jurisdiction = j;
  if (r.has_numeric_constraints)
    rule.speed_range = SpeedRange{r.lower.value_or(0.0), r.upper.value_or(options.max_speed_kmh)};
  rule.context_tags.insert(r.context_tags.begin(), r.context_tags.end());
  return rule;
}

}  // namespace

AtomicRule rule_from_yaml(const YAML::Node& node, std::size_t index, Jurisdiction jurisdiction,
                          const RuleFileOptions& options) {
  const RuleRecord record = read_record(node, index);
  const auto violations = validate_rule(record, options);
  if (!violations.empty()) {
    throw ValidationError("record " + std::to_string(index) + " (line " +
                          std::to_string(yaml::line_of(node)) + ", id '" + record.id + "'): " +
                          violations.front().field + ": " + violations.front().invariant);
  }
  return to_rule(record, jurisdiction, options);
}

std::vector<AtomicRule> parse_rule_file(std::string_view text, Jurisdiction jurisdiction,
                                        const RuleFileOptions& options) {
  const YAML::Node root = yaml::load(text);
  std::vector<AtomicRule> rules;
  if (root.IsNull()) return rules;
  if (!root.IsSequence()) throw ParseError("rule file must be a list of rule records", yaml::line_of(root));

  std::unordered_set<std::string> seen;
  std::size_t index = 0;
  for (const auto& node : root) {
    auto rule = rule_from_yaml(node, index, jurisdiction, options);
    if (!seen.insert(rule.id.value).second)
      throw ValidationError("record " + std::to_string(index) + ": duplicate id '" + rule.id.value + "'");
    rules.push_back(std::move(rule));
    ++index;
  }
  return rules;
}

// ── Serialization ────────────────────────────────────────────────────────────

std::string yaml_quote(std::string_view s) {
  std::string out = "\"";
  for (const char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  out += '"';
  return out;
}

std::string format_number(double v) { return fmt::format("{}", v); }

void append_rule_record(std::string& out, const AtomicRule& r, std::string_view indent) {
  const std::string in(indent);
  out += in + "- id: " + yaml_quote(r.id.value) + "\n";
  out += in + "  content: " + yaml_quote(r.content) + "\n";
  out += in + fmt::format("  perceptual_type: {}\n", to_token(r.perceptual_type));
  out += in + fmt::format("  norm_type: {}\n", to_token(r.norm_type));
  out += in + fmt::format("  action_type: {}\n", to_token(r.action_type));
  if (r.speed_range) {
    out += in + "  numeric_constraints:\n";
    out += in + "    lower: " + format_number(r.speed_range->lower) + "\n";
    out += in + "    upper: " + format_number(r.speed_range->upper) + "\n";
  }
  out += in + fmt::format("  priority_class: {}\n", to_token(r.priority_class));
  out += in + "  context_tags: [";
  bool first = true;
  for (const auto& t : r.context_tags) {
    if (!first) out += ", ";
    out += yaml_quote(t);
    first = false;
  }
  out += "]\n";
}

std::string serialize_rule_file(const std::vector<AtomicRule>& rules) {
  std::string out;
  for (const auto& r : rules) append_rule_record(out, r, "");
  return out;
}

}  // namespace drivecombo
