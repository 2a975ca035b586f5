#include "drivecombo/rule_crafter.hpp"

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <regex>

#include "drivecombo/prompts.hpp"
#include "rule_yaml.hpp"
#include "yaml_support.hpp"

namespace drivecombo {

RuleIndex::RuleIndex(const std::vector<AtomicRule>& rules) {
  for (const auto& r : rules) by_id_[r.id] = &r;
}

const AtomicRule* RuleIndex::find(const RuleId& id) const {
  const auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : it->second;
}

const AtomicRule& RuleIndex::at(const RuleId& id) const {
  if (const auto* r = find(id)) return *r;
  throw ValidationError("unknown rule id '" + id.value + "'");
}

namespace {

std::string member_list(const std::vector<RuleId>& members) {
  std::string out;
  for (const auto& m : members) {
    if (!out.empty()) out += "+";
    out += m.value;
  }
  return out;
}

std::vector<const AtomicRule*> resolve(const RuleCombo& combo, const RuleIndex& index) {
  std::vector<const AtomicRule*> rules;
  rules.reserve(combo.members.size());
  for (const auto& id : combo.members) rules.push_back(&index.at(id));
  return rules;
}

}  // namespace

std::vector<RuleCombo> generate_candidate_combos(const std::vector<AtomicRule>& rules, int k) {
  if (k < 2 || k > 5) throw ValidationError("combination size must be 2..5, got " + std::to_string(k));
  for (const auto& r : rules) {
    if (r.jurisdiction != rules.front().jurisdiction)
      throw ValidationError("rules from different jurisdictions cannot be combined ('" +
                            rules.front().id.value + "' vs '" + r.id.value + "')");
  }

  std::map<ActionType, std::vector<RuleId>> groups;
  for (const auto& r : rules) groups[r.action_type].push_back(r.id);

  std::vector<RuleCombo> out;
  const auto n_k = static_cast<std::size_t>(k);
  for (auto& [action, ids] : groups) {
    std::sort(ids.begin(), ids.end());
    if (ids.size() < n_k) continue;
    // Lexicographic walk over index tuples i0 < i1 < ... < i(k-1).
    std::vector<std::size_t> pick(n_k);
    for (std::size_t i = 0; i < n_k; ++i) pick[i] = i;
    for (;;) {
      RuleCombo c;
      for (const auto i : pick) c.members.push_back(ids[i]);
      out.push_back(std::move(c));
      std::size_t pos = n_k;
      while (pos > 0 && pick[pos - 1] == ids.size() - n_k + (pos - 1)) --pos;
      if (pos == 0) break;
      ++pick[pos - 1];
      for (std::size_t j = pos; j < n_k; ++j) pick[j] = pick[j - 1] + 1;
    }
  }
  std::sort(out.begin(), out.end(), [](const RuleCombo& a, const RuleCombo& b) { return a.members < b.members; });
  return out;
}

RuleCombo derive_labels(const RuleCombo& combo, const RuleIndex& index) {
  if (combo.members.size() < 2)
    throw ValidationError("labels are defined for combinations of two or more rules");
  const auto rules = resolve(combo, index);
  const ActionType action = rules.front()->action_type;
  for (const auto* r : rules) {
    if (r->action_type != action)
      throw ValidationError("combination " + member_list(combo.members) + " mixes action types");
  }

  RuleCombo out = combo;
  std::sort(out.members.begin(), out.members.end());

  const bool all_static = std::all_of(rules.begin(), rules.end(),
                                      [](const AtomicRule* r) { return r->perceptual_type == PerceptualType::Static; });
  const bool all_dynamic = std::all_of(
      rules.begin(), rules.end(), [](const AtomicRule* r) { return r->perceptual_type == PerceptualType::Dynamic; });
  out.perceptual_combo = all_static    ? PerceptualCombo::DoubleStatic
                         : all_dynamic ? PerceptualCombo::DoubleDynamic
                                       : PerceptualCombo::Hybrid;

  bool conflict = false;
  if (action == ActionType::SpeedLimit) {
    std::vector<SpeedRange> ranges;
    for (const auto* r : rules) {
      if (!r->speed_range) throw ValidationError("speed rule '" + r->id.value + "' has no speed range");
      ranges.push_back(*r->speed_range);
    }
    conflict = !intersect(ranges).has_value();
  } else {
    const bool has_obligatory = std::any_of(rules.begin(), rules.end(),
                                            [](const AtomicRule* r) { return r->norm_type == NormType::Obligatory; });
    const bool has_forbidden = std::any_of(rules.begin(), rules.end(),
                                           [](const AtomicRule* r) { return r->norm_type == NormType::Forbidden; });
    conflict = has_obligatory && has_forbidden;
  }
  out.norm_relation = conflict ? NormRelation::NormConflict : NormRelation::NormHarmony;

  if (conflict) {
    out.level = 5;
  } else {
    switch (*out.perceptual_combo) {
      case PerceptualCombo::DoubleStatic: out.level = 2; break;
      case PerceptualCombo::DoubleDynamic: out.level = 3; break;
      case PerceptualCombo::Hybrid: out.level = 4; break;
    }
  }
  return out;
}

// ── Coexistence ──────────────────────────────────────────────────────────────

CoexistenceVerdict TagCoexistenceOracle::judge(const std::vector<const AtomicRule*>& rules) {
  using Namespaces = std::map<std::string, std::set<std::string>>;
  std::vector<Namespaces> per_rule;
  for (const auto* r : rules) {
    Namespaces ns;
    for (const auto& tag : r->context_tags) {
      const auto colon = tag.find(':');
      ns[tag.substr(0, colon)].insert(tag.substr(colon + 1));
    }
    per_rule.push_back(std::move(ns));
  }

  for (std::size_t i = 0; i < rules.size(); ++i) {
    for (std::size_t j = i + 1; j < rules.size(); ++j) {
      for (const auto& [ns, values] : per_rule[i]) {
        if (shared_.count(ns)) continue;
        const auto other = per_rule[j].find(ns);
        if (other == per_rule[j].end()) continue;
        const bool overlap = std::any_of(values.begin(), values.end(),
                                         [&](const std::string& v) { return other->second.count(v) > 0; });
        if (!overlap) {
          return {false, fmt::format("{} and {} require incompatible '{}' contexts ({} vs {})", rules[i]->id.value,
                                     rules[j]->id.value, ns, *values.begin(), *other->second.begin())};
        }
      }
    }
  }
  return {true, "no contradictory context tags"};
}

std::optional<bool> parse_coexistence_output(const std::string& text) {
  static const std::regex labelled(R"(Output\s*:\s*([01])(?![0-9]))", std::regex::icase);
  std::smatch m;
  if (std::regex_search(text, m, labelled)) return m[1] == "1";
  const auto t = trim(text);
  if (!t.empty() && (t[0] == '0' || t[0] == '1') && (t.size() == 1 || !std::isdigit(static_cast<unsigned char>(t[1]))))
    return t[0] == '1';
  return std::nullopt;
}

CoexistenceVerdict ModelCoexistenceOracle::judge(const std::vector<const AtomicRule*>& rules) {
  std::vector<std::string> contents;
  std::vector<RuleId> ids;
  for (const auto* r : rules) {
    contents.push_back(r->content);
    ids.push_back(r->id);
  }
  const auto prompt = prompts::coexistence(contents);
  ChatRequest req;
  req.system = prompt.system;
  req.user = prompt.user;
  req.tag = "coexist/" + member_list(ids);
  const auto response = endpoint_.complete(req);
  return {parse_coexistence_output(response.text), response.text};
}

RuleCombo validate_coexistence(const RuleCombo& combo, const RuleIndex& index, CoexistenceOracle& oracle,
                               const CoexistenceOptions& options) {
  const auto rules = resolve(combo, index);
  RuleCombo out = combo;
  const int attempts = std::max(options.attempts, 1);
  for (int i = 1; i <= attempts; ++i) {
    CoexistenceVerdict v;
    try {
      v = oracle.judge(rules);
    } catch (const TransportError&) {
      if (i == attempts) throw;
      continue;
    }
    out.oracle_reasoning = v.reasoning;
    if (v.feasible) {
      out.coexistence = *v.feasible ? Coexistence::Feasible : Coexistence::Infeasible;
      out.audit_flag = false;
      return out;
    }
  }
  out.coexistence = Coexistence::Infeasible;
  out.audit_flag = true;
  return out;
}

std::vector<RuleCombo> validate_coexistence_all(const std::vector<RuleCombo>& combos, const RuleIndex& index,
                                                CoexistenceOracle& oracle, const CoexistenceOptions& options) {
  return parallel_map(
      combos, [&](const RuleCombo& c) { return validate_coexistence(c, index, oracle, options); },
      options.max_in_flight);
}

// ── Hierarchy ────────────────────────────────────────────────────────────────

std::vector<RuleCombo> HierarchicalRuleSet::entries_at_level(int level) const {
  std::vector<RuleCombo> out;
  if (level == 1) {
    for (const auto& r : atomic) {
      RuleCombo c;
      c.members = {r.id};
      c.level = 1;
      c.coexistence = Coexistence::Feasible;
      out.push_back(std::move(c));
    }
    return out;
  }
  for (const auto& c : combos)
    if (c.level == level) out.push_back(c);
  return out;
}

std::map<int, std::size_t> HierarchicalRuleSet::level_counts() const {
  std::map<int, std::size_t> counts;
  for (int l = 1; l <= 5; ++l) counts[l] = 0;
  counts[1] = atomic.size();
  for (const auto& c : combos) ++counts[c.level];
  return counts;
}

HierarchicalRuleSet build_hierarchy(const std::vector<AtomicRule>& rules, const std::vector<RuleCombo>& combos) {
  HierarchicalRuleSet set;
  if (!rules.empty()) set.jurisdiction = rules.front().jurisdiction;
  set.atomic = rules;
  std::sort(set.atomic.begin(), set.atomic.end(), [](const AtomicRule& a, const AtomicRule& b) { return a.id < b.id; });

  const RuleIndex index(set.atomic);
  std::set<std::vector<RuleId>> seen;
  for (const auto& c : combos) {
    for (const auto& id : c.members) {
      if (!index.find(id))
        throw ValidationError("combination " + member_list(c.members) + " references unknown rule '" + id.value + "'");
    }
    if (c.members.size() < 2 || c.level < 2 || c.level > 5)
      throw ValidationError("combination " + member_list(c.members) + " has no derived labels");
    if (c.coexistence == Coexistence::Unchecked)
      throw ValidationError("combination " + member_list(c.members) + " was not checked for coexistence");
    auto key = c.members;
    std::sort(key.begin(), key.end());
    if (!seen.insert(key).second) continue;
    (c.coexistence == Coexistence::Feasible ? set.combos : set.rejected).push_back(c);
  }
  const auto by_members = [](const RuleCombo& a, const RuleCombo& b) {
    return a.level != b.level ? a.level < b.level : a.members < b.members;
  };
  std::sort(set.combos.begin(), set.combos.end(), by_members);
  std::sort(set.rejected.begin(), set.rejected.end(), by_members);
  return set;
}

namespace {

void append_combo(std::string& out, const RuleCombo& c) {
  out += "  - members: [";
  for (std::size_t i = 0; i < c.members.size(); ++i) {
    if (i) out += ", ";
    out += yaml_quote(c.members[i].value);
  }
  out += "]\n";
  if (c.perceptual_combo) out += fmt::format("    perceptual_combo: {}\n", to_token(*c.perceptual_combo));
  if (c.norm_relation) out += fmt::format("    norm_relation: {}\n", to_token(*c.norm_relation));
  out += fmt::format("    level: {}\n", c.level);
  out += fmt::format("    coexistence: {}\n", to_token(c.coexistence));
  out += fmt::format("    audit_flag: {}\n", c.audit_flag ? "true" : "false");
  out += "    reasoning: " + yaml_quote(c.oracle_reasoning) + "\n";
}

RuleCombo combo_from_yaml(const YAML::Node& node, const std::string& what) {
  static constexpr std::array kKeys{"members",     "perceptual_combo", "norm_relation", "level",
                                    "coexistence", "audit_flag",       "reasoning"};
  yaml::expect_keys(node, kKeys, what);
  RuleCombo c;
  const auto members = yaml::require(node, "members", what);
  if (!members.IsSequence()) throw ParseError(what + ": members must be a list", yaml::line_of(members));
  for (const auto& m : members) c.members.push_back(RuleId{yaml::scalar(m, what + ".members")});
  if (node["perceptual_combo"])
    c.perceptual_combo = yaml::token<PerceptualCombo>(node["perceptual_combo"], what + ".perceptual_combo");
  if (node["norm_relation"])
    c.norm_relation = yaml::token<NormRelation>(node["norm_relation"], what + ".norm_relation");
  c.level = static_cast<int>(yaml::number(yaml::require(node, "level", what), what + ".level"));
  c.coexistence = yaml::token<Coexistence>(yaml::require(node, "coexistence", what), what + ".coexistence");
  if (node["audit_flag"]) c.audit_flag = yaml::scalar(node["audit_flag"], what + ".audit_flag") == "true";
  if (node["reasoning"]) c.oracle_reasoning = yaml::scalar(node["reasoning"], what + ".reasoning");
  return c;
}

}  // namespace

std::string export_hierarchy(const HierarchicalRuleSet& set) {
  std::string out;
  out += fmt::format("jurisdiction: {}\n", to_token(set.jurisdiction));
  out += "atomic:\n";
  for (const auto& r : set.atomic) append_rule_record(out, r, "  ");
  out += set.combos.empty() ? "combos: []\n" : "combos:\n";
  for (const auto& c : set.combos) append_combo(out, c);
  out += set.rejected.empty() ? "rejected: []\n" : "rejected:\n";
  for (const auto& c : set.rejected) append_combo(out, c);
  return out;
}

HierarchicalRuleSet import_hierarchy(std::string_view text, const RuleFileOptions& options) {
  const YAML::Node root = yaml::load(text);
  static constexpr std::array kKeys{"jurisdiction", "atomic", "combos", "rejected"};
  yaml::expect_keys(root, kKeys, "hierarchy");

  HierarchicalRuleSet set;
  set.jurisdiction = yaml::token<Jurisdiction>(yaml::require(root, "jurisdiction", "hierarchy"), "jurisdiction");
  std::size_t i = 0;
  for (const auto& node : root["atomic"]) set.atomic.push_back(rule_from_yaml(node, i++, set.jurisdiction, options));
  i = 0;
  for (const auto& node : root["combos"]) set.combos.push_back(combo_from_yaml(node, "combo " + std::to_string(i++)));
  i = 0;
  for (const auto& node : root["rejected"])
    set.rejected.push_back(combo_from_yaml(node, "rejected " + std::to_string(i++)));

  const RuleIndex index(set.atomic);
  for (const auto* list : {&set.combos, &set.rejected}) {
    for (const auto& c : *list) {
      for (const auto& id : c.members) index.at(id);
    }
  }
  return set;
}

}  // namespace drivecombo
