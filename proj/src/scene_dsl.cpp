#include "drivecombo/scene_dsl.hpp"

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <functional>
#include <map>
#include <regex>

#include "yaml_support.hpp"

namespace drivecombo {

const Actor* SceneDoc::find_actor(std::string_view id) const {
  for (const auto& a : actors)
    if (a.id == id) return &a;
  return nullptr;
}

std::set<std::string> landmarks(const SceneDoc& doc) {
  std::set<std::string> out{std::string(to_token(doc.road_network.road_type))};
  for (const auto s : doc.road_network.traffic_signs) out.insert(std::string(to_token(s)));
  return out;
}

std::vector<std::string> validate_scene_doc(const SceneDoc& doc) {
  std::vector<std::string> out;
  const auto marks = landmarks(doc);
  std::set<std::string> ids;
  std::size_t egos = 0;
  for (const auto& a : doc.actors) {
    if (a.id.empty()) out.push_back("actor with empty id");
    if (a.id == "ego") ++egos;
    if (!ids.insert(a.id).second) out.push_back("duplicate actor id '" + a.id + "'");
    if (marks.count(a.id)) out.push_back("actor id '" + a.id + "' shadows a landmark");
    if (a.position.distance && !(*a.position.distance > 0.0))
      out.push_back("actor '" + a.id + "': distance must be positive");
    if (a.speed && *a.speed < 0.0) out.push_back("actor '" + a.id + "': speed must be non-negative");
  }
  if (egos == 0) out.push_back("no actor with id 'ego'");
  if (egos > 1) out.push_back("more than one actor with id 'ego'");

  for (const auto& a : doc.actors) {
    const auto& ref = a.position.reference;
    if (ref == a.id) {
      out.push_back("actor '" + a.id + "' is positioned relative to itself");
    } else if (!ids.count(ref) && !marks.count(ref)) {
      out.push_back("actor '" + a.id + "' references unknown '" + ref + "'");
    }
  }
  // Each actor has one reference, so following references from any actor
  // either ends at a landmark or revisits a node.
  for (const auto& a : doc.actors) {
    std::set<std::string> seen{a.id};
    const Actor* cur = &a;
    while (const Actor* next = doc.find_actor(cur->position.reference)) {
      if (!seen.insert(next->id).second) {
        out.push_back("reference cycle through actor '" + a.id + "'");
        break;
      }
      cur = next;
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ── Parsing ─────────────────────────────────────────────────────────────────

namespace {

template <typename E>
std::vector<E> token_list(const YAML::Node& node, const std::string& what) {
  std::vector<E> out;
  if (!node || node.IsNull()) return out;
  if (!node.IsSequence()) throw ParseError(what + ": expected a list", yaml::line_of(node));
  for (const auto& n : node) out.push_back(yaml::token<E>(n, what));
  return out;
}

Actor read_actor(const YAML::Node& node, std::size_t index) {
  const std::string what = "actors[" + std::to_string(index) + "]";
  static constexpr std::array kKeys{"id", "type", "position", "behavior", "speed"};
  yaml::expect_keys(node, kKeys, what);
  Actor a;
  a.id = yaml::scalar(yaml::require(node, "id", what), what + ".id");
  a.type = yaml::token<ActorType>(yaml::require(node, "type", what), what + ".type");
  const auto pos = yaml::require(node, "position", what);
  static constexpr std::array kPosKeys{"reference", "relation", "distance"};
  yaml::expect_keys(pos, kPosKeys, what + ".position");
  a.position.reference = yaml::scalar(yaml::require(pos, "reference", what + ".position"), what + ".position.reference");
  a.position.relation =
      yaml::token<Relation>(yaml::require(pos, "relation", what + ".position"), what + ".position.relation");
  if (pos["distance"]) a.position.distance = yaml::number(pos["distance"], what + ".position.distance");
  a.behavior = yaml::token<Behavior>(yaml::require(node, "behavior", what), what + ".behavior");
  if (node["speed"]) a.speed = yaml::number(node["speed"], what + ".speed");
  return a;
}

}  // namespace

SceneDoc parse_scene_doc(std::string_view text) {
  const YAML::Node root = yaml::load(text);
  if (!root.IsMap()) throw ParseError("scene document must be a mapping", yaml::line_of(root));
  static constexpr std::array kKeys{"environment", "road_network", "actors", "oracle"};
  yaml::expect_keys(root, kKeys, "scene");

  SceneDoc doc;
  const auto env = yaml::require(root, "environment", "scene");
  static constexpr std::array kEnvKeys{"weather", "time"};
  yaml::expect_keys(env, kEnvKeys, "environment");
  doc.environment.weather = yaml::token<Weather>(yaml::require(env, "weather", "environment"), "environment.weather");
  doc.environment.time = yaml::token<TimeOfDay>(yaml::require(env, "time", "environment"), "environment.time");

  const auto road = yaml::require(root, "road_network", "scene");
  static constexpr std::array kRoadKeys{"road_type", "road_marker", "traffic_signs"};
  yaml::expect_keys(road, kRoadKeys, "road_network");
  doc.road_network.road_type =
      yaml::token<RoadType>(yaml::require(road, "road_type", "road_network"), "road_network.road_type");
  doc.road_network.road_marker =
      yaml::token<RoadMarker>(yaml::require(road, "road_marker", "road_network"), "road_network.road_marker");
  doc.road_network.traffic_signs = token_list<TrafficSign>(road["traffic_signs"], "road_network.traffic_signs");

  const auto actors = yaml::require(root, "actors", "scene");
  if (!actors.IsSequence() || actors.size() == 0)
    throw ParseError("actors: expected a non-empty list", yaml::line_of(actors));
  std::size_t i = 0;
  for (const auto& n : actors) doc.actors.push_back(read_actor(n, i++));

  const auto oracle = yaml::require(root, "oracle", "scene");
  static constexpr std::array kOracleKeys{"longitudinal", "lateral"};
  yaml::expect_keys(oracle, kOracleKeys, "oracle");
  doc.oracle.longitudinal =
      yaml::token<Longitudinal>(yaml::require(oracle, "longitudinal", "oracle"), "oracle.longitudinal");
  doc.oracle.lateral = yaml::token<Lateral>(yaml::require(oracle, "lateral", "oracle"), "oracle.lateral");

  if (const auto problems = validate_scene_doc(doc); !problems.empty())
    throw ValidationError("scene: " + problems.front());
  return doc;
}

namespace {

// Identifiers print bare unless YAML would read them as something else.
std::string scene_name(const std::string& name) {
  static const std::regex plain("[A-Za-z_][A-Za-z0-9_-]*");
  static const std::set<std::string> reserved{"true", "false", "yes", "no", "on", "off", "null", "y", "n"};
  if (std::regex_match(name, plain) && !reserved.count(to_lower(name))) return name;
  return yaml_quote(name);
}

}  // namespace

std::string serialize_scene_doc(const SceneDoc& doc) {
  std::string out;
  out += "environment:\n";
  out += fmt::format("  weather: {}\n", to_token(doc.environment.weather));
  out += fmt::format("  time: {}\n", to_token(doc.environment.time));
  out += "road_network:\n";
  out += fmt::format("  road_type: {}\n", to_token(doc.road_network.road_type));
  out += fmt::format("  road_marker: {}\n", to_token(doc.road_network.road_marker));
  if (doc.road_network.traffic_signs.empty()) {
    out += "  traffic_signs: []\n";
  } else {
    out += "  traffic_signs:\n";
    for (const auto s : doc.road_network.traffic_signs) out += fmt::format("    - {}\n", to_token(s));
  }
  out += "actors:\n";
  for (const auto& a : doc.actors) {
    out += "  - id: " + scene_name(a.id) + "\n";
    out += fmt::format("    type: {}\n", to_token(a.type));
    out += "    position:\n";
    out += "      reference: " + scene_name(a.position.reference) + "\n";
    out += fmt::format("      relation: {}\n", to_token(a.position.relation));
    if (a.position.distance) out += "      distance: " + format_number(*a.position.distance) + "\n";
    out += fmt::format("    behavior: {}\n", to_token(a.behavior));
    if (a.speed) out += "    speed: " + format_number(*a.speed) + "\n";
  }
  out += "oracle:\n";
  out += fmt::format("  longitudinal: {}\n", to_token(doc.oracle.longitudinal));
  out += fmt::format("  lateral: {}\n", to_token(doc.oracle.lateral));
  return out;
}

// ── SelfCheck ───────────────────────────────────────────────────────────────

SelfCheckTable SelfCheckTable::defaults() {
  SelfCheckTable t;
  t.weather_time = {{Weather::Sunny, TimeOfDay::Night},
                    {Weather::ClearNight, TimeOfDay::Daytime},
                    {Weather::RainyNight, TimeOfDay::Daytime}};
  return t;
}

SelfCheckTable SelfCheckTable::parse(std::string_view text) {
  const YAML::Node root = yaml::load(text);
  SelfCheckTable t;
  if (root.IsNull()) return t;
  static constexpr std::array kKeys{"weather_time", "weather_sign"};
  yaml::expect_keys(root, kKeys, "self-check table");
  const auto pairs = [](const YAML::Node& list, const std::string& what, auto parse_second) {
    using Second = decltype(parse_second(YAML::Node{}, std::string{}));
    std::vector<std::pair<Weather, Second>> out;
    if (!list) return out;
    for (const auto& row : list) {
      if (!row.IsSequence() || row.size() != 2)
        throw ParseError(what + ": each row must be a [weather, value] pair", yaml::line_of(row));
      out.emplace_back(yaml::token<Weather>(row[0], what), parse_second(row[1], what));
    }
    return out;
  };
  t.weather_time = pairs(root["weather_time"], "weather_time",
                         [](const YAML::Node& n, const std::string& w) { return yaml::token<TimeOfDay>(n, w); });
  t.weather_sign = pairs(root["weather_sign"], "weather_sign",
                         [](const YAML::Node& n, const std::string& w) { return yaml::token<TrafficSign>(n, w); });
  return t;
}

namespace {

// Strict order u -> v ("u is ahead of v" / "u is left of v"); reports the
// nodes of one cycle if the relation graph has any.
std::optional<std::vector<std::string>> find_cycle(const std::multimap<std::string, std::string>& edges) {
  std::map<std::string, int> state;  // 0 new, 1 on stack, 2 done
  std::vector<std::string> stack;
  std::optional<std::vector<std::string>> cycle;
  std::function<void(const std::string&)> visit = [&](const std::string& u) {
    state[u] = 1;
    stack.push_back(u);
    const auto [lo, hi] = edges.equal_range(u);
    for (auto it = lo; it != hi && !cycle; ++it) {
      const auto& v = it->second;
      if (state[v] == 1) {
        cycle.emplace(std::find(stack.begin(), stack.end(), v), stack.end());
      } else if (state[v] == 0) {
        visit(v);
      }
    }
    stack.pop_back();
    state[u] = 2;
  };
  for (const auto& [u, _] : edges) {
    if (cycle) break;
    if (state[u] == 0) visit(u);
  }
  return cycle;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : std::string(sep)) + s;
  return out;
}

bool is_static_object(ActorType t) { return t == ActorType::TrafficCone || t == ActorType::Barrier; }

}  // namespace

std::vector<Finding> self_check(const SceneDoc& doc, const SelfCheckTable& table) {
  std::vector<Finding> out;

  std::multimap<std::string, std::string> ahead, left_of;
  for (const auto& a : doc.actors) {
    const auto& ref = a.position.reference;
    switch (a.position.relation) {
      case Relation::Front: ahead.emplace(a.id, ref); break;
      case Relation::Behind: ahead.emplace(ref, a.id); break;
      case Relation::Left: left_of.emplace(a.id, ref); break;
      case Relation::Right: left_of.emplace(ref, a.id); break;
      case Relation::At: break;
    }
  }
  if (const auto c = find_cycle(ahead))
    out.push_back({"relation_contradiction", "longitudinal order is cyclic: " + join(*c, " ahead of ")});
  if (const auto c = find_cycle(left_of))
    out.push_back({"relation_contradiction", "lateral order is cyclic: " + join(*c, " left of ")});

  for (const auto& a : doc.actors) {
    const bool halted = a.behavior == Behavior::Stop || a.behavior == Behavior::Park;
    if (halted && a.speed && *a.speed > 0.0)
      out.push_back({"behavior_speed", fmt::format("actor '{}' has behavior {} but speed {} km/h", a.id,
                                                   to_token(a.behavior), format_number(*a.speed))});
    if (a.behavior == Behavior::WalkCross && a.type != ActorType::Pedestrian)
      out.push_back({"behavior_type", "actor '" + a.id + "' walks across but is a " + std::string(to_token(a.type))});
    if (a.type == ActorType::Pedestrian &&
        (a.behavior == Behavior::LaneChangeLeft || a.behavior == Behavior::LaneChangeRight ||
         a.behavior == Behavior::Follow))
      out.push_back({"behavior_type", "pedestrian '" + a.id + "' cannot " + std::string(to_token(a.behavior))});
    if (is_static_object(a.type) && (!halted || (a.speed && *a.speed > 0.0)))
      out.push_back({"behavior_type", "static object '" + a.id + "' must not move"});
  }

  for (const auto& [w, t] : table.weather_time) {
    if (doc.environment.weather == w && doc.environment.time == t)
      out.push_back({"weather_time", fmt::format("weather {} contradicts time {}", to_token(w), to_token(t))});
  }
  for (const auto& [w, s] : table.weather_sign) {
    const auto& signs = doc.road_network.traffic_signs;
    if (doc.environment.weather == w && std::find(signs.begin(), signs.end(), s) != signs.end())
      out.push_back({"weather_sign", fmt::format("weather {} is flagged with sign {}", to_token(w), to_token(s))});
  }
  return out;
}

// ── Align ───────────────────────────────────────────────────────────────────

RequirementTable::RequirementTable(std::vector<SceneRequirement> rows) : rows_(std::move(rows)) {}

RequirementTable RequirementTable::parse(std::string_view text) {
  const YAML::Node root = yaml::load(text);
  std::vector<SceneRequirement> rows;
  if (root.IsNull()) return RequirementTable{};
  if (!root.IsSequence()) throw ParseError("requirement table must be a list", yaml::line_of(root));
  std::set<std::string> seen;
  std::size_t i = 0;
  for (const auto& node : root) {
    const std::string what = "requirement " + std::to_string(i++);
    static constexpr std::array kKeys{"tag", "requires"};
    yaml::expect_keys(node, kKeys, what);
    SceneRequirement r;
    r.tag = yaml::scalar(yaml::require(node, "tag", what), what + ".tag");
    if (!seen.insert(r.tag).second) throw ParseError(what + ": duplicate tag '" + r.tag + "'", yaml::line_of(node));
    const auto req = yaml::require(node, "requires", what);
    static constexpr std::array kReqKeys{"weather",      "time",       "road_type",     "road_marker",
                                         "traffic_sign", "actor_type", "actor_behavior"};
    yaml::expect_keys(req, kReqKeys, what + ".requires");
    r.weather = token_list<Weather>(req["weather"], what + ".weather");
    r.time = token_list<TimeOfDay>(req["time"], what + ".time");
    r.road_type = token_list<RoadType>(req["road_type"], what + ".road_type");
    r.road_marker = token_list<RoadMarker>(req["road_marker"], what + ".road_marker");
    r.traffic_sign = token_list<TrafficSign>(req["traffic_sign"], what + ".traffic_sign");
    r.actor_type = token_list<ActorType>(req["actor_type"], what + ".actor_type");
    r.actor_behavior = token_list<Behavior>(req["actor_behavior"], what + ".actor_behavior");
    rows.push_back(std::move(r));
  }
  return RequirementTable(std::move(rows));
}

const SceneRequirement* RequirementTable::find(const std::string& tag) const {
  for (const auto& r : rows_)
    if (r.tag == tag) return &r;
  return nullptr;
}

namespace {

template <typename E>
bool any_in(const std::vector<E>& allowed, E value) {
  return allowed.empty() || std::find(allowed.begin(), allowed.end(), value) != allowed.end();
}

}  // namespace

bool satisfies(const SceneDoc& doc, const SceneRequirement& req) {
  if (!any_in(req.weather, doc.environment.weather)) return false;
  if (!any_in(req.time, doc.environment.time)) return false;
  if (!any_in(req.road_type, doc.road_network.road_type)) return false;
  if (!any_in(req.road_marker, doc.road_network.road_marker)) return false;
  if (!req.traffic_sign.empty() &&
      std::none_of(doc.road_network.traffic_signs.begin(), doc.road_network.traffic_signs.end(),
                   [&](TrafficSign s) { return any_in(req.traffic_sign, s); }))
    return false;
  // Actor type and behavior requirements are met by actors other than ego.
  const auto others = [&](auto pred) {
    return std::any_of(doc.actors.begin(), doc.actors.end(), [&](const Actor& a) { return a.id != "ego" && pred(a); });
  };
  if (!req.actor_type.empty() && !others([&](const Actor& a) { return any_in(req.actor_type, a.type); })) return false;
  if (!req.actor_behavior.empty() && !others([&](const Actor& a) { return any_in(req.actor_behavior, a.behavior); }))
    return false;
  return true;
}

std::vector<RuleId> AlignReport::unmatched() const {
  std::vector<RuleId> out;
  for (const auto& r : rules)
    if (!r.matched) out.push_back(r.rule);
  return out;
}

AlignReport align_check(const SceneDoc& doc, const std::vector<const AtomicRule*>& rules,
                        const RequirementTable& table) {
  AlignReport report;
  for (const auto* rule : rules) {
    RuleAlignment a;
    a.rule = rule->id;
    for (const auto& tag : rule->context_tags) {
      const auto* req = table.find(tag);
      if (!req) {
        a.uncovered_tags.push_back(tag);
      } else if (!satisfies(doc, *req)) {
        a.unmet_tags.push_back(tag);
      }
    }
    a.matched = a.unmet_tags.empty();
    report.rules.push_back(std::move(a));
  }
  return report;
}

AlignReport align_check(const SceneDoc& doc, const RuleCombo& combo, const RuleIndex& index,
                        const RequirementTable& table) {
  std::vector<const AtomicRule*> rules;
  for (const auto& id : combo.members) rules.push_back(&index.at(id));
  return align_check(doc, rules, table);
}

}  // namespace drivecombo
