#include "drivecombo/openscenario.hpp"

#include <fmt/format.h>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

namespace drivecombo {

namespace {

std::string num(double v) {
  auto s = fmt::format("{:.3f}", v);
  if (s == "-0.000") s = "0.000";
  return s;
}

std::string escape(std::string_view text) {
  std::string out;
  for (const char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

// Minimal indenting writer; attributes are written in the order given.
class XmlWriter {
 public:
  using Attrs = std::vector<std::pair<std::string, std::string>>;

  void open(const std::string& tag, const Attrs& attrs = {}) {
    line("<" + tag + render(attrs) + ">");
    stack_.push_back(tag);
  }
  void leaf(const std::string& tag, const Attrs& attrs = {}) { line("<" + tag + render(attrs) + "/>"); }
  void close() {
    const auto tag = stack_.back();
    stack_.pop_back();
    line("</" + tag + ">");
  }
  void raw(const std::string& text) { line(text); }
  std::string str() const { return out_; }

 private:
  static std::string render(const Attrs& attrs) {
    std::string s;
    for (const auto& [k, v] : attrs) s += " " + k + "=\"" + escape(v) + "\"";
    return s;
  }
  void line(const std::string& text) {
    out_.append(2 * stack_.size(), ' ');
    out_ += text;
    out_ += '\n';
  }

  std::vector<std::string> stack_;
  std::string out_;
};

std::string date_time(const SceneDoc& doc) {
  switch (doc.environment.time) {
    case TimeOfDay::Daytime: return "2024-06-01T12:00:00";
    case TimeOfDay::Night: return "2024-06-01T23:00:00";
    case TimeOfDay::Dusk: return "2024-06-01T19:30:00";
    case TimeOfDay::Dawn: return "2024-06-01T05:30:00";
  }
  return "2024-06-01T12:00:00";
}

std::string cloud_state(double cloudiness) {
  if (cloudiness < 20) return "free";
  if (cloudiness < 50) return "cloudy";
  if (cloudiness < 90) return "overcast";
  return "rainy";
}

void world_position(XmlWriter& w, double x, double y, double h) {
  w.open("Position");
  w.leaf("WorldPosition", {{"x", num(x)}, {"y", num(y)}, {"z", num(0)}, {"h", num(h)}});
  w.close();
}

void bounding_box(XmlWriter& w, const Asset& a) {
  w.open("BoundingBox");
  w.leaf("Center", {{"x", num(0)}, {"y", num(0)}, {"z", num(0.5 * a.height)}});
  w.leaf("Dimensions", {{"width", num(a.width)}, {"length", num(a.length)}, {"height", num(a.height)}});
  w.close();
}

void properties(XmlWriter& w, const Asset& a, const std::string& actor_type) {
  w.open("Properties");
  w.leaf("Property", {{"name", "actor_type"}, {"value", actor_type}});
  for (const auto& [k, v] : a.properties) w.leaf("Property", {{"name", k}, {"value", v}});
  w.close();
}

void entity(XmlWriter& w, const Actor& actor, const Asset& a) {
  w.open("ScenarioObject", {{"name", actor.id}});
  const std::string type(to_token(actor.type));
  switch (a.kind) {
    case AssetKind::Vehicle:
      w.open("Vehicle", {{"name", a.name}, {"vehicleCategory", a.category}});
      w.leaf("ParameterDeclarations");
      bounding_box(w, a);
      w.leaf("Performance", {{"maxSpeed", num(a.max_speed_kmh / 3.6)}, {"maxAcceleration", num(5)},
                             {"maxDeceleration", num(8)}});
      w.open("Axles");
      w.leaf("FrontAxle", {{"maxSteering", num(0.5)}, {"wheelDiameter", num(0.7)}, {"trackWidth", num(0.8 * a.width)},
                           {"positionX", num(0.3 * a.length)}, {"positionZ", num(0.35)}});
      w.leaf("RearAxle", {{"maxSteering", num(0)}, {"wheelDiameter", num(0.7)}, {"trackWidth", num(0.8 * a.width)},
                          {"positionX", num(-0.3 * a.length)}, {"positionZ", num(0.35)}});
      w.close();
      properties(w, a, type);
      w.close();
      break;
    case AssetKind::Pedestrian:
      w.open("Pedestrian", {{"model", a.name}, {"mass", num(80)}, {"name", a.name}, {"pedestrianCategory", a.category}});
      w.leaf("ParameterDeclarations");
      bounding_box(w, a);
      properties(w, a, type);
      w.close();
      break;
    case AssetKind::Misc:
      w.open("MiscObject", {{"miscObjectCategory", a.category}, {"mass", num(10)}, {"name", a.name}});
      w.leaf("ParameterDeclarations");
      bounding_box(w, a);
      properties(w, a, type);
      w.close();
      break;
  }
  w.close();
}

void simulation_time_trigger(XmlWriter& w, const std::string& tag, const std::string& name, double value,
                             const std::string& edge) {
  w.open(tag);
  w.open("ConditionGroup");
  w.open("Condition", {{"name", name}, {"delay", num(0)}, {"conditionEdge", edge}});
  w.open("ByValueCondition");
  w.leaf("SimulationTimeCondition", {{"value", num(value)}, {"rule", "greaterThan"}});
  w.close();
  w.close();
  w.close();
  w.close();
}

}  // namespace

std::string emit_openscenario(const SceneDoc& doc, const std::map<std::string, Asset>& assets,
                              const std::vector<ScenePose>& poses, const std::vector<Trajectory>& trajectories,
                              const WeatherParams& weather, const ScenarioHeader& header) {
  std::set<std::string> ids;
  for (const auto& a : doc.actors) ids.insert(a.id);
  const auto same_ids = [&](const auto& items, auto key) {
    std::multiset<std::string> got;
    for (const auto& i : items) got.insert(key(i));
    return got.size() == ids.size() && std::set<std::string>(got.begin(), got.end()) == ids;
  };
  if (!same_ids(poses, [](const ScenePose& p) { return p.actor_id; }) ||
      !same_ids(trajectories, [](const Trajectory& t) { return t.actor_id; }) ||
      !same_ids(assets, [](const auto& kv) { return kv.first; }))
    throw ActorSetMismatch("scene, assets, poses and trajectories cover different actors");

  const auto pose_for = [&](const std::string& id) -> const ScenePose& {
    return *std::find_if(poses.begin(), poses.end(), [&](const ScenePose& p) { return p.actor_id == id; });
  };
  const auto trajectory_for = [&](const std::string& id) -> const Trajectory& {
    return *std::find_if(trajectories.begin(), trajectories.end(),
                         [&](const Trajectory& t) { return t.actor_id == id; });
  };
  double horizon = 0.0;
  for (const auto& t : trajectories)
    if (!t.samples.empty()) horizon = std::max(horizon, t.samples.back().t);

  XmlWriter w;
  w.raw("<?xml version=\"1.0\" encoding=\"UTF-8\"?>");
  w.raw("<!-- Positions and trajectories use world coordinates (WorldPosition, metres, radians). -->");
  w.open("OpenSCENARIO");
  w.leaf("FileHeader", {{"revMajor", "1"}, {"revMinor", "0"}, {"date", "2024-06-01T00:00:00"},
                        {"description", header.name}, {"author", "drivecombo"}});
  w.leaf("ParameterDeclarations");
  w.leaf("CatalogLocations");
  w.open("RoadNetwork");
  w.leaf("LogicFile", {{"filepath", header.map_name + ".xodr"}});
  w.close();

  w.open("Entities");
  for (const auto& a : doc.actors) entity(w, a, assets.at(a.id));
  w.close();

  w.open("Storyboard");
  w.open("Init");
  w.open("Actions");
  w.open("GlobalAction");
  w.open("EnvironmentAction");
  w.open("Environment", {{"name", "environment"}});
  w.leaf("TimeOfDay", {{"animation", "false"}, {"dateTime", date_time(doc)}});
  w.open("Weather", {{"cloudState", cloud_state(weather.cloudiness)}});
  constexpr double deg = std::numbers::pi / 180.0;
  w.leaf("Sun", {{"intensity", num(weather.sun_altitude > 0 ? 1000.0 * (1.0 - weather.cloudiness / 200.0) : 0.0)},
                 {"azimuth", num(weather.sun_azimuth * deg)},
                 {"elevation", num(weather.sun_altitude * deg)}});
  w.leaf("Fog", {{"visualRange", num(weather.visibility)}});
  w.leaf("Precipitation", {{"precipitationType", weather.precipitation_type == PrecipitationType::Snow ? "snow"
                                                 : weather.precipitation_type == PrecipitationType::Rain ? "rain"
                                                                                                         : "dry"},
                           {"intensity", num(weather.precipitation / 100.0)}});
  w.close();
  w.leaf("RoadCondition", {{"frictionScaleFactor", num(weather.friction)}});
  w.close();
  w.close();
  w.close();
  for (const auto& a : doc.actors) {
    const auto& p = pose_for(a.id);
    w.open("Private", {{"entityRef", a.id}});
    w.open("PrivateAction");
    w.open("TeleportAction");
    world_position(w, p.position.x, p.position.y, p.heading);
    w.close();
    w.close();
    w.open("PrivateAction");
    w.open("LongitudinalAction");
    w.open("SpeedAction");
    w.leaf("SpeedActionDynamics", {{"dynamicsShape", "step"}, {"value", num(0)}, {"dynamicsDimension", "time"}});
    w.open("SpeedActionTarget");
    w.leaf("AbsoluteTargetSpeed", {{"value", num(p.speed_kmh / 3.6)}});
    w.close();
    w.close();
    w.close();
    w.close();
    w.close();
  }
  w.close();
  w.close();

  w.open("Story", {{"name", "story"}});
  w.open("Act", {{"name", "act"}});
  for (const auto& a : doc.actors) {
    const auto& tr = trajectory_for(a.id);
    w.open("ManeuverGroup", {{"maximumExecutionCount", "1"}, {"name", "group_" + a.id}});
    w.open("Actors", {{"selectTriggeringEntities", "false"}});
    w.leaf("EntityRef", {{"entityRef", a.id}});
    w.close();
    w.open("Maneuver", {{"name", "maneuver_" + a.id}});
    w.open("Event", {{"name", "event_" + a.id}, {"priority", "overwrite"}});
    w.open("Action", {{"name", "follow_" + a.id}});
    w.open("PrivateAction");
    w.open("RoutingAction");
    w.open("FollowTrajectoryAction");
    w.open("Trajectory", {{"name", std::string(to_token(tr.strategy)) + "_" + a.id}, {"closed", "false"}});
    w.leaf("ParameterDeclarations");
    w.open("Shape");
    w.open("Polyline");
    for (const auto& s : tr.samples) {
      w.open("Vertex", {{"time", num(s.t)}});
      world_position(w, s.x, s.y, s.heading);
      w.close();
    }
    w.close();
    w.close();
    w.close();
    w.open("TimeReference");
    w.leaf("Timing", {{"domainAbsoluteRelative", "absolute"}, {"scale", num(1)}, {"offset", num(0)}});
    w.close();
    w.leaf("TrajectoryFollowingMode", {{"followingMode", "position"}});
    w.close();
    w.close();
    w.close();
    w.close();
    simulation_time_trigger(w, "StartTrigger", "start_" + a.id, 0.0, "rising");
    w.close();
    w.close();
    w.close();
  }
  simulation_time_trigger(w, "StartTrigger", "start_act", 0.0, "rising");
  w.close();
  w.close();
  simulation_time_trigger(w, "StopTrigger", "end", horizon, "rising");
  w.close();
  w.close();
  return w.str();
}

// ── Validation ──────────────────────────────────────────────────────────────

namespace {

using boost::property_tree::ptree;

std::optional<double> attr_number(const ptree& node, const std::string& name) {
  const auto v = node.get_optional<std::string>("<xmlattr>." + name);
  if (!v) return std::nullopt;
  try {
    std::size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size() || !std::isfinite(d)) return std::nullopt;
    return d;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::string attr(const ptree& node, const std::string& name) {
  return node.get<std::string>("<xmlattr>." + name, "");
}

bool world_position_ok(const ptree& position) {
  const auto wp = position.get_child_optional("WorldPosition");
  return wp && attr_number(*wp, "x") && attr_number(*wp, "y") && attr_number(*wp, "h");
}

// Depth-first collection of every child named `tag`.
void collect(const ptree& node, const std::string& tag, std::vector<const ptree*>& out) {
  for (const auto& [k, child] : node) {
    if (k == tag) out.push_back(&child);
    collect(child, tag, out);
  }
}

}  // namespace

std::vector<std::string> validate_openscenario(const std::string& xml) {
  std::vector<std::string> out;
  ptree doc;
  try {
    std::istringstream in(xml);
    boost::property_tree::read_xml(in, doc);
  } catch (const boost::property_tree::xml_parser_error& e) {
    out.push_back(std::string("not well-formed XML: ") + e.what());
    return out;
  }
  const auto root = doc.get_child_optional("OpenSCENARIO");
  if (!root) {
    out.push_back("root element is not OpenSCENARIO");
    return out;
  }
  const auto header = root->get_child_optional("FileHeader");
  if (!header || attr(*header, "revMajor") != "1") out.push_back("FileHeader with revMajor 1 missing");
  if (!root->get_child_optional("RoadNetwork.LogicFile")) out.push_back("RoadNetwork.LogicFile missing");

  std::set<std::string> entities;
  if (const auto ents = root->get_child_optional("Entities")) {
    for (const auto& [k, obj] : *ents) {
      if (k == "<xmlattr>") continue;
      if (k != "ScenarioObject") {
        out.push_back("unexpected element in Entities: " + k);
        continue;
      }
      const auto name = attr(obj, "name");
      if (name.empty() || !entities.insert(name).second) out.push_back("missing or duplicate entity name '" + name + "'");
      int defs = 0;
      for (const auto& [ck, c] : obj) {
        if (ck == "Vehicle" || ck == "Pedestrian" || ck == "MiscObject") {
          ++defs;
          if (!c.get_child_optional("BoundingBox.Dimensions")) out.push_back("entity '" + name + "' lacks a bounding box");
        }
      }
      if (defs != 1) out.push_back("entity '" + name + "' must define exactly one object");
    }
  } else {
    out.push_back("Entities missing");
  }
  if (entities.empty()) out.push_back("no entities");

  const auto story = root->get_child_optional("Storyboard");
  if (!story) {
    out.push_back("Storyboard missing");
    return out;
  }
  const auto init = story->get_child_optional("Init.Actions");
  if (!init) {
    out.push_back("Storyboard.Init.Actions missing");
  } else {
    int env = 0;
    std::map<std::string, int> teleports;
    for (const auto& [k, a] : *init) {
      if (k == "GlobalAction" && a.get_child_optional("EnvironmentAction.Environment.Weather")) ++env;
      if (k == "Private") {
        const auto ref = attr(a, "entityRef");
        if (!entities.count(ref)) out.push_back("init action for unknown entity '" + ref + "'");
        for (const auto& [pk, pa] : a) {
          if (pk != "PrivateAction") continue;
          if (const auto pos = pa.get_child_optional("TeleportAction.Position")) {
            ++teleports[ref];
            if (!world_position_ok(*pos)) out.push_back("bad teleport position for '" + ref + "'");
          }
        }
      }
    }
    if (env != 1) out.push_back("expected exactly one environment action with weather");
    for (const auto& e : entities)
      if (teleports[e] != 1) out.push_back("entity '" + e + "' needs exactly one initial teleport");
  }

  std::map<std::string, int> follow;
  std::vector<const ptree*> groups;
  collect(*story, "ManeuverGroup", groups);
  for (const auto* g : groups) {
    std::vector<const ptree*> refs, actions;
    collect(g->get_child("Actors", ptree{}), "EntityRef", refs);
    collect(*g, "FollowTrajectoryAction", actions);
    if (refs.size() != 1) {
      out.push_back("maneuver group '" + attr(*g, "name") + "' must name one actor");
      continue;
    }
    const auto ref = attr(*refs.front(), "entityRef");
    if (!entities.count(ref)) out.push_back("maneuver group for unknown entity '" + ref + "'");
    for (const auto* act : actions) {
      ++follow[ref];
      const auto polyline = act->get_child_optional("Trajectory.Shape.Polyline");
      if (!polyline) {
        out.push_back("trajectory of '" + ref + "' has no polyline");
        continue;
      }
      std::optional<double> last;
      std::size_t count = 0;
      for (const auto& [vk, v] : *polyline) {
        if (vk != "Vertex") continue;
        const auto t = attr_number(v, "time");
        const auto pos = v.get_child_optional("Position");
        if (!t || !pos || !world_position_ok(*pos)) {
          out.push_back("malformed vertex in trajectory of '" + ref + "'");
          break;
        }
        if ((!last && *t != 0.0) || (last && !(*t > *last))) {
          out.push_back("vertex times of '" + ref + "' must start at 0 and strictly increase");
          break;
        }
        last = t;
        ++count;
      }
      if (count < 2) out.push_back("trajectory of '" + ref + "' needs at least two vertices");
    }
  }
  for (const auto& e : entities)
    if (follow[e] != 1) out.push_back("entity '" + e + "' needs exactly one trajectory action");
  if (!story->get_child_optional("StopTrigger")) out.push_back("StopTrigger missing");
  return out;
}

// ── Whole scene ─────────────────────────────────────────────────────────────

CompiledScenario compile_scene(const std::string& name, const SceneDoc& doc, const RoadNetwork& map,
                               const AssetCatalog& catalog, const CompileOptions& options) {
  if (const auto findings = self_check(doc); !findings.empty())
    throw CompileError("scene '" + name + "' fails self-check: " + findings.front().message);
  CompiledScenario out;
  out.name = name;
  out.map_name = map.name;
  out.assets = resolve_assets(doc, catalog);
  out.poses = instantiate_static_scene(doc, map, out.assets, options.seed, options.placement);
  out.trajectories = generate_trajectories(out.poses, doc, map, options.trajectory);
  out.weather = map_weather(doc.environment);
  out.xml = emit_openscenario(doc, out.assets, out.poses, out.trajectories, out.weather, {name, map.name});
  return out;
}

}  // namespace drivecombo
