#include "drivecombo/scenario_compiler.hpp"

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <cmath>
#include <functional>
#include <numbers>
#include <set>

#include "yaml_support.hpp"

namespace drivecombo {

namespace {

std::string join_lines(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : "; ") + s;
  return out;
}

constexpr double kPi = std::numbers::pi;
double kmh_to_mps(double v) { return v / 3.6; }

bool is_pedestrian(ActorType t) { return t == ActorType::Pedestrian; }
bool is_static_object(ActorType t) { return t == ActorType::TrafficCone || t == ActorType::Barrier; }
bool is_halted(const Actor& a) {
  return is_static_object(a.type) || a.behavior == Behavior::Stop || a.behavior == Behavior::Park;
}

std::string relation_text(const Actor& a) {
  std::string out = fmt::format("{} {} {}", a.id, to_token(a.position.relation), a.position.reference);
  if (a.position.distance) out += fmt::format(" ({} m)", format_number(*a.position.distance));
  return out;
}

// Signs the map does not place on their own stand at the road-type landmark.
const Landmark& landmark_for(const RoadNetwork& map, const SceneDoc& doc, const std::string& name) {
  if (const auto* l = map.find_landmark(name)) return *l;
  const std::string primary(to_token(doc.road_network.road_type));
  if (name != primary && landmarks(doc).count(name)) {
    if (const auto* l = map.find_landmark(primary)) return *l;
  }
  throw CompileError("map '" + map.name + "' has no landmark '" + name + "'");
}

const ScenePose& pose_of(const std::vector<ScenePose>& poses, const std::string& id) {
  for (const auto& p : poses)
    if (p.actor_id == id) return p;
  throw CompileError("no pose for actor '" + id + "'");
}

const Road& road_of(const RoadNetwork& map, const std::string& id) {
  const auto* r = map.find_road(id);
  if (!r) throw CompileError("map '" + map.name + "' has no road '" + id + "'");
  return *r;
}

}  // namespace

UnsatisfiableConstraints::UnsatisfiableConstraints(std::vector<std::string> violated)
    : CompileError("unsatisfiable placement: " + join_lines(violated)), violated_(std::move(violated)) {}

// ── Assets ──────────────────────────────────────────────────────────────────

AssetCatalog::AssetCatalog(std::vector<Asset> entries) : entries_(std::move(entries)) {}

AssetCatalog AssetCatalog::parse(std::string_view text) {
  const YAML::Node root = yaml::load(text);
  if (!root.IsSequence()) throw ParseError("asset catalog must be a list", yaml::line_of(root));
  std::vector<Asset> out;
  for (const auto& node : root) {
    static constexpr std::array kKeys{"type", "asset", "kind", "category", "dimensions", "max_speed", "properties"};
    yaml::expect_keys(node, kKeys, "asset");
    Asset a;
    a.actor_type = yaml::scalar(yaml::require(node, "type", "asset"), "asset.type");
    const std::string what = "asset for '" + a.actor_type + "'";
    a.name = yaml::scalar(yaml::require(node, "asset", what), what + ".asset");
    a.kind = yaml::token<AssetKind>(yaml::require(node, "kind", what), what + ".kind");
    a.category = yaml::scalar(yaml::require(node, "category", what), what + ".category");
    const auto dims = yaml::require(node, "dimensions", what);
    static constexpr std::array kDimKeys{"length", "width", "height"};
    yaml::expect_keys(dims, kDimKeys, what + ".dimensions");
    a.length = yaml::number(yaml::require(dims, "length", what), what + ".length");
    a.width = yaml::number(yaml::require(dims, "width", what), what + ".width");
    a.height = yaml::number(yaml::require(dims, "height", what), what + ".height");
    if (!(a.length > 0 && a.width > 0 && a.height > 0))
      throw ParseError(what + ": dimensions must be positive", yaml::line_of(dims));
    if (node["max_speed"]) a.max_speed_kmh = yaml::number(node["max_speed"], what + ".max_speed");
    if (const auto props = node["properties"]) {
      if (!props.IsMap()) throw ParseError(what + ".properties: expected a mapping", yaml::line_of(props));
      for (const auto& kv : props) a.properties.emplace_back(kv.first.Scalar(), yaml::scalar(kv.second, what));
    }
    out.push_back(std::move(a));
  }
  return AssetCatalog(std::move(out));
}

const Asset& AssetCatalog::resolve(std::string_view actor_type) const {
  for (const auto& a : entries_)
    if (a.actor_type == actor_type) return a;
  throw ValidationError("asset catalog has no entry for actor type '" + std::string(actor_type) + "'");
}

std::map<std::string, Asset> resolve_assets(const SceneDoc& doc, const AssetCatalog& catalog) {
  std::map<std::string, Asset> out;
  for (const auto& a : doc.actors) out.emplace(a.id, catalog.resolve(to_token(a.type)));
  return out;
}

// ── Geometry ────────────────────────────────────────────────────────────────

std::array<Vec2, 4> footprint(const ScenePose& pose, const Asset& asset) {
  const Vec2 f{std::cos(pose.heading), std::sin(pose.heading)};
  const Vec2 l = left_normal(f);
  const Vec2 hf = f * (0.5 * asset.length), hl = l * (0.5 * asset.width);
  const Vec2 c = pose.position;
  return {c + hf + hl, c - hf + hl, c - hf - hl, c + hf - hl};
}

namespace {

bool separated_on_axes(const std::array<Vec2, 4>& a, const std::array<Vec2, 4>& b) {
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec2 edge = a[(i + 1) % 4] - a[i];
    const Vec2 axis = left_normal(edge);
    double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
    for (const auto& p : a) {
      amin = std::min(amin, dot(p, axis));
      amax = std::max(amax, dot(p, axis));
    }
    for (const auto& p : b) {
      bmin = std::min(bmin, dot(p, axis));
      bmax = std::max(bmax, dot(p, axis));
    }
    if (amax < bmin || bmax < amin) return true;
  }
  return false;
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 d = b - a;
  const double len2 = dot(d, d);
  const double u = len2 > 0 ? std::clamp(dot(p - a, d) / len2, 0.0, 1.0) : 0.0;
  return norm(p - (a + d * u));
}

}  // namespace

double polygon_distance(const std::array<Vec2, 4>& a, const std::array<Vec2, 4>& b) {
  if (!separated_on_axes(a, b) && !separated_on_axes(b, a)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      best = std::min(best, point_segment_distance(a[i], b[j], b[(j + 1) % 4]));
      best = std::min(best, point_segment_distance(b[i], a[j], a[(j + 1) % 4]));
    }
  }
  return best;
}

// ── Placement ───────────────────────────────────────────────────────────────

namespace {

struct Frame {
  const Road* road = nullptr;
  double s = 0.0;
  double lateral = 0.0;
  std::optional<int> lane;
  bool is_actor = false;
};

double speed_for(const Actor& a, const PlacementOptions& o) {
  if (is_halted(a)) return 0.0;
  if (a.speed) return *a.speed;
  return is_pedestrian(a.type) ? o.pedestrian_speed_kmh : o.vehicle_speed_kmh;
}

double heading_for(const Actor& a, const Road& road, double s, double lateral) {
  const double h = road.centerline.heading_at(s);
  if (a.behavior == Behavior::WalkCross) return wrap_angle(h + (lateral < 0.0 ? 0.5 : -0.5) * kPi);
  return h;
}

// Lane for an actor positioned against a landmark. Round 0 prefers lanes that
// leave room for actors declared beside it, then lanes suiting its own
// maneuver, then the rightmost lane.
int choose_lane(const Road& road, const Actor& a, const SceneDoc& doc, SeededRng* jitter) {
  const int n = road.lane_count;
  if (jitter) return static_cast<int>(jitter->index(static_cast<std::size_t>(n)));
  bool needs_left = false, needs_right = false;
  for (const auto& c : doc.actors) {
    if (c.position.reference != a.id || c.position.distance) continue;
    needs_left = needs_left || c.position.relation == Relation::Left;
    needs_right = needs_right || c.position.relation == Relation::Right;
  }
  int best = n - 1, best_score = -1;
  for (int lane = n - 1; lane >= 0; --lane) {
    int score = 0;
    if (needs_left && lane > 0) score += 2;
    if (needs_right && lane < n - 1) score += 2;
    switch (a.behavior) {
      case Behavior::TurnRight: score += lane == n - 1; break;
      case Behavior::TurnLeft: score += lane == 0; break;
      case Behavior::LaneChangeLeft: score += lane > 0; break;
      case Behavior::LaneChangeRight: score += lane < n - 1; break;
      default: break;
    }
    if (score > best_score) {
      best = lane;
      best_score = score;
    }
  }
  return best;
}

Frame frame_of_reference(const Actor& a, const SceneDoc& doc, const RoadNetwork& map,
                         const std::map<std::string, ScenePose>& placed) {
  Frame f;
  const auto& ref = a.position.reference;
  if (const auto it = placed.find(ref); it != placed.end()) {
    f.road = &road_of(map, it->second.road);
    f.s = it->second.s;
    f.lateral = it->second.lateral;
    f.lane = it->second.lane;
    f.is_actor = true;
  } else {
    const auto& lm = landmark_for(map, doc, ref);
    f.road = &road_of(map, lm.road);
    f.s = lm.s;
  }
  return f;
}

struct Placed {
  double s = 0.0;
  double lateral = 0.0;
};

Placed place_one(const Actor& a, const Frame& ref, const SceneDoc& doc, const PlacementOptions& o,
                 SeededRng* jitter) {
  const Road& road = *ref.road;
  const auto& pos = a.position;
  const auto gap = [&] {
    if (pos.distance) return *pos.distance;
    return jitter ? jitter->uniform(o.jitter_gap_min, o.jitter_gap_max) : o.default_gap;
  };
  const auto alongside = [&] { return jitter ? jitter->uniform(-o.alongside_jitter, o.alongside_jitter) : 0.0; };
  const double curb = road.half_width() + o.curb_offset;

  Placed p;
  switch (pos.relation) {
    case Relation::Front:
    case Relation::Behind:
    case Relation::At: {
      const double sign = pos.relation == Relation::Front ? 1.0 : pos.relation == Relation::Behind ? -1.0 : 0.0;
      p.s = ref.s + (sign == 0.0 ? 0.0 : sign * gap());
      if (ref.is_actor) {
        p.lateral = ref.lateral;
      } else if (is_pedestrian(a.type)) {
        p.lateral = -curb;
      } else {
        p.lateral = road.lane_center_offset(choose_lane(road, a, doc, jitter));
      }
      break;
    }
    case Relation::Left:
    case Relation::Right: {
      const double side = pos.relation == Relation::Left ? 1.0 : -1.0;
      p.s = ref.s + alongside();
      if (pos.distance) {
        p.lateral = ref.lateral + side * *pos.distance;
      } else if (ref.is_actor) {
        const int target = ref.lane ? *ref.lane - static_cast<int>(side) : -1;
        if (ref.lane && target >= 0 && target < road.lane_count) {
          p.lateral = road.lane_center_offset(target);
        } else {
          p.lateral = ref.lateral + side * o.lateral_fallback;
        }
      } else if (is_pedestrian(a.type)) {
        p.lateral = side * curb;
      } else {
        std::vector<int> lanes;
        for (int l = 0; l < road.lane_count; ++l)
          if (side * road.lane_center_offset(l) > 0.0) lanes.push_back(l);
        if (lanes.empty()) {
          p.lateral = side * o.lateral_fallback;
        } else {
          const auto pick = jitter ? jitter->index(lanes.size()) : (side > 0 ? 0 : lanes.size() - 1);
          p.lateral = road.lane_center_offset(lanes[pick]);
        }
      }
      break;
    }
  }
  return p;
}

std::vector<std::size_t> placement_order(const SceneDoc& doc) {
  std::vector<std::size_t> order;
  std::set<std::string> done;
  std::vector<bool> taken(doc.actors.size(), false);
  while (order.size() < doc.actors.size()) {
    const auto before = order.size();
    for (std::size_t i = 0; i < doc.actors.size(); ++i) {
      if (taken[i]) continue;
      const auto& ref = doc.actors[i].position.reference;
      if (!doc.find_actor(ref) || done.count(ref)) {
        order.push_back(i);
        taken[i] = true;
        done.insert(doc.actors[i].id);
      }
    }
    if (order.size() == before) throw CompileError("reference cycle among actors");
  }
  return order;
}

}  // namespace

std::vector<ScenePose> instantiate_static_scene(const SceneDoc& doc, const RoadNetwork& map,
                                                const std::map<std::string, Asset>& assets, std::uint64_t seed,
                                                const PlacementOptions& options) {
  if (const auto problems = validate_scene_doc(doc); !problems.empty())
    throw CompileError("invalid scene: " + problems.front());
  for (const auto& a : doc.actors)
    if (!assets.count(a.id)) throw CompileError("no asset for actor '" + a.id + "'");
  const auto order = placement_order(doc);
  SeededRng rng(seed);
  std::vector<std::string> violated;

  for (int round = 0; round < std::max(1, options.max_rounds); ++round) {
    SeededRng* jitter = round == 0 ? nullptr : &rng;
    violated.clear();
    std::map<std::string, ScenePose> placed;
    for (const auto i : order) {
      const Actor& a = doc.actors[i];
      const Frame ref = frame_of_reference(a, doc, map, placed);
      const Placed p = place_one(a, ref, doc, options, jitter);
      const Road& road = *ref.road;
      if (p.s < 0.0 || p.s > road.centerline.length())
        violated.push_back(fmt::format("{}: off road '{}' at s = {:.1f} m", relation_text(a), road.id, p.s));
      ScenePose pose;
      pose.actor_id = a.id;
      pose.road = road.id;
      pose.s = p.s;
      pose.lateral = p.lateral;
      pose.lane = road.lane_at(p.lateral);
      if (is_pedestrian(a.type) && std::abs(p.lateral) > road.half_width()) pose.lane.reset();
      pose.position = road.centerline.offset_point(p.s, p.lateral);
      pose.heading = heading_for(a, road, p.s, p.lateral);
      pose.speed_kmh = speed_for(a, options);
      placed.emplace(a.id, std::move(pose));
    }
    std::vector<ScenePose> poses;
    for (const auto& a : doc.actors) poses.push_back(placed.at(a.id));
    for (std::size_t i = 0; i < poses.size(); ++i) {
      for (std::size_t j = i + 1; j < poses.size(); ++j) {
        const double d = polygon_distance(footprint(poses[i], assets.at(poses[i].actor_id)),
                                          footprint(poses[j], assets.at(poses[j].actor_id)));
        if (d < options.min_clearance)
          violated.push_back(fmt::format("clearance {:.2f} m < {:.2f} m between [{}] and [{}]", d,
                                         options.min_clearance, relation_text(doc.actors[i]),
                                         relation_text(doc.actors[j])));
      }
    }
    if (violated.empty()) return poses;
  }
  throw UnsatisfiableConstraints(violated);
}

std::vector<RelationCheck> verify_relations(const SceneDoc& doc, const RoadNetwork& map,
                                            const std::vector<ScenePose>& poses, double tolerance,
                                            const PlacementOptions& options) {
  std::vector<RelationCheck> out;
  for (const auto& a : doc.actors) {
    RelationCheck c{a.id, a.position.reference, a.position.relation, false, {}};
    const Road* road = nullptr;
    Station ref;
    const bool actor_ref = doc.find_actor(a.position.reference) != nullptr;
    if (actor_ref) {
      const auto& rp = pose_of(poses, a.position.reference);
      road = &road_of(map, rp.road);
      ref = road->centerline.project(rp.position);
    } else {
      const auto& lm = landmark_for(map, doc, a.position.reference);
      road = &road_of(map, lm.road);
      ref = {lm.s, 0.0};
    }
    const Station me = road->centerline.project(pose_of(poses, a.id).position);
    const double ds = me.s - ref.s, dl = me.lateral - ref.lateral;
    const auto d = a.position.distance;
    bool ok = false;
    switch (a.position.relation) {
      case Relation::Front:
      case Relation::Behind: {
        const double along = a.position.relation == Relation::Front ? ds : -ds;
        ok = d ? std::abs(along - *d) <= tolerance : along > tolerance;
        if (actor_ref) ok = ok && std::abs(dl) <= 0.5 * road->lane_width;
        break;
      }
      case Relation::Left:
      case Relation::Right: {
        const double across = a.position.relation == Relation::Left ? dl : -dl;
        ok = (d ? std::abs(across - *d) <= tolerance : across > tolerance) &&
             std::abs(ds) <= options.alongside_window + tolerance;
        break;
      }
      case Relation::At:
        ok = std::abs(ds) <= tolerance && (!actor_ref || std::abs(dl) <= tolerance);
        break;
    }
    c.holds = ok;
    c.detail = fmt::format("road {}: ds = {:.3f} m, dl = {:.3f} m", road->id, ds, dl);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<std::string> check_poses(const SceneDoc& doc, const RoadNetwork& map,
                                     const std::vector<ScenePose>& poses) {
  std::vector<std::string> out;
  constexpr double kMaxHeadingError = 15.0 * kPi / 180.0;
  for (const auto& p : poses) {
    const auto* a = doc.find_actor(p.actor_id);
    const auto* road = map.find_road(p.road);
    if (!a || !road) {
      out.push_back("pose '" + p.actor_id + "' does not match the scene or map");
      continue;
    }
    const Station st = road->centerline.project(p.position);
    if (p.lane) {
      const double off = std::abs(st.lateral - road->lane_center_offset(*p.lane));
      if (off > 0.5 * road->lane_width + 1e-9)
        out.push_back(fmt::format("{}: {:.3f} m outside lane {} of '{}'", p.actor_id, off, *p.lane, road->id));
    }
    if (a->behavior != Behavior::WalkCross) {
      const double err = std::abs(wrap_angle(p.heading - road->centerline.heading_at(st.s)));
      if (err > kMaxHeadingError)
        out.push_back(fmt::format("{}: heading {:.1f} deg off the lane tangent", p.actor_id, err * 180.0 / kPi));
    }
  }
  return out;
}

// ── Weather ─────────────────────────────────────────────────────────────────

const std::vector<std::pair<Weather, WeatherParams>>& weather_table() {
  using P = PrecipitationType;
  // cloudiness, type, precipitation, wetness, fog, visibility, sun altitude, azimuth, friction
  static const std::vector<std::pair<Weather, WeatherParams>> table{
      {Weather::Sunny, {10, P::Dry, 0, 0, 0, 10000, 70, 180, 1.0}},
      {Weather::Cloudy, {80, P::Dry, 0, 0, 5, 5000, 45, 180, 1.0}},
      {Weather::Rain, {80, P::Rain, 50, 60, 10, 2000, 30, 180, 0.8}},
      {Weather::HeavyRain, {100, P::Rain, 100, 100, 25, 500, 15, 180, 0.6}},
      {Weather::Fog, {60, P::Dry, 0, 20, 70, 150, 30, 180, 0.9}},
      {Weather::Snow, {90, P::Snow, 60, 40, 20, 800, 20, 180, 0.4}},
      {Weather::ClearNight, {10, P::Dry, 0, 0, 0, 3000, -30, 0, 1.0}},
      {Weather::RainyNight, {90, P::Rain, 60, 70, 15, 400, -30, 0, 0.7}},
  };
  return table;
}

WeatherParams map_weather(const Environment& env) {
  WeatherParams p;
  for (const auto& [w, row] : weather_table())
    if (w == env.weather) p = row;
  switch (env.time) {
    case TimeOfDay::Daytime: break;
    case TimeOfDay::Night: p.sun_altitude = -30; p.sun_azimuth = 0; break;
    case TimeOfDay::Dusk: p.sun_altitude = 5; p.sun_azimuth = 270; break;
    case TimeOfDay::Dawn: p.sun_altitude = 5; p.sun_azimuth = 90; break;
  }
  return p;
}

// ── Trajectories ────────────────────────────────────────────────────────────

StrategyTable StrategyTable::defaults() {
  StrategyTable t;
  t.table_ = {
      {Behavior::GoForward, Strategy::CenterlineFollow},
      {Behavior::TurnLeft, Strategy::CenterlineFollow},
      {Behavior::TurnRight, Strategy::CenterlineFollow},
      {Behavior::LaneChangeLeft, Strategy::LaneChange},
      {Behavior::LaneChangeRight, Strategy::LaneChange},
      {Behavior::Follow, Strategy::Following},
      {Behavior::Stop, Strategy::CenterlineFollow},
      {Behavior::Yield, Strategy::InteractiveApproach},
      {Behavior::WalkCross, Strategy::PedestrianNav},
      {Behavior::Park, Strategy::CenterlineFollow},
  };
  return t;
}

StrategyTable StrategyTable::parse(std::string_view text) {
  const YAML::Node root = yaml::load(text);
  if (!root.IsMap()) throw ParseError("strategy table must be a mapping", yaml::line_of(root));
  StrategyTable t;
  for (const auto& kv : root) {
    const auto b = yaml::token<Behavior>(kv.first, "strategy table key");
    t.table_[b] = yaml::token<Strategy>(kv.second, "strategy for " + kv.first.Scalar());
  }
  for (const auto b : all_values<Behavior>())
    if (!t.table_.count(b))
      throw ParseError("strategy table misses behavior '" + std::string(to_token(b)) + "'", yaml::line_of(root));
  return t;
}

Strategy StrategyTable::at(Behavior b) const { return table_.at(b); }

namespace {

double smoothstep(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

template <typename LateralFn>
void append_follow(std::vector<Vec2>& pts, const Road& road, double s0, double s1, double step, LateralFn lateral) {
  if (s1 < s0) return;
  const int n = static_cast<int>(std::ceil((s1 - s0) / step - 1e-9));
  for (int i = 0; i <= n; ++i) {
    const double s = std::min(s1, s0 + i * step);
    const Vec2 p = road.centerline.offset_point(s, lateral(s));
    if (pts.empty() || norm(p - pts.back()) > 1e-9) pts.push_back(p);
  }
}

std::vector<Vec2> straight_path(const Road& road, double s0, double lateral, double step) {
  std::vector<Vec2> pts;
  append_follow(pts, road, s0, road.centerline.length(), step, [&](double) { return lateral; });
  return pts;
}

std::vector<Vec2> turn_path(const RoadNetwork& map, const Road& road, const ScenePose& pose, bool right,
                            double step) {
  const Intersection* junction = nullptr;
  double sc = 0.0;
  for (const auto& ix : map.intersections) {
    if (std::find(ix.roads.begin(), ix.roads.end(), road.id) == ix.roads.end()) continue;
    const double s = road.centerline.project(ix.center).s;
    if (s - ix.radius >= pose.s - 1e-9 && (!junction || s < sc)) {
      junction = &ix;
      sc = s;
    }
  }
  const char* side = right ? "right" : "left";
  if (!junction)
    throw TopologyGap(fmt::format("{}: no junction ahead on road '{}' for a {} turn", pose.actor_id, road.id, side));
  const double ha = road.centerline.heading_at(sc);
  const Road* target = nullptr;
  double sb = 0.0;
  for (const auto& rid : junction->roads) {
    if (rid == road.id) continue;
    const Road& cand = road_of(map, rid);
    const double s = cand.centerline.project(junction->center).s;
    const double turn = wrap_angle(cand.centerline.heading_at(s) - ha);
    const bool matches = right ? (turn <= -kPi / 3 && turn >= -2 * kPi / 3) : (turn >= kPi / 3 && turn <= 2 * kPi / 3);
    if (matches && s + junction->radius <= cand.centerline.length()) {
      target = &cand;
      sb = s;
      break;
    }
  }
  if (!target)
    throw TopologyGap(fmt::format("{}: junction '{}' has no {} turn from road '{}'", pose.actor_id, junction->id, side,
                                  road.id));

  const double lat_out = target->lane_center_offset(right ? target->lane_count - 1 : 0);
  std::vector<Vec2> pts;
  const double s_entry = sc - junction->radius, s_exit = sb + junction->radius;
  append_follow(pts, road, pose.s, s_entry, step, [&](double) { return pose.lateral; });
  const Vec2 p0 = road.centerline.offset_point(s_entry, pose.lateral);
  const Vec2 p3 = target->centerline.offset_point(s_exit, lat_out);
  const double k = 0.5 * norm(p3 - p0);
  const Vec2 p1 = p0 + road.centerline.tangent_at(s_entry) * k;
  const Vec2 p2 = p3 - target->centerline.tangent_at(s_exit) * k;
  constexpr int kCurveSteps = 40;
  for (int i = 1; i <= kCurveSteps; ++i) {
    const double u = static_cast<double>(i) / kCurveSteps, v = 1.0 - u;
    pts.push_back(p0 * (v * v * v) + p1 * (3 * v * v * u) + p2 * (3 * v * u * u) + p3 * (u * u * u));
  }
  append_follow(pts, *target, s_exit + step, target->centerline.length(), step, [&](double) { return lat_out; });
  return pts;
}

std::vector<Vec2> lane_change_path(const Road& road, const ScenePose& pose, bool left, double length,
                                   double step) {
  const int target = pose.lane ? *pose.lane + (left ? -1 : 1) : -1;
  if (!pose.lane || target < 0 || target >= road.lane_count)
    throw TopologyGap(fmt::format("{}: no lane {} of {} on road '{}'", pose.actor_id, left ? "left" : "right",
                                  pose.lane ? "lane " + std::to_string(*pose.lane) : std::string("the shoulder"),
                                  road.id));
  const double from = pose.lateral, to = road.lane_center_offset(target);
  std::vector<Vec2> pts;
  append_follow(pts, road, pose.s, road.centerline.length(), std::min(step, 0.5), [&](double s) {
    return from + (to - from) * smoothstep((s - pose.s) / length);
  });
  return pts;
}

std::vector<Vec2> crossing_path(const Road& road, const ScenePose& pose, double curb) {
  const double side = pose.lateral < 0.0 ? 1.0 : -1.0;
  const double target = side * (road.half_width() + curb);
  return {road.centerline.offset_point(pose.s, pose.lateral), road.centerline.offset_point(pose.s, target)};
}

// Distance travelled by time t.
using Profile = std::function<double(double)>;

Profile constant_speed(double v) {
  return [v](double t) { return v * t; };
}

Profile stop_within(double v, double d) {
  if (d <= 0.0 || v <= 0.0) return [](double) { return 0.0; };
  const double a = v * v / (2.0 * d);
  const double t_stop = v / a;
  return [=](double t) { return t >= t_stop ? d : v * t - 0.5 * a * t * t; };
}

}  // namespace

std::vector<Trajectory> generate_trajectories(const std::vector<ScenePose>& poses, const SceneDoc& doc,
                                              const RoadNetwork& map, const TrajectoryOptions& options) {
  if (!(options.dt > 0.0) || !(options.horizon > 0.0)) throw ConfigError("dt and horizon must be positive");
  const auto steps = static_cast<std::size_t>(std::llround(options.horizon / options.dt));
  std::vector<Trajectory> out;
  for (const auto& pose : poses) {
    const auto* actor = doc.find_actor(pose.actor_id);
    if (!actor) throw CompileError("pose for unknown actor '" + pose.actor_id + "'");
    const Road& road = road_of(map, pose.road);
    Trajectory tr;
    tr.actor_id = pose.actor_id;
    tr.strategy = options.strategies.at(actor->behavior);
    double v = kmh_to_mps(pose.speed_kmh);
    std::vector<Vec2> pts;
    Profile profile = constant_speed(v);

    switch (tr.strategy) {
      case Strategy::CenterlineFollow:
        if (actor->behavior == Behavior::TurnLeft || actor->behavior == Behavior::TurnRight) {
          pts = turn_path(map, road, pose, actor->behavior == Behavior::TurnRight, options.path_step);
        } else {
          pts = straight_path(road, pose.s, pose.lateral, options.path_step);
        }
        break;
      case Strategy::LaneChange: {
        const bool left = actor->behavior == Behavior::LaneChangeLeft || actor->behavior == Behavior::TurnLeft;
        pts = lane_change_path(road, pose, left, options.lane_change_length, options.path_step);
        break;
      }
      case Strategy::Following: {
        pts = straight_path(road, pose.s, pose.lateral, options.path_step);
        if (const auto* leader = doc.find_actor(actor->position.reference)) {
          const auto& lp = pose_of(poses, leader->id);
          if (lp.road == pose.road && lp.s > pose.s) v = std::min(v, kmh_to_mps(lp.speed_kmh));
        }
        profile = constant_speed(v);
        break;
      }
      case Strategy::InteractiveApproach: {
        pts = straight_path(road, pose.s, pose.lateral, options.path_step);
        std::optional<double> stop_s;
        const auto& ref = actor->position.reference;
        double ref_s = -1.0;
        if (doc.find_actor(ref)) {
          const auto& rp = pose_of(poses, ref);
          if (rp.road == pose.road) ref_s = road.centerline.project(rp.position).s;
        } else if (const auto* lm = map.find_landmark(ref); lm && lm->road == pose.road) {
          ref_s = lm->s;
        }
        if (ref_s > pose.s) stop_s = ref_s - options.stop_margin;
        if (!stop_s) {
          for (const auto& lm : map.landmarks)
            if (lm.road == pose.road && lm.s > pose.s + options.stop_margin && (!stop_s || lm.s - options.stop_margin < *stop_s))
              stop_s = lm.s - options.stop_margin;
        }
        const double d = stop_s ? *stop_s - pose.s : v * v / (2.0 * options.comfortable_decel);
        profile = stop_within(v, d);
        break;
      }
      case Strategy::PedestrianNav:
        pts = crossing_path(road, pose, options.curb_offset);
        break;
    }

    const Polyline path(pts.size() >= 2 ? pts : std::vector<Vec2>{});
    tr.max_speed = v;
    tr.samples.reserve(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) {
      const double t = static_cast<double>(i) * options.dt;
      TrajectorySample smp{t, pose.position.x, pose.position.y, pose.heading};
      if (v > 0.0 && path.length() > 0.0) {
        const double s = std::min(profile(t), path.length());
        const Vec2 p = path.point_at(s);
        smp.x = p.x;
        smp.y = p.y;
        smp.heading = path.heading_at(s);
      }
      tr.samples.push_back(smp);
    }
    out.push_back(std::move(tr));
  }
  return out;
}

std::vector<std::string> check_trajectory(const Trajectory& trajectory, double tolerance) {
  std::vector<std::string> out;
  const auto& s = trajectory.samples;
  if (s.empty()) {
    out.push_back(trajectory.actor_id + ": no samples");
    return out;
  }
  if (s.front().t != 0.0) out.push_back(trajectory.actor_id + ": first sample not at t = 0");
  for (std::size_t i = 1; i < s.size(); ++i) {
    const double dt = s[i].t - s[i - 1].t;
    if (!(dt > 0.0)) {
      out.push_back(fmt::format("{}: time not increasing at sample {}", trajectory.actor_id, i));
      continue;
    }
    const double step = std::hypot(s[i].x - s[i - 1].x, s[i].y - s[i - 1].y);
    if (step > trajectory.max_speed * dt + tolerance)
      out.push_back(fmt::format("{}: moved {:.4f} m in {:.3f} s at sample {} (limit {:.3f} m/s)", trajectory.actor_id,
                                step, dt, i, trajectory.max_speed));
  }
  return out;
}

}  // namespace drivecombo
