#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <numbers>

#include "drivecombo/openscenario.hpp"
#include "drivecombo/scenario_compiler.hpp"

using namespace drivecombo;

namespace {

const std::string kDataDir = std::string(DRIVECOMBO_SOURCE_DIR) + "/data";
constexpr double kPi = std::numbers::pi;

const MapLibrary& maps() {
  static const MapLibrary lib = MapLibrary::load_dir(kDataDir + "/maps");
  return lib;
}

const AssetCatalog& catalog() {
  static const AssetCatalog c = AssetCatalog::parse(read_file(kDataDir + "/catalog/assets.yaml"));
  return c;
}

SceneDoc load_scene(const std::string& name) {
  return parse_scene_doc(read_file(kDataDir + "/scenes/" + name + ".yaml"));
}

std::vector<std::string> fixture_scene_names() {
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(kDataDir + "/scenes"))
    if (e.path().extension() == ".yaml") out.push_back(e.path().stem().string());
  std::sort(out.begin(), out.end());
  return out;
}

Actor actor(std::string id, std::string ref, Relation rel, std::optional<double> distance = std::nullopt,
            Behavior b = Behavior::GoForward, ActorType t = ActorType::Car) {
  Actor a;
  a.id = std::move(id);
  a.type = t;
  a.position = {std::move(ref), rel, distance};
  a.behavior = b;
  return a;
}

// Straight-road scene with the ego at the road-type landmark.
SceneDoc straight_scene(Behavior ego_behavior = Behavior::GoForward, std::optional<double> ego_speed = 36.0) {
  SceneDoc d;
  d.road_network.road_type = RoadType::UrbanRoad;
  d.actors.push_back(actor("ego", "urban_road", Relation::At, std::nullopt, ego_behavior));
  d.actors.back().speed = ego_speed;
  return d;
}

const ScenePose& pose(const std::vector<ScenePose>& poses, const std::string& id) {
  for (const auto& p : poses)
    if (p.actor_id == id) return p;
  throw std::runtime_error("no pose " + id);
}

double path_length(const Trajectory& t) {
  double len = 0.0;
  for (std::size_t i = 1; i < t.samples.size(); ++i)
    len += std::hypot(t.samples[i].x - t.samples[i - 1].x, t.samples[i].y - t.samples[i - 1].y);
  return len;
}

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

// ── Maps and geometry ───────────────────────────────────────────────────────

TEST(RoadNetwork, ShippedMapsLoad) {
  EXPECT_EQ(maps().names(), (std::vector<std::string>{"four_way", "highway_3lane", "narrow_bridge", "ramp", "straight"}));
  EXPECT_EQ(maps().for_road_type(RoadType::Intersection).name, "four_way");
  EXPECT_EQ(maps().for_road_type(RoadType::RuralRoad).name, "straight");
  for (const auto t : all_values<RoadType>()) EXPECT_NO_THROW(maps().for_road_type(t));
}

TEST(RoadNetwork, InvariantsRejected) {
  const std::string base = "name: m\nroads:\n  - {id: a, lanes: 1, centerline: [[0, 0], [10, 0]]}\n";
  EXPECT_NO_THROW(parse_road_network(base));
  EXPECT_THROW(parse_road_network("name: m\nroads:\n  - {id: a, lanes: 0, centerline: [[0, 0], [10, 0]]}\n"),
               ValidationError);
  EXPECT_THROW(parse_road_network("name: m\nroads:\n  - {id: a, lanes: 1, centerline: [[0, 0]]}\n"), ValidationError);
  EXPECT_THROW(parse_road_network(
                   "name: m\nroads:\n  - {id: a, lanes: 1, centerline: [[0, 0], [10, 0], [10, 10], [5, -5]]}\n"),
               ValidationError);
  EXPECT_THROW(parse_road_network(base + "intersections:\n  - {id: x, center: [0, 0], roads: [a, b]}\n"),
               ValidationError);
  EXPECT_THROW(parse_road_network(base + "landmarks:\n  - {name: l, road: a, s: 11}\n"), ValidationError);
  EXPECT_THROW(parse_road_network(base + "bridges: []\n"), ParseError);
}

TEST(RoadNetwork, LaneOffsets) {
  Road r;
  r.lane_count = 3;
  r.lane_width = 3.75;
  EXPECT_DOUBLE_EQ(r.lane_center_offset(0), 3.75);
  EXPECT_DOUBLE_EQ(r.lane_center_offset(1), 0.0);
  EXPECT_DOUBLE_EQ(r.lane_center_offset(2), -3.75);
  EXPECT_EQ(r.lane_at(3.0), 0);
  EXPECT_EQ(r.lane_at(-5.0), 2);
  EXPECT_EQ(r.lane_at(6.0), std::nullopt);
}

TEST(RoadNetwork, ProjectionInvertsOffsetPoint) {
  const Polyline line({{0, 0}, {50, 0}, {100, 20}, {150, 20}});
  SeededRng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double s = rng.uniform(0.0, line.length());
    const double lat = rng.uniform(-2.0, 2.0);
    const Station st = line.project(line.offset_point(s, lat));
    // Near a convex corner the offset point may project to the other segment;
    // the recovered point must still coincide.
    const Vec2 back = line.offset_point(st.s, st.lateral);
    const Vec2 orig = line.offset_point(s, lat);
    ASSERT_NEAR(norm(back - orig), 0.0, 1e-6) << s << " " << lat;
  }
}

TEST(Geometry, PolygonDistance) {
  const Asset box{"car", "b", AssetKind::Vehicle, "car", 4.0, 2.0, 1.5, 100, {}};
  ScenePose a, b;
  a.position = {0, 0};
  b.position = {5, 0};
  EXPECT_NEAR(polygon_distance(footprint(a, box), footprint(b, box)), 1.0, 1e-9);
  b.position = {3.9, 0.5};
  EXPECT_EQ(polygon_distance(footprint(a, box), footprint(b, box)), 0.0);
  b.position = {0, 3.0};
  EXPECT_NEAR(polygon_distance(footprint(a, box), footprint(b, box)), 1.0, 1e-9);
  // Rotated by 45 degrees: the nearest corner sits sqrt(2) * 1 + ... checked
  // against the corner-to-edge distance computed by hand.
  b.heading = kPi / 4;
  b.position = {6, 0};
  const double corner = 6 - std::hypot(2.0, 1.0) * std::cos(kPi / 4 - std::atan2(1.0, 2.0));
  EXPECT_NEAR(polygon_distance(footprint(a, box), footprint(b, box)), corner - 2.0, 1e-9);
}

// ── Assets ──────────────────────────────────────────────────────────────────

TEST(Assets, Resolution) {
  EXPECT_EQ(catalog().resolve("car").name, "vehicle.lincoln.mkz");
  const auto& amb = catalog().resolve("ambulance");
  EXPECT_NE(std::find(amb.properties.begin(), amb.properties.end(), std::pair<std::string, std::string>{"light_bar", "true"}),
            amb.properties.end());
  EXPECT_THROW(catalog().resolve("hovercraft"), ValidationError);
  for (const auto t : all_values<ActorType>()) EXPECT_NO_THROW(catalog().resolve(to_token(t)));

  const auto doc = load_scene("appendix_example");
  const auto assets = resolve_assets(doc, catalog());
  EXPECT_EQ(assets.size(), doc.actors.size());
  EXPECT_THROW(resolve_assets(doc, AssetCatalog{}), ValidationError);
}

TEST(Assets, FirstMatchWins) {
  const auto c = AssetCatalog::parse(
      "- {type: car, asset: first, kind: vehicle, category: car, dimensions: {length: 4, width: 2, height: 1.5}}\n"
      "- {type: car, asset: second, kind: vehicle, category: car, dimensions: {length: 4, width: 2, height: 1.5}}\n");
  EXPECT_EQ(c.resolve("car").name, "first");
  EXPECT_THROW(AssetCatalog::parse("- {type: car, asset: x, kind: boat, category: c, dimensions: {length: 1, width: 1, "
                                   "height: 1}}\n"),
               ParseError);
}

// ── Placement ───────────────────────────────────────────────────────────────

TEST(Placement, DeclaredFrontDistance) {
  auto doc = straight_scene();
  doc.actors.push_back(actor("vehicle_1", "ego", Relation::Front, 20.0));
  const auto& map = maps().get("straight");
  const auto poses = instantiate_static_scene(doc, map, resolve_assets(doc, catalog()), 0);
  // The straight map runs along +x, so the gap is the x difference.
  const double gap = pose(poses, "vehicle_1").position.x - pose(poses, "ego").position.x;
  EXPECT_LE(std::abs(gap - 20.0), 0.5);
  EXPECT_NEAR(pose(poses, "vehicle_1").position.y, pose(poses, "ego").position.y, 1e-9);
}

TEST(Placement, SamePoseIsUnsatisfiable) {
  auto doc = straight_scene();
  doc.actors.push_back(actor("twin", "ego", Relation::At));
  const auto& map = maps().get("straight");
  try {
    instantiate_static_scene(doc, map, resolve_assets(doc, catalog()), 0);
    FAIL() << "expected UnsatisfiableConstraints";
  } catch (const UnsatisfiableConstraints& e) {
    ASSERT_FALSE(e.violated().empty());
    EXPECT_NE(e.violated().front().find("twin at ego"), std::string::npos);
    EXPECT_NE(e.violated().front().find("clearance"), std::string::npos);
  }
}

TEST(Placement, OffRoadIsUnsatisfiable) {
  auto doc = straight_scene();
  doc.actors.push_back(actor("far", "ego", Relation::Front, 1000.0));
  try {
    instantiate_static_scene(doc, maps().get("straight"), resolve_assets(doc, catalog()), 0);
    FAIL() << "expected UnsatisfiableConstraints";
  } catch (const UnsatisfiableConstraints& e) {
    EXPECT_NE(std::string(e.what()).find("off road"), std::string::npos);
  }
}

TEST(Placement, ResamplingSeparatesDefaultGaps) {
  // Both default to 15 m ahead of the ego in round 0 and collide.
  auto doc = straight_scene();
  doc.actors.push_back(actor("a", "ego", Relation::Front));
  doc.actors.push_back(actor("b", "ego", Relation::Front));
  const auto& map = maps().get("straight");
  const auto assets = resolve_assets(doc, catalog());
  const auto poses = instantiate_static_scene(doc, map, assets, 11);
  for (const auto& c : verify_relations(doc, map, poses)) EXPECT_TRUE(c.holds) << c.actor << " " << c.detail;
  EXPECT_GE(polygon_distance(footprint(pose(poses, "a"), assets.at("a")), footprint(pose(poses, "b"), assets.at("b"))),
            0.5);
  EXPECT_EQ(instantiate_static_scene(doc, map, assets, 11), poses);
  PlacementOptions one_round;
  one_round.max_rounds = 1;
  EXPECT_THROW(instantiate_static_scene(doc, map, assets, 11, one_round), UnsatisfiableConstraints);
}

TEST(Placement, AppendixExampleOnFourWay) {
  const auto doc = load_scene("appendix_example");
  const auto& map = maps().get("four_way");
  const auto poses = instantiate_static_scene(doc, map, resolve_assets(doc, catalog()), 0);
  for (const auto& c : verify_relations(doc, map, poses)) EXPECT_TRUE(c.holds) << c.actor << " " << c.detail;
  EXPECT_TRUE(check_poses(doc, map, poses).empty());
  // Hand-derived from the map: northbound traffic runs along +y at x in
  // [0, 7]; the junction center is the origin.
  const auto& ego = pose(poses, "ego");
  const auto& v1 = pose(poses, "vehicle_1");
  const auto& v2 = pose(poses, "vehicle_2");
  EXPECT_LT(ego.position.y, 0.0);
  EXPECT_GT(v1.position.y, 0.0);
  EXPECT_GT(v2.position.x, ego.position.x);  // right of a northbound car is +x
  EXPECT_NEAR(v2.position.y, ego.position.y, 5.0);
  EXPECT_NEAR(ego.heading, kPi / 2, 1e-9);
}

TEST(Placement, MissingLandmark) {
  auto doc = straight_scene();
  doc.road_network.road_type = RoadType::Highway;  // not a landmark on the straight map
  doc.actors[0].position.reference = "highway";
  EXPECT_THROW(instantiate_static_scene(doc, maps().get("straight"), resolve_assets(doc, catalog()), 0), CompileError);
}

TEST(Placement, SignWithoutLandmarkUsesRoadTypeLandmark) {
  auto doc = straight_scene();
  doc.road_network.traffic_signs = {TrafficSign::NoUTurnSign};
  doc.actors[0].position = {"no_u_turn_sign", Relation::Behind, 10.0};
  const auto& map = maps().get("straight");
  const auto poses = instantiate_static_scene(doc, map, resolve_assets(doc, catalog()), 0);
  EXPECT_NEAR(poses[0].s, map.find_landmark("urban_road")->s - 10.0, 1e-9);
}

// ── Weather ─────────────────────────────────────────────────────────────────

TEST(Weather, Table) {
  EXPECT_EQ(weather_table().size(), enum_count<Weather>());
  for (std::size_t i = 0; i < weather_table().size(); ++i) EXPECT_EQ(weather_table()[i].first, all_values<Weather>()[i]);
  const auto sunny = map_weather({Weather::Sunny, TimeOfDay::Daytime});
  EXPECT_EQ(sunny.fog_density, 0.0);
  EXPECT_EQ(sunny.precipitation, 0.0);
  EXPECT_GE(sunny.sun_altitude, 45.0);
  const auto fog = map_weather({Weather::Fog, TimeOfDay::Daytime});
  EXPECT_GT(fog.fog_density, 0.0);
  EXPECT_LT(fog.visibility, sunny.visibility);
  EXPECT_EQ(map_weather({Weather::Snow, TimeOfDay::Daytime}).precipitation_type, PrecipitationType::Snow);
  EXPECT_LT(map_weather({Weather::Rain, TimeOfDay::Night}).sun_altitude, 0.0);
  EXPECT_EQ(map_weather({Weather::Rain, TimeOfDay::Dusk}).precipitation, map_weather({Weather::Rain, TimeOfDay::Daytime}).precipitation);
}

// ── Trajectories ────────────────────────────────────────────────────────────

namespace {

struct Planned {
  SceneDoc doc;
  std::vector<ScenePose> poses;
  std::vector<Trajectory> trajectories;
};

Planned plan(SceneDoc doc, const std::string& map_name, const TrajectoryOptions& opts = {}) {
  const auto& map = maps().get(map_name);
  auto poses = instantiate_static_scene(doc, map, resolve_assets(doc, catalog()), 0);
  auto trajectories = generate_trajectories(poses, doc, map, opts);
  return {std::move(doc), std::move(poses), std::move(trajectories)};
}

}  // namespace

TEST(Trajectories, GoForwardKinematics) {
  const auto p = plan(straight_scene(Behavior::GoForward, 36.0), "straight");
  const auto& t = p.trajectories[0];
  EXPECT_EQ(t.strategy, Strategy::CenterlineFollow);
  ASSERT_EQ(t.samples.size(), 101u);
  EXPECT_NEAR(path_length(t), 100.0, 1.0);
  EXPECT_NEAR(t.samples.back().t, 10.0, 1e-12);
  EXPECT_TRUE(check_trajectory(t).empty());
  // Stays in its lane throughout.
  const auto& road = *maps().get("straight").find_road("main");
  for (const auto& s : t.samples) {
    const auto st = road.centerline.project({s.x, s.y});
    ASSERT_LE(std::abs(st.lateral - road.lane_center_offset(*p.poses[0].lane)), 0.5 * road.lane_width);
  }
}

TEST(Trajectories, StopHoldsPose) {
  const auto p = plan(straight_scene(Behavior::Stop, std::nullopt), "straight");
  for (const auto& s : p.trajectories[0].samples) {
    ASSERT_EQ(s.x, p.poses[0].position.x);
    ASSERT_EQ(s.y, p.poses[0].position.y);
    ASSERT_EQ(s.heading, p.poses[0].heading);
  }
}

TEST(Trajectories, LaneChangeRightOneLaneWidth) {
  const auto p = plan(straight_scene(Behavior::LaneChangeRight, 54.0), "straight");
  const auto& t = p.trajectories[0];
  EXPECT_EQ(t.strategy, Strategy::LaneChange);
  const auto& road = *maps().get("straight").find_road("main");
  const auto start = road.centerline.project({t.samples.front().x, t.samples.front().y});
  const auto end = road.centerline.project({t.samples.back().x, t.samples.back().y});
  EXPECT_NEAR(start.lateral - end.lateral, road.lane_width, 0.1);
  EXPECT_TRUE(check_trajectory(t).empty());
  // The lateral move completes within the maneuver length.
  for (const auto& s : t.samples) {
    const auto st = road.centerline.project({s.x, s.y});
    if (st.s - start.s >= 30.0) ASSERT_NEAR(start.lateral - st.lateral, road.lane_width, 1e-6);
  }
}

TEST(Trajectories, LaneChangeWithoutTargetLane) {
  auto doc = straight_scene(Behavior::LaneChangeLeft, 40.0);
  doc.road_network.road_type = RoadType::NarrowBridge;
  doc.actors[0].position.reference = "narrow_bridge";
  const auto& map = maps().get("narrow_bridge");
  const auto poses = instantiate_static_scene(doc, map, resolve_assets(doc, catalog()), 0);
  EXPECT_THROW(generate_trajectories(poses, doc, map), TopologyGap);
}

TEST(Trajectories, TurnsFollowJunctionConnections) {
  auto doc = load_scene("appendix_example");
  const auto p = plan(doc, "four_way");
  const auto& t = p.trajectories[0];
  EXPECT_TRUE(check_trajectory(t).empty());
  // Ego starts northbound and ends heading east on the eastbound road.
  EXPECT_NEAR(t.samples.back().heading, 0.0, 1e-6);
  EXPECT_GT(t.samples.back().x, 12.0);
  EXPECT_LT(t.samples.back().y, 0.0);

  auto left = doc;
  left.actors[0].behavior = Behavior::TurnLeft;
  const auto pl = plan(left, "four_way");
  EXPECT_NEAR(std::abs(pl.trajectories[0].samples.back().heading), kPi, 1e-6);

  auto straight = straight_scene(Behavior::TurnRight, 30.0);
  const auto& map = maps().get("straight");
  const auto poses = instantiate_static_scene(straight, map, resolve_assets(straight, catalog()), 0);
  EXPECT_THROW(generate_trajectories(poses, straight, map), TopologyGap);
}

TEST(Trajectories, YieldStopsBeforeReference) {
  const auto p = plan(load_scene("pedestrian_crossing"), "straight");
  const auto& t = pose(p.poses, "ego");
  const auto& tr = p.trajectories[0];
  EXPECT_EQ(tr.strategy, Strategy::InteractiveApproach);
  const double sign_s = maps().get("straight").find_landmark("pedestrian_crossing_sign")->s;
  EXPECT_NEAR(tr.samples.back().x, t.position.x + (sign_s - 5.0 - t.s), 1e-6);
  EXPECT_TRUE(check_trajectory(tr).empty());
}

TEST(Trajectories, PedestrianCrossesRoad) {
  const auto p = plan(load_scene("pedestrian_crossing"), "straight");
  const auto& walker = p.trajectories[1];
  EXPECT_EQ(walker.strategy, Strategy::PedestrianNav);
  EXPECT_LT(walker.samples.front().y, -3.5);
  EXPECT_GT(walker.samples.back().y, walker.samples.front().y);
  EXPECT_NEAR(walker.samples.back().x, walker.samples.front().x, 1e-9);
  EXPECT_TRUE(check_trajectory(walker).empty());
}

TEST(Trajectories, FollowingMatchesSlowerLeader) {
  const auto p = plan(load_scene("fog_following"), "straight");
  const auto& ego = p.trajectories[1];
  EXPECT_EQ(ego.strategy, Strategy::Following);
  EXPECT_NEAR(ego.max_speed, 40.0 / 3.6, 1e-12);
  EXPECT_NEAR(path_length(ego), 40.0 / 3.6 * 10.0, 0.5);
}

TEST(Trajectories, CustomSampling) {
  TrajectoryOptions opts;
  opts.dt = 0.25;
  opts.horizon = 5.0;
  const auto p = plan(straight_scene(), "straight", opts);
  EXPECT_EQ(p.trajectories[0].samples.size(), 21u);
  opts.dt = 0.0;
  EXPECT_THROW(plan(straight_scene(), "straight", opts), ConfigError);
}

TEST(Trajectories, CheckerCatchesViolations) {
  Trajectory t{"x", Strategy::CenterlineFollow, 1.0, {{0, 0, 0, 0}, {0.1, 0.1, 0, 0}, {0.1, 0.2, 0, 0}}};
  EXPECT_FALSE(check_trajectory(t).empty());
  t.samples = {{0, 0, 0, 0}, {0.1, 0.5, 0, 0}};
  EXPECT_FALSE(check_trajectory(t).empty());
  t.samples = {{0.1, 0, 0, 0}, {0.2, 0.05, 0, 0}};
  EXPECT_FALSE(check_trajectory(t).empty());
  t.samples = {{0, 0, 0, 0}, {0.1, 0.1, 0, 0}};
  EXPECT_TRUE(check_trajectory(t).empty());
}

TEST(Trajectories, StrategyTableFile) {
  auto text = std::string("go_forward: centerline_follow\nturn_left: centerline_follow\nturn_right: centerline_follow\n"
                          "lane_change_left: lane_change\nlane_change_right: lane_change\nfollow: following\n"
                          "stop: centerline_follow\nyield: interactive_approach\nwalk_cross: pedestrian_nav\n");
  EXPECT_THROW(StrategyTable::parse(text), ParseError);  // park missing
  text += "park: centerline_follow\n";
  const auto t = StrategyTable::parse(text);
  for (const auto b : all_values<Behavior>()) EXPECT_EQ(t.at(b), StrategyTable::defaults().at(b));
  EXPECT_THROW(StrategyTable::parse(text + "hover: lane_change\n"), ParseError);
}

// ── Emission ────────────────────────────────────────────────────────────────

TEST(Emission, CardinalityAndDeterminism) {
  const auto doc = load_scene("appendix_example");
  const auto a = compile_scene("appendix_example", doc, maps().get("four_way"), catalog());
  EXPECT_EQ(count_of(a.xml, "<ScenarioObject "), 3u);
  EXPECT_EQ(count_of(a.xml, "<FollowTrajectoryAction>"), 3u);
  EXPECT_EQ(count_of(a.xml, "<Vertex "), 3u * 101u);
  EXPECT_NE(a.xml.find("world coordinates"), std::string::npos);
  EXPECT_TRUE(validate_openscenario(a.xml).empty());
  const auto b = compile_scene("appendix_example", doc, maps().get("four_way"), catalog());
  EXPECT_EQ(a.xml, b.xml);
  EXPECT_EQ(emit_openscenario(doc, a.assets, a.poses, a.trajectories, a.weather, {"appendix_example", "four_way"}),
            a.xml);
}

TEST(Emission, ActorSetMismatch) {
  const auto doc = load_scene("appendix_example");
  const auto a = compile_scene("x", doc, maps().get("four_way"), catalog());
  auto poses = a.poses;
  poses.pop_back();
  EXPECT_THROW(emit_openscenario(doc, a.assets, poses, a.trajectories, a.weather, {"x", "four_way"}), ActorSetMismatch);
  auto trajectories = a.trajectories;
  trajectories.push_back(trajectories.front());
  EXPECT_THROW(emit_openscenario(doc, a.assets, a.poses, trajectories, a.weather, {"x", "four_way"}), ActorSetMismatch);
}

TEST(Emission, ValidatorRejectsBrokenDocuments) {
  const auto a = compile_scene("x", load_scene("appendix_example"), maps().get("four_way"), catalog());
  EXPECT_FALSE(validate_openscenario("<OpenSCENARIO>").empty());
  EXPECT_FALSE(validate_openscenario("<Other/>").empty());

  auto dup = a.xml;
  const auto at = dup.find("<Vertex time=\"0.100\">");
  dup.replace(at, 21, "<Vertex time=\"0.000\">");
  EXPECT_FALSE(validate_openscenario(dup).empty());

  auto renamed = a.xml;
  renamed.replace(renamed.find("entityRef=\"vehicle_2\">"), 22, "entityRef=\"ghost\">");
  EXPECT_FALSE(validate_openscenario(renamed).empty());

  auto no_stop = a.xml;
  const auto s = no_stop.find("    <StopTrigger>");
  const auto e = no_stop.find("</StopTrigger>") + 15;
  no_stop.erase(s, e - s);
  EXPECT_FALSE(validate_openscenario(no_stop).empty());
}

TEST(Emission, SelfCheckFailureIsNamed) {
  auto doc = load_scene("appendix_example");
  doc.environment.time = TimeOfDay::Night;
  try {
    compile_scene("x", doc, maps().get("four_way"), catalog());
    FAIL() << "expected CompileError";
  } catch (const CompileError& e) {
    EXPECT_NE(std::string(e.what()).find("self-check"), std::string::npos);
  }
}

// ── Fixture corpus ──────────────────────────────────────────────────────────

TEST(Fixtures, CompileVerifyAndMatchGoldens) {
  const bool update = std::getenv("DRIVECOMBO_UPDATE_GOLDENS") != nullptr;
  const auto names = fixture_scene_names();
  ASSERT_GE(names.size(), 8u);
  const auto start = std::chrono::steady_clock::now();
  for (const auto& name : names) {
    const auto doc = load_scene(name);
    const auto& map = maps().for_road_type(doc.road_network.road_type);
    const auto c = compile_scene(name, doc, map, catalog());
    for (const auto& r : verify_relations(doc, map, c.poses))
      EXPECT_TRUE(r.holds) << name << ": " << r.actor << " " << to_token(r.relation) << " " << r.reference << " "
                           << r.detail;
    EXPECT_TRUE(check_poses(doc, map, c.poses).empty()) << name;
    for (const auto& t : c.trajectories) {
      const auto problems = check_trajectory(t);
      EXPECT_TRUE(problems.empty()) << name << ": " << (problems.empty() ? "" : problems.front());
    }
    EXPECT_TRUE(validate_openscenario(c.xml).empty()) << name;
    const auto golden = kDataDir + "/golden/" + name + ".xosc";
    if (update) write_file(golden, c.xml);
    ASSERT_TRUE(std::filesystem::exists(golden)) << golden;
    EXPECT_EQ(read_file(golden), c.xml) << name;
  }
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 10.0);
}

TEST(Fixtures, RandomScenesCompileOrNameTheirFailure) {
  SeededRng rng(5);
  const auto pick = [&](auto values) { return values[rng.index(values.size())]; };
  int compiled = 0;
  for (int i = 0; i < 150; ++i) {
    SceneDoc doc;
    doc.road_network.road_type = pick(all_values<RoadType>());
    doc.environment = {Weather::Cloudy, TimeOfDay::Daytime};
    const std::vector<Behavior> moving{Behavior::GoForward, Behavior::Follow, Behavior::Stop, Behavior::Yield,
                                       Behavior::LaneChangeLeft, Behavior::LaneChangeRight, Behavior::TurnRight};
    const std::size_t n = 1 + rng.index(4);
    for (std::size_t k = 0; k < n; ++k) {
      Actor a;
      a.id = k == 0 ? "ego" : "actor_" + std::to_string(k);
      a.type = pick(std::vector<ActorType>{ActorType::Car, ActorType::Truck, ActorType::Bicycle, ActorType::Van});
      a.behavior = pick(moving);
      a.position.reference =
          k == 0 || rng.uniform() < 0.3 ? std::string(to_token(doc.road_network.road_type)) : doc.actors[rng.index(k)].id;
      a.position.relation = pick(all_values<Relation>());
      if (rng.uniform() < 0.5) a.position.distance = 5.0 + static_cast<double>(rng.index(40));
      doc.actors.push_back(a);
    }
    if (!self_check(doc).empty()) continue;
    try {
      const auto c = compile_scene("random", doc, maps().for_road_type(doc.road_network.road_type), catalog());
      for (const auto& r : verify_relations(doc, maps().for_road_type(doc.road_network.road_type), c.poses))
        ASSERT_TRUE(r.holds) << r.actor << " " << r.detail;
      ++compiled;
    } catch (const CompileError& e) {
      ASSERT_GT(std::string(e.what()).size(), 20u);
    }
  }
  EXPECT_GT(compiled, 30);
}
