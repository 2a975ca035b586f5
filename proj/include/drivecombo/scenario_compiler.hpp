#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "drivecombo/road_network.hpp"
#include "drivecombo/scene_dsl.hpp"

namespace drivecombo {

// A scene that cannot be turned into a scenario on the given map.
class CompileError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Placement failed in every resampling round. `violated` lists the
// constraints broken in the last round.
class UnsatisfiableConstraints : public CompileError {
 public:
  explicit UnsatisfiableConstraints(std::vector<std::string> violated);
  const std::vector<std::string>& violated() const { return violated_; }

 private:
  std::vector<std::string> violated_;
};

// A maneuver needs a lane or junction connection the map does not have.
class TopologyGap : public CompileError {
 public:
  using CompileError::CompileError;
};

// ── Assets ──────────────────────────────────────────────────────────────────

enum class AssetKind { Vehicle, Pedestrian, Misc };

template <>
struct EnumTraits<AssetKind> {
  static constexpr std::array entries{
      EnumEntry<AssetKind>{AssetKind::Vehicle, "vehicle"},
      EnumEntry<AssetKind>{AssetKind::Pedestrian, "pedestrian"},
      EnumEntry<AssetKind>{AssetKind::Misc, "misc"},
  };
};

struct Asset {
  std::string actor_type;  // actor type token it serves
  std::string name;        // simulator blueprint
  AssetKind kind = AssetKind::Vehicle;
  std::string category;    // vehicle/pedestrian/misc object category in the scenario file
  double length = 4.5;
  double width = 1.9;
  double height = 1.5;
  double max_speed_kmh = 180.0;
  std::vector<std::pair<std::string, std::string>> properties;

  bool operator==(const Asset&) const = default;
};

class AssetCatalog {
 public:
  AssetCatalog() = default;
  explicit AssetCatalog(std::vector<Asset> entries);
  // YAML list of {type, asset, kind, category, dimensions: {length, width,
  // height}, max_speed, properties: {k: v}}.
  static AssetCatalog parse(std::string_view text);

  // First entry serving the type token. Throws ValidationError when none does.
  const Asset& resolve(std::string_view actor_type) const;
  const std::vector<Asset>& entries() const { return entries_; }

 private:
  std::vector<Asset> entries_;
};

// Actor id -> asset. Throws ValidationError for an uncovered actor type.
std::map<std::string, Asset> resolve_assets(const SceneDoc& doc, const AssetCatalog& catalog);

// ── Static scene ────────────────────────────────────────────────────────────

struct ScenePose {
  std::string actor_id;
  Vec2 position;   // bounding-box center, world metres
  double heading = 0.0;  // radians
  std::string road;
  std::optional<int> lane;  // nullopt on the shoulder or curb
  double s = 0.0;
  double lateral = 0.0;
  double speed_kmh = 0.0;

  bool operator==(const ScenePose&) const = default;
};

struct PlacementOptions {
  double default_gap = 15.0;        // front/behind, metres
  double lateral_fallback = 3.0;    // left/right without an adjacent lane
  double min_clearance = 0.5;
  int max_rounds = 50;
  double jitter_gap_min = 10.0;
  double jitter_gap_max = 25.0;
  double alongside_jitter = 2.0;    // longitudinal slack for left/right
  double alongside_window = 5.0;    // |ds| accepted as "alongside"
  double curb_offset = 1.0;         // pedestrians next to a landmark stand this far off the road edge
  double vehicle_speed_kmh = 30.0;
  double pedestrian_speed_kmh = 5.0;
};

// Places every actor (declaration order in the result). Round 0 uses the
// default gaps and lane choice; later rounds jitter only free parameters.
// Throws UnsatisfiableConstraints after `max_rounds`, CompileError when the
// map lacks a referenced landmark.
std::vector<ScenePose> instantiate_static_scene(const SceneDoc& doc, const RoadNetwork& map,
                                                const std::map<std::string, Asset>& assets, std::uint64_t seed,
                                                const PlacementOptions& options = {});

// Oriented bounding rectangle of an actor at its pose.
std::array<Vec2, 4> footprint(const ScenePose& pose, const Asset& asset);
// Separation between two convex polygons; 0 when they overlap.
double polygon_distance(const std::array<Vec2, 4>& a, const std::array<Vec2, 4>& b);

struct RelationCheck {
  std::string actor;
  std::string reference;
  Relation relation = Relation::Front;
  bool holds = false;
  std::string detail;
};

// Re-derives each declared relation from the world positions alone, by
// projecting them onto the reference's road.
std::vector<RelationCheck> verify_relations(const SceneDoc& doc, const RoadNetwork& map,
                                            const std::vector<ScenePose>& poses, double tolerance = 0.5,
                                            const PlacementOptions& options = {});

// Lane bounds and heading (within 15 degrees of the lane tangent, except for
// pedestrians crossing). Empty when all poses are legal.
std::vector<std::string> check_poses(const SceneDoc& doc, const RoadNetwork& map, const std::vector<ScenePose>& poses);

// ── Weather ─────────────────────────────────────────────────────────────────

enum class PrecipitationType { Dry, Rain, Snow };

template <>
struct EnumTraits<PrecipitationType> {
  static constexpr std::array entries{
      EnumEntry<PrecipitationType>{PrecipitationType::Dry, "dry"},
      EnumEntry<PrecipitationType>{PrecipitationType::Rain, "rain"},
      EnumEntry<PrecipitationType>{PrecipitationType::Snow, "snow"},
  };
};

struct WeatherParams {
  double cloudiness = 0.0;     // percent
  PrecipitationType precipitation_type = PrecipitationType::Dry;
  double precipitation = 0.0;  // percent
  double wetness = 0.0;        // percent
  double fog_density = 0.0;    // percent
  double visibility = 10000.0; // metres
  double sun_altitude = 0.0;   // degrees
  double sun_azimuth = 0.0;    // degrees
  double friction = 1.0;       // road friction scale

  bool operator==(const WeatherParams&) const = default;
};

// One row per weather condition, in enum order.
const std::vector<std::pair<Weather, WeatherParams>>& weather_table();

// Row for the weather; daytime keeps the row's sun, other times move it.
WeatherParams map_weather(const Environment& env);

// ── Trajectories ────────────────────────────────────────────────────────────

enum class Strategy { CenterlineFollow, LaneChange, Following, InteractiveApproach, PedestrianNav };

template <>
struct EnumTraits<Strategy> {
  static constexpr std::array entries{
      EnumEntry<Strategy>{Strategy::CenterlineFollow, "centerline_follow"},
      EnumEntry<Strategy>{Strategy::LaneChange, "lane_change"},
      EnumEntry<Strategy>{Strategy::Following, "following"},
      EnumEntry<Strategy>{Strategy::InteractiveApproach, "interactive_approach"},
      EnumEntry<Strategy>{Strategy::PedestrianNav, "pedestrian_nav"},
  };
};

class StrategyTable {
 public:
  static StrategyTable defaults();
  // YAML mapping behavior -> strategy; must cover every behavior.
  static StrategyTable parse(std::string_view text);
  Strategy at(Behavior b) const;

 private:
  std::map<Behavior, Strategy> table_;
};

struct TrajectorySample {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;

  bool operator==(const TrajectorySample&) const = default;
};

struct Trajectory {
  std::string actor_id;
  Strategy strategy = Strategy::CenterlineFollow;
  double max_speed = 0.0;  // m/s bound used for the speed invariant
  std::vector<TrajectorySample> samples;

  bool operator==(const Trajectory&) const = default;
};

struct TrajectoryOptions {
  double dt = 0.1;
  double horizon = 10.0;
  double lane_change_length = 30.0;
  double stop_margin = 5.0;
  double comfortable_decel = 3.0;  // m/s^2
  double path_step = 1.0;
  double curb_offset = 1.0;  // pedestrians cross to this far beyond the road edge
  StrategyTable strategies = StrategyTable::defaults();
};

// One trajectory per pose, same order. Throws TopologyGap when a lane change
// has no target lane or a turn has no junction connection ahead, ConfigError
// for a non-positive dt or horizon.
std::vector<Trajectory> generate_trajectories(const std::vector<ScenePose>& poses, const SceneDoc& doc,
                                              const RoadNetwork& map, const TrajectoryOptions& options = {});

// Time starts at 0 and strictly increases; each step moves at most
// max_speed * dt + tolerance. Empty when the trajectory is sound.
std::vector<std::string> check_trajectory(const Trajectory& trajectory, double tolerance = 1e-6);

// ── Whole scene ─────────────────────────────────────────────────────────────

struct CompileOptions {
  PlacementOptions placement;
  TrajectoryOptions trajectory;
  std::uint64_t seed = 0;
};

struct CompiledScenario {
  std::string name;
  std::string map_name;
  std::map<std::string, Asset> assets;
  std::vector<ScenePose> poses;
  std::vector<Trajectory> trajectories;
  WeatherParams weather;
  std::string xml;
};

// Validates, places, plans and emits. Throws CompileError subclasses.
CompiledScenario compile_scene(const std::string& name, const SceneDoc& doc, const RoadNetwork& map,
                               const AssetCatalog& catalog, const CompileOptions& options = {});

}  // namespace drivecombo
