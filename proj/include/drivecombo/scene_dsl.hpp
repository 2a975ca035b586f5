#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "drivecombo/common.hpp"
#include "drivecombo/rule_crafter.hpp"
#include "drivecombo/rule_model.hpp"

namespace drivecombo {

enum class Weather { Sunny, Cloudy, Rain, HeavyRain, Fog, Snow, ClearNight, RainyNight };
enum class TimeOfDay { Daytime, Night, Dusk, Dawn };
enum class RoadType { Intersection, Highway, NarrowBridge, Ramp, UrbanRoad, RuralRoad };
enum class RoadMarker { SolidLine, DashedLine, DoubleSolidLine, YellowSolidLine, ZebraCrossing, HatchedArea, None };
enum class TrafficSign {
  TrafficLight,
  StopSign,
  YieldSign,
  SpeedLimitSign,
  NoOvertakingSign,
  NoEntrySign,
  NoMergingSign,
  NoUTurnSign,
  PedestrianCrossingSign,
  SchoolZoneSign,
  ConstructionSign,
};
enum class ActorType {
  Car,
  Truck,
  Bus,
  Van,
  Motorcycle,
  Bicycle,
  Pedestrian,
  Ambulance,
  FireTruck,
  PoliceCar,
  SchoolBus,
  TrafficCone,
  Barrier,
};
enum class Relation { Front, Behind, Left, Right, At };
enum class Behavior {
  GoForward,
  TurnLeft,
  TurnRight,
  LaneChangeLeft,
  LaneChangeRight,
  Follow,
  Stop,
  Yield,
  WalkCross,
  Park,
};
enum class Longitudinal { GoForward, SlowDown, SpeedUp, Stop, Yield, Reverse };
enum class Lateral { KeepLane, LaneChangeLeft, LaneChangeRight, TurnLeft, TurnRight, PullOver, UTurn };

template <>
struct EnumTraits<Weather> {
  using W = Weather;
  static constexpr std::array entries{
      EnumEntry<W>{W::Sunny, "sunny"},          EnumEntry<W>{W::Cloudy, "cloudy"},
      EnumEntry<W>{W::Rain, "rain"},            EnumEntry<W>{W::HeavyRain, "heavy_rain"},
      EnumEntry<W>{W::Fog, "fog"},              EnumEntry<W>{W::Snow, "snow"},
      EnumEntry<W>{W::ClearNight, "clear_night"}, EnumEntry<W>{W::RainyNight, "rainy_night"},
  };
};

template <>
struct EnumTraits<TimeOfDay> {
  using T = TimeOfDay;
  static constexpr std::array entries{
      EnumEntry<T>{T::Daytime, "daytime"},
      EnumEntry<T>{T::Night, "night"},
      EnumEntry<T>{T::Dusk, "dusk"},
      EnumEntry<T>{T::Dawn, "dawn"},
  };
};

template <>
struct EnumTraits<RoadType> {
  using R = RoadType;
  static constexpr std::array entries{
      EnumEntry<R>{R::Intersection, "intersection"}, EnumEntry<R>{R::Highway, "highway"},
      EnumEntry<R>{R::NarrowBridge, "narrow_bridge"}, EnumEntry<R>{R::Ramp, "ramp"},
      EnumEntry<R>{R::UrbanRoad, "urban_road"},       EnumEntry<R>{R::RuralRoad, "rural_road"},
  };
};

template <>
struct EnumTraits<RoadMarker> {
  using M = RoadMarker;
  static constexpr std::array entries{
      EnumEntry<M>{M::SolidLine, "solid_line"},
      EnumEntry<M>{M::DashedLine, "dashed_line"},
      EnumEntry<M>{M::DoubleSolidLine, "double_solid_line"},
      EnumEntry<M>{M::YellowSolidLine, "yellow_solid_line"},
      EnumEntry<M>{M::ZebraCrossing, "zebra_crossing"},
      EnumEntry<M>{M::HatchedArea, "hatched_area"},
      EnumEntry<M>{M::None, "none"},
  };
};

template <>
struct EnumTraits<TrafficSign> {
  using S = TrafficSign;
  static constexpr std::array entries{
      EnumEntry<S>{S::TrafficLight, "traffic_light"},
      EnumEntry<S>{S::StopSign, "stop_sign"},
      EnumEntry<S>{S::YieldSign, "yield_sign"},
      EnumEntry<S>{S::SpeedLimitSign, "speed_limit_sign"},
      EnumEntry<S>{S::NoOvertakingSign, "no_overtaking_sign"},
      EnumEntry<S>{S::NoEntrySign, "no_entry_sign"},
      EnumEntry<S>{S::NoMergingSign, "no_merging_sign"},
      EnumEntry<S>{S::NoUTurnSign, "no_u_turn_sign"},
      EnumEntry<S>{S::PedestrianCrossingSign, "pedestrian_crossing_sign"},
      EnumEntry<S>{S::SchoolZoneSign, "school_zone_sign"},
      EnumEntry<S>{S::ConstructionSign, "construction_sign"},
  };
};

template <>
struct EnumTraits<ActorType> {
  using A = ActorType;
  static constexpr std::array entries{
      EnumEntry<A>{A::Car, "car"},
      EnumEntry<A>{A::Truck, "truck"},
      EnumEntry<A>{A::Bus, "bus"},
      EnumEntry<A>{A::Van, "van"},
      EnumEntry<A>{A::Motorcycle, "motorcycle"},
      EnumEntry<A>{A::Bicycle, "bicycle"},
      EnumEntry<A>{A::Pedestrian, "pedestrian"},
      EnumEntry<A>{A::Ambulance, "ambulance"},
      EnumEntry<A>{A::FireTruck, "fire_truck"},
      EnumEntry<A>{A::PoliceCar, "police_car"},
      EnumEntry<A>{A::SchoolBus, "school_bus"},
      EnumEntry<A>{A::TrafficCone, "traffic_cone"},
      EnumEntry<A>{A::Barrier, "barrier"},
  };
};

template <>
struct EnumTraits<Relation> {
  static constexpr std::array entries{
      EnumEntry<Relation>{Relation::Front, "front"}, EnumEntry<Relation>{Relation::Behind, "behind"},
      EnumEntry<Relation>{Relation::Left, "left"},   EnumEntry<Relation>{Relation::Right, "right"},
      EnumEntry<Relation>{Relation::At, "at"},
  };
};

template <>
struct EnumTraits<Behavior> {
  using B = Behavior;
  static constexpr std::array entries{
      EnumEntry<B>{B::GoForward, "go_forward"},
      EnumEntry<B>{B::TurnLeft, "turn_left"},
      EnumEntry<B>{B::TurnRight, "turn_right"},
      EnumEntry<B>{B::LaneChangeLeft, "lane_change_left"},
      EnumEntry<B>{B::LaneChangeRight, "lane_change_right"},
      EnumEntry<B>{B::Follow, "follow"},
      EnumEntry<B>{B::Stop, "stop"},
      EnumEntry<B>{B::Yield, "yield"},
      EnumEntry<B>{B::WalkCross, "walk_cross"},
      EnumEntry<B>{B::Park, "park"},
  };
};

template <>
struct EnumTraits<Longitudinal> {
  using L = Longitudinal;
  static constexpr std::array entries{
      EnumEntry<L>{L::GoForward, "go_forward"}, EnumEntry<L>{L::SlowDown, "slow_down"},
      EnumEntry<L>{L::SpeedUp, "speed_up"},     EnumEntry<L>{L::Stop, "stop"},
      EnumEntry<L>{L::Yield, "yield"},          EnumEntry<L>{L::Reverse, "reverse"},
  };
};

template <>
struct EnumTraits<Lateral> {
  using L = Lateral;
  static constexpr std::array entries{
      EnumEntry<L>{L::KeepLane, "keep_lane"},
      EnumEntry<L>{L::LaneChangeLeft, "lane_change_left"},
      EnumEntry<L>{L::LaneChangeRight, "lane_change_right"},
      EnumEntry<L>{L::TurnLeft, "turn_left"},
      EnumEntry<L>{L::TurnRight, "turn_right"},
      EnumEntry<L>{L::PullOver, "pull_over"},
      EnumEntry<L>{L::UTurn, "u_turn"},
  };
};

struct Environment {
  Weather weather = Weather::Sunny;
  TimeOfDay time = TimeOfDay::Daytime;
  bool operator==(const Environment&) const = default;
};

struct RoadNetworkDesc {
  RoadType road_type = RoadType::UrbanRoad;
  RoadMarker road_marker = RoadMarker::None;
  std::vector<TrafficSign> traffic_signs;
  bool operator==(const RoadNetworkDesc&) const = default;
};

struct ActorPosition {
  // Another actor id or a landmark (the road type token or a traffic sign token).
  std::string reference;
  Relation relation = Relation::Front;
  std::optional<double> distance;  // metres
  bool operator==(const ActorPosition&) const = default;
};

struct Actor {
  std::string id;
  ActorType type = ActorType::Car;
  ActorPosition position;
  Behavior behavior = Behavior::GoForward;
  std::optional<double> speed;  // km/h
  bool operator==(const Actor&) const = default;
};

struct SceneOracle {
  Longitudinal longitudinal = Longitudinal::GoForward;
  Lateral lateral = Lateral::KeepLane;
  bool operator==(const SceneOracle&) const = default;
};

struct SceneDoc {
  Environment environment;
  RoadNetworkDesc road_network;
  std::vector<Actor> actors;  // declaration order
  SceneOracle oracle;

  const Actor* find_actor(std::string_view id) const;
  bool operator==(const SceneDoc&) const = default;
};

// Names an actor may be positioned against besides other actors.
std::set<std::string> landmarks(const SceneDoc& doc);

// Throws ParseError (syntax, unknown keys or tokens; line reported) or
// ValidationError (missing/duplicate ego, duplicate ids, dangling or cyclic
// references, bad distances or speeds).
SceneDoc parse_scene_doc(std::string_view text);

// Structural invariants of a doc built in code; empty when valid.
std::vector<std::string> validate_scene_doc(const SceneDoc& doc);

// Canonical text: 2-space indent, blocks environment, road_network, actors, oracle.
std::string serialize_scene_doc(const SceneDoc& doc);

// ── SelfCheck ───────────────────────────────────────────────────────────────

struct Finding {
  std::string kind;  // "relation_contradiction", "behavior_speed", "weather_time", ...
  std::string message;
  bool operator==(const Finding&) const = default;
};

// Combinations flagged as incoherent. Loadable from YAML:
//   weather_time: [[sunny, night], ...]
//   weather_sign: [[snow, school_zone_sign], ...]
struct SelfCheckTable {
  std::vector<std::pair<Weather, TimeOfDay>> weather_time;
  std::vector<std::pair<Weather, TrafficSign>> weather_sign;

  static SelfCheckTable defaults();
  static SelfCheckTable parse(std::string_view text);
};

// Empty list means coherent. Pure.
std::vector<Finding> self_check(const SceneDoc& doc, const SelfCheckTable& table = SelfCheckTable::defaults());

// ── Align ───────────────────────────────────────────────────────────────────

// What a scene must contain for a context tag. Within one field any listed
// value satisfies; all listed fields must be satisfied.
struct SceneRequirement {
  std::string tag;
  std::vector<Weather> weather;
  std::vector<TimeOfDay> time;
  std::vector<RoadType> road_type;
  std::vector<RoadMarker> road_marker;
  std::vector<TrafficSign> traffic_sign;
  std::vector<ActorType> actor_type;
  std::vector<Behavior> actor_behavior;
};

class RequirementTable {
 public:
  RequirementTable() = default;
  explicit RequirementTable(std::vector<SceneRequirement> rows);
  // YAML list of {tag, requires: {weather: [...], actor_type: [...], ...}}.
  static RequirementTable parse(std::string_view text);

  const SceneRequirement* find(const std::string& tag) const;
  std::size_t size() const { return rows_.size(); }

 private:
  std::vector<SceneRequirement> rows_;
};

bool satisfies(const SceneDoc& doc, const SceneRequirement& req);

struct RuleAlignment {
  RuleId rule;
  bool matched = true;
  std::vector<std::string> unmet_tags;
  // Tags with no table row; they do not affect the verdict.
  std::vector<std::string> uncovered_tags;
};

struct AlignReport {
  std::vector<RuleAlignment> rules;
  std::vector<RuleId> unmatched() const;
  bool all_matched() const { return unmatched().empty(); }
};

AlignReport align_check(const SceneDoc& doc, const std::vector<const AtomicRule*>& rules,
                        const RequirementTable& table);
// Checks every member of a combo.
AlignReport align_check(const SceneDoc& doc, const RuleCombo& combo, const RuleIndex& index,
                        const RequirementTable& table);

}  // namespace drivecombo
