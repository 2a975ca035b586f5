#pragma once

#include <compare>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "drivecombo/common.hpp"

namespace drivecombo {

enum class PerceptualType { Static, Dynamic };
enum class NormType { Permissive, Obligatory, Forbidden };

enum class ActionCategory { DrivingManeuvers, LightingSignaling, ParkingYielding };

// The closed action space. SpeedLimit is the numeric-rule extension; all
// other members are the 23 maneuver/lighting/parking actions.
enum class ActionType {
  Overtake,
  LeftTurn,
  RightTurn,
  UTurn,
  LaneChange,
  MergeMainRoad,
  EnterRamp,
  Acceleration,
  Deceleration,
  Reverse,
  EmergencyLaneUsage,
  LeftTurnSignal,
  RightTurnSignal,
  LowBeam,
  HighBeam,
  FlashingHeadlights,
  DoubleFlashers,
  FogLights,
  PositionLights,
  HonkHorn,
  TemporaryParking,
  PullOver,
  Yield,
  SpeedLimit,
};

// Arbitration classes, highest priority first.
enum class PriorityClass {
  PedestrianSafety,
  EmergencyVehicleAvoidance,
  OnSiteCommand,
  TrafficLights,
  TrafficSigns,
  RoadMarkings,
  InteractiveRightOfWay,
  DefensiveDriving,
  EmergencyExceptions,
};

enum class Jurisdiction { USA, China, UK, Japan, Australia };

template <>
struct EnumTraits<PerceptualType> {
  static constexpr std::array entries{
      EnumEntry<PerceptualType>{PerceptualType::Static, "static"},
      EnumEntry<PerceptualType>{PerceptualType::Dynamic, "dynamic"},
  };
};

template <>
struct EnumTraits<NormType> {
  static constexpr std::array entries{
      EnumEntry<NormType>{NormType::Permissive, "permissive"},
      EnumEntry<NormType>{NormType::Obligatory, "obligatory"},
      EnumEntry<NormType>{NormType::Forbidden, "forbidden"},
  };
};

template <>
struct EnumTraits<ActionCategory> {
  static constexpr std::array entries{
      EnumEntry<ActionCategory>{ActionCategory::DrivingManeuvers, "driving_maneuvers"},
      EnumEntry<ActionCategory>{ActionCategory::LightingSignaling, "lighting_signaling"},
      EnumEntry<ActionCategory>{ActionCategory::ParkingYielding, "parking_yielding"},
  };
};

template <>
struct EnumTraits<ActionType> {
  using A = ActionType;
  static constexpr std::array entries{
      EnumEntry<A>{A::Overtake, "overtake"},
      EnumEntry<A>{A::LeftTurn, "left_turn"},
      EnumEntry<A>{A::RightTurn, "right_turn"},
      EnumEntry<A>{A::UTurn, "u_turn"},
      EnumEntry<A>{A::LaneChange, "lane_change"},
      EnumEntry<A>{A::MergeMainRoad, "merge_main_road"},
      EnumEntry<A>{A::EnterRamp, "enter_ramp"},
      EnumEntry<A>{A::Acceleration, "acceleration"},
      EnumEntry<A>{A::Deceleration, "deceleration"},
      EnumEntry<A>{A::Reverse, "reverse"},
      EnumEntry<A>{A::EmergencyLaneUsage, "emergency_lane_usage"},
      EnumEntry<A>{A::LeftTurnSignal, "left_turn_signal"},
      EnumEntry<A>{A::RightTurnSignal, "right_turn_signal"},
      EnumEntry<A>{A::LowBeam, "low_beam"},
      EnumEntry<A>{A::HighBeam, "high_beam"},
      EnumEntry<A>{A::FlashingHeadlights, "flashing_headlights"},
      EnumEntry<A>{A::DoubleFlashers, "double_flashers"},
      EnumEntry<A>{A::FogLights, "fog_lights"},
      EnumEntry<A>{A::PositionLights, "position_lights"},
      EnumEntry<A>{A::HonkHorn, "honk_horn"},
      EnumEntry<A>{A::TemporaryParking, "temporary_parking"},
      EnumEntry<A>{A::PullOver, "pull_over"},
      EnumEntry<A>{A::Yield, "yield"},
      EnumEntry<A>{A::SpeedLimit, "speed_limit"},
  };
};

template <>
struct EnumTraits<PriorityClass> {
  using P = PriorityClass;
  static constexpr std::array entries{
      EnumEntry<P>{P::PedestrianSafety, "pedestrian_safety"},
      EnumEntry<P>{P::EmergencyVehicleAvoidance, "emergency_vehicle_avoidance"},
      EnumEntry<P>{P::OnSiteCommand, "on_site_command"},
      EnumEntry<P>{P::TrafficLights, "traffic_lights"},
      EnumEntry<P>{P::TrafficSigns, "traffic_signs"},
      EnumEntry<P>{P::RoadMarkings, "road_markings"},
      EnumEntry<P>{P::InteractiveRightOfWay, "interactive_right_of_way"},
      EnumEntry<P>{P::DefensiveDriving, "defensive_driving"},
      EnumEntry<P>{P::EmergencyExceptions, "emergency_exceptions"},
  };
};

template <>
struct EnumTraits<Jurisdiction> {
  static constexpr std::array entries{
      EnumEntry<Jurisdiction>{Jurisdiction::USA, "usa"},
      EnumEntry<Jurisdiction>{Jurisdiction::China, "china"},
      EnumEntry<Jurisdiction>{Jurisdiction::UK, "uk"},
      EnumEntry<Jurisdiction>{Jurisdiction::Japan, "japan"},
      EnumEntry<Jurisdiction>{Jurisdiction::Australia, "australia"},
  };
};

ActionCategory category_of(ActionType action);

// 1 for PedestrianSafety ... 9 for EmergencyExceptions.
int priority_rank(PriorityClass cls);

// True when `a` strictly outranks `b`.
inline bool outranks(PriorityClass a, PriorityClass b) { return priority_rank(a) < priority_rank(b); }

// "USA", "China", ... as used in prompts and reports.
std::string_view display_name(Jurisdiction j);

struct RuleId {
  std::string value;

  auto operator<=>(const RuleId&) const = default;
};

// Closed interval of admissible speeds in km/h.
struct SpeedRange {
  double lower = 0.0;
  double upper = 0.0;

  bool operator==(const SpeedRange&) const = default;
};

// Intersection of all ranges; nullopt when empty. Closed-interval semantics:
// [0,30] and [30,50] intersect at 30.
std::optional<SpeedRange> intersect(const std::vector<SpeedRange>& ranges);

struct AtomicRule {
  RuleId id;
  std::string content;
  PerceptualType perceptual_type = PerceptualType::Static;
  NormType norm_type = NormType::Obligatory;
  ActionType action_type = ActionType::Overtake;
  std::optional<SpeedRange> speed_range;
  PriorityClass priority_class = PriorityClass::TrafficSigns;
  Jurisdiction jurisdiction = Jurisdiction::China;
  // Namespaced situational tags such as "road:highway" or "weather:fog".
  std::set<std::string> context_tags;

  bool operator==(const AtomicRule&) const = default;
};

// A rule record as read from text, before enum resolution. Keeping tokens as
// strings lets validation report unknown tokens as data.
struct RuleRecord {
  std::string id;
  std::string content;
  std::string perceptual_type;
  std::string norm_type;
  std::string action_type;
  std::optional<double> lower;
  std::optional<double> upper;
  bool has_numeric_constraints = false;
  std::string priority_class;
  std::vector<std::string> context_tags;
};

struct Violation {
  std::string field;
  std::string invariant;

  bool operator==(const Violation&) const = default;
};

struct RuleFileOptions {
  // Upper bound substituted for open-ended speed phrases ("min 110 km/h").
  double max_speed_kmh = 200.0;
};

// Empty iff the record satisfies every AtomicRule invariant.
std::vector<Violation> validate_rule(const RuleRecord& record, const RuleFileOptions& options = {});
std::vector<Violation> validate_rule(const AtomicRule& rule);

RuleRecord to_record(const AtomicRule& rule);

// Throws ParseError (syntax, reports line) or ValidationError (reports the
// record index and first violation).
std::vector<AtomicRule> parse_rule_file(std::string_view text, Jurisdiction jurisdiction,
                                        const RuleFileOptions& options = {});

// Canonical YAML serialization accepted by parse_rule_file.
std::string serialize_rule_file(const std::vector<AtomicRule>& rules);

// Shared YAML scalar quoting used by the canonical writers.
std::string yaml_quote(std::string_view s);
std::string format_number(double v);

}  // namespace drivecombo
