#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "drivecombo/scene_dsl.hpp"

namespace drivecombo {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double k) const { return {x * k, y * k}; }
  bool operator==(const Vec2&) const = default;
};

double dot(Vec2 a, Vec2 b);
double cross(Vec2 a, Vec2 b);
double norm(Vec2 a);
// Counter-clockwise quarter turn: the left normal of a unit tangent.
inline Vec2 left_normal(Vec2 t) { return {-t.y, t.x}; }
// Wraps to (-pi, pi].
double wrap_angle(double a);

// Point along a polyline, with the signed lateral offset (positive to the left
// of the direction of travel).
struct Station {
  double s = 0.0;
  double lateral = 0.0;
};

class Polyline {
 public:
  Polyline() = default;
  explicit Polyline(std::vector<Vec2> points);

  const std::vector<Vec2>& points() const { return points_; }
  double length() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
  // Clamped to [0, length].
  Vec2 point_at(double s) const;
  // Unit tangent of the segment containing s.
  Vec2 tangent_at(double s) const;
  double heading_at(double s) const;
  Vec2 offset_point(double s, double lateral) const;
  // Closest point; s is clamped to the polyline.
  Station project(Vec2 p) const;
  bool self_intersects() const;

 private:
  std::size_t segment_at(double s) const;

  std::vector<Vec2> points_;
  std::vector<double> cumulative_;
};

// One-way road. Lanes are numbered from 0 (leftmost) and share the
// centerline's direction; lane i's center is offset ((n-1)/2 - i) * width
// to the left of the centerline.
struct Road {
  std::string id;
  int lane_count = 1;
  double lane_width = 3.5;
  Polyline centerline;

  double lane_center_offset(int lane) const;
  double half_width() const { return 0.5 * lane_count * lane_width; }
  // Lane containing the lateral offset, or nullopt outside the paved area.
  std::optional<int> lane_at(double lateral) const;
};

struct Intersection {
  std::string id;
  Vec2 center;
  std::vector<std::string> roads;  // roads passing through the junction
  double radius = 10.0;            // turns start and end this far from the center
};

struct Landmark {
  std::string name;
  std::string road;
  double s = 0.0;
};

struct RoadNetwork {
  std::string name;
  // Road types this map stands in for.
  std::vector<RoadType> road_types;
  std::vector<Road> roads;
  std::vector<Intersection> intersections;
  std::vector<Landmark> landmarks;

  const Road* find_road(std::string_view id) const;
  const Landmark* find_landmark(std::string_view name) const;
};

// Map file (YAML):
//   name: four_way
//   road_types: [intersection]
//   roads:
//     - {id: north, lanes: 2, lane_width: 3.5, centerline: [[3.5, -150], [3.5, 150]]}
//   intersections:
//     - {id: center, center: [0, 0], radius: 10, roads: [north, east]}
//   landmarks:
//     - {name: intersection, road: north, s: 150}
// Throws ParseError, or ValidationError for the invariants below.
RoadNetwork parse_road_network(std::string_view text);

// Lane count >= 1, positive lane width, centerlines with >= 2 points and no
// self-intersection, intersections and landmarks referencing existing roads.
std::vector<std::string> validate_road_network(const RoadNetwork& map);

// All maps under a directory, keyed by name.
class MapLibrary {
 public:
  static MapLibrary load_dir(const std::string& dir);
  void add(RoadNetwork map);

  const RoadNetwork& get(const std::string& name) const;
  // First map (by name) declaring the road type.
  const RoadNetwork& for_road_type(RoadType type) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, RoadNetwork> maps_;
};

}  // namespace drivecombo
