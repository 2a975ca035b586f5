#include "drivecombo/road_network.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <set>

#include "yaml_support.hpp"

namespace drivecombo {

double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double norm(Vec2 a) { return std::hypot(a.x, a.y); }

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

// ── Polyline ────────────────────────────────────────────────────────────────

Polyline::Polyline(std::vector<Vec2> points) : points_(std::move(points)) {
  cumulative_.reserve(points_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (i > 0) acc += norm(points_[i] - points_[i - 1]);
    cumulative_.push_back(acc);
  }
}

std::size_t Polyline::segment_at(double s) const {
  if (points_.size() < 2) return 0;
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  std::size_t i = it == cumulative_.begin() ? 0 : static_cast<std::size_t>(it - cumulative_.begin()) - 1;
  if (i >= points_.size() - 1) i = points_.size() - 2;
  // Skip zero-length segments.
  while (i + 2 < points_.size() && cumulative_[i + 1] - cumulative_[i] <= 0.0) ++i;
  return i;
}

Vec2 Polyline::point_at(double s) const {
  if (points_.empty()) return {};
  if (points_.size() == 1) return points_[0];
  s = std::clamp(s, 0.0, length());
  const auto i = segment_at(s);
  const double seg = cumulative_[i + 1] - cumulative_[i];
  const double u = seg > 0.0 ? (s - cumulative_[i]) / seg : 0.0;
  return points_[i] + (points_[i + 1] - points_[i]) * u;
}

Vec2 Polyline::tangent_at(double s) const {
  if (points_.size() < 2) return {1.0, 0.0};
  const auto i = segment_at(std::clamp(s, 0.0, length()));
  const Vec2 d = points_[i + 1] - points_[i];
  const double n = norm(d);
  return n > 0.0 ? d * (1.0 / n) : Vec2{1.0, 0.0};
}

double Polyline::heading_at(double s) const {
  const Vec2 t = tangent_at(s);
  return std::atan2(t.y, t.x);
}

Vec2 Polyline::offset_point(double s, double lateral) const {
  return point_at(s) + left_normal(tangent_at(s)) * lateral;
}

Station Polyline::project(Vec2 p) const {
  if (points_.size() < 2) return {};
  Station best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    const Vec2 a = points_[i];
    const Vec2 d = points_[i + 1] - a;
    const double len2 = dot(d, d);
    if (len2 <= 0.0) continue;
    const double u = std::clamp(dot(p - a, d) / len2, 0.0, 1.0);
    const Vec2 q = a + d * u;
    const double dist = norm(p - q);
    if (dist < best_dist) {
      best_dist = dist;
      const double len = std::sqrt(len2);
      best.s = cumulative_[i] + u * len;
      best.lateral = cross(d * (1.0 / len), p - a);
    }
  }
  return best;
}

namespace {

bool segments_cross(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const double d1 = cross(b - a, c - a), d2 = cross(b - a, d - a);
  const double d3 = cross(d - c, a - c), d4 = cross(d - c, b - c);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 && d4 != 0;
}

}  // namespace

bool Polyline::self_intersects() const {
  for (std::size_t i = 0; i + 1 < points_.size(); ++i)
    for (std::size_t j = i + 2; j + 1 < points_.size(); ++j)
      if (segments_cross(points_[i], points_[i + 1], points_[j], points_[j + 1])) return true;
  return false;
}

// ── Roads ───────────────────────────────────────────────────────────────────

double Road::lane_center_offset(int lane) const { return (0.5 * (lane_count - 1) - lane) * lane_width; }

std::optional<int> Road::lane_at(double lateral) const {
  const double from_left = half_width() - lateral;
  if (from_left < 0.0 || from_left > 2.0 * half_width()) return std::nullopt;
  return std::min(lane_count - 1, static_cast<int>(from_left / lane_width));
}

const Road* RoadNetwork::find_road(std::string_view id) const {
  for (const auto& r : roads)
    if (r.id == id) return &r;
  return nullptr;
}

const Landmark* RoadNetwork::find_landmark(std::string_view name) const {
  for (const auto& l : landmarks)
    if (l.name == name) return &l;
  return nullptr;
}

std::vector<std::string> validate_road_network(const RoadNetwork& map) {
  std::vector<std::string> out;
  std::set<std::string> ids;
  for (const auto& r : map.roads) {
    if (!ids.insert(r.id).second) out.push_back("duplicate road '" + r.id + "'");
    if (r.lane_count < 1) out.push_back("road '" + r.id + "': lane count must be at least 1");
    if (!(r.lane_width > 0.0)) out.push_back("road '" + r.id + "': lane width must be positive");
    if (r.centerline.points().size() < 2 || !(r.centerline.length() > 0.0))
      out.push_back("road '" + r.id + "': centerline needs two distinct points");
    else if (r.centerline.self_intersects())
      out.push_back("road '" + r.id + "': centerline intersects itself");
  }
  for (const auto& i : map.intersections) {
    if (i.roads.size() < 2) out.push_back("intersection '" + i.id + "' must join at least two roads");
    for (const auto& r : i.roads)
      if (!map.find_road(r)) out.push_back("intersection '" + i.id + "' references unknown road '" + r + "'");
  }
  for (const auto& l : map.landmarks) {
    const auto* r = map.find_road(l.road);
    if (!r) {
      out.push_back("landmark '" + l.name + "' references unknown road '" + l.road + "'");
    } else if (l.s < 0.0 || l.s > r->centerline.length()) {
      out.push_back("landmark '" + l.name + "' lies outside road '" + l.road + "'");
    }
  }
  return out;
}

// ── Map files ───────────────────────────────────────────────────────────────

namespace {

Vec2 read_point(const YAML::Node& node, const std::string& what) {
  if (!node.IsSequence() || node.size() != 2) throw ParseError(what + ": expected [x, y]", yaml::line_of(node));
  return {yaml::number(node[0], what), yaml::number(node[1], what)};
}

}  // namespace

RoadNetwork parse_road_network(std::string_view text) {
  const YAML::Node root = yaml::load(text);
  static constexpr std::array kKeys{"name", "road_types", "roads", "intersections", "landmarks"};
  yaml::expect_keys(root, kKeys, "map");
  RoadNetwork map;
  map.name = yaml::scalar(yaml::require(root, "name", "map"), "map.name");
  if (const auto types = root["road_types"]) {
    for (const auto& t : types) map.road_types.push_back(yaml::token<RoadType>(t, "map.road_types"));
  }
  const auto roads = yaml::require(root, "roads", "map");
  if (!roads.IsSequence()) throw ParseError("map.roads: expected a list", yaml::line_of(roads));
  for (const auto& node : roads) {
    static constexpr std::array kRoadKeys{"id", "lanes", "lane_width", "centerline"};
    yaml::expect_keys(node, kRoadKeys, "road");
    Road r;
    r.id = yaml::scalar(yaml::require(node, "id", "road"), "road.id");
    const std::string what = "road '" + r.id + "'";
    r.lane_count = static_cast<int>(yaml::number(yaml::require(node, "lanes", what), what + ".lanes"));
    if (node["lane_width"]) r.lane_width = yaml::number(node["lane_width"], what + ".lane_width");
    std::vector<Vec2> pts;
    for (const auto& p : yaml::require(node, "centerline", what)) pts.push_back(read_point(p, what + ".centerline"));
    r.centerline = Polyline(std::move(pts));
    map.roads.push_back(std::move(r));
  }
  if (const auto list = root["intersections"]) {
    for (const auto& node : list) {
      static constexpr std::array kIKeys{"id", "center", "radius", "roads"};
      yaml::expect_keys(node, kIKeys, "intersection");
      Intersection i;
      i.id = yaml::scalar(yaml::require(node, "id", "intersection"), "intersection.id");
      i.center = read_point(yaml::require(node, "center", i.id), i.id + ".center");
      if (node["radius"]) i.radius = yaml::number(node["radius"], i.id + ".radius");
      for (const auto& r : yaml::require(node, "roads", i.id)) i.roads.push_back(yaml::scalar(r, i.id + ".roads"));
      map.intersections.push_back(std::move(i));
    }
  }
  if (const auto list = root["landmarks"]) {
    for (const auto& node : list) {
      static constexpr std::array kLKeys{"name", "road", "s"};
      yaml::expect_keys(node, kLKeys, "landmark");
      Landmark l;
      l.name = yaml::scalar(yaml::require(node, "name", "landmark"), "landmark.name");
      l.road = yaml::scalar(yaml::require(node, "road", l.name), l.name + ".road");
      l.s = yaml::number(yaml::require(node, "s", l.name), l.name + ".s");
      map.landmarks.push_back(std::move(l));
    }
  }
  if (const auto problems = validate_road_network(map); !problems.empty())
    throw ValidationError("map '" + map.name + "': " + problems.front());
  return map;
}

MapLibrary MapLibrary::load_dir(const std::string& dir) {
  MapLibrary lib;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".yaml" || ext == ".yml")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    try {
      lib.add(parse_road_network(read_file(f.string())));
    } catch (const ParseError& e) {
      throw ParseError(f.filename().string() + ": " + e.what());
    }
  }
  return lib;
}

void MapLibrary::add(RoadNetwork map) {
  const auto name = map.name;
  if (!maps_.emplace(name, std::move(map)).second) throw ValidationError("duplicate map '" + name + "'");
}

const RoadNetwork& MapLibrary::get(const std::string& name) const {
  const auto it = maps_.find(name);
  if (it == maps_.end()) throw ConfigError("no map named '" + name + "'");
  return it->second;
}

const RoadNetwork& MapLibrary::for_road_type(RoadType type) const {
  for (const auto& [_, m] : maps_)
    if (std::find(m.road_types.begin(), m.road_types.end(), type) != m.road_types.end()) return m;
  throw ConfigError("no map for road type '" + std::string(to_token(type)) + "'");
}

std::vector<std::string> MapLibrary::names() const {
  std::vector<std::string> out;
  for (const auto& [n, _] : maps_) out.push_back(n);
  return out;
}

}  // namespace drivecombo
