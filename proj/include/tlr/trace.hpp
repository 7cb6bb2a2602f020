#pragma once

#include "tlr/geometry.hpp"

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tlr {

/// One sample of an ego motion plan: position, speed, heading.
struct EgoPlanPoint {
  double x = 0.0;       // meters
  double y = 0.0;       // meters
  double v = 0.0;       // meters/second, >= 0
  double heading = 0.0; // radians, in (-pi, pi]

  Vec2 pos() const { return {x, y}; }
  bool operator==(const EgoPlanPoint&) const = default;
};

/// Another agent's track over the same sample grid as the ego plan.
struct AgentTrack {
  std::string id;
  double length = 4.5; // meters
  double width = 2.0;  // meters
  std::vector<EgoPlanPoint> points;

  double radius() const { return 0.5 * std::max(length, width); }
};

enum class LightState { Red, Yellow, Green };

struct TrafficLight {
  Vec2 position;
  LightState state = LightState::Green;
};

struct Lane {
  Polyline centerline;
  double speed_limit = 13.9;      // m/s
  std::vector<double> curvature;  // 1/m, one sample per centerline vertex
};

/// Polygon/polyline stand-in for a map query interface: drivable area,
/// lanes with speed limits and curvature, stop points, signals.
struct MapContext {
  std::vector<Polygon> drivable_polygons;
  std::vector<Lane> lanes;
  std::vector<Vec2> stop_points;
  std::vector<TrafficLight> traffic_lights;

  /// Positive inside the drivable area (distance to its boundary), negative outside.
  double drivable_signed_distance(Vec2 p) const;
  /// Index of the lane whose centerline is nearest to p, or nullopt if no lanes.
  std::optional<std::size_t> nearest_lane(Vec2 p) const;
  double curvature_at(std::size_t lane, Vec2 p) const;
};

/// One time point of a trace: the environment plus the ego plan over the
/// lookahead window starting here.
struct Frame {
  int t_index = 0;
  std::vector<EgoPlanPoint> ego_plan;
  std::vector<AgentTrack> agents;
  std::shared_ptr<const MapContext> map;
};

struct Trace {
  std::vector<Frame> frames;
  double rate_hz = 20.0;
  double horizon_s = 4.0;

  int horizon_steps() const { return static_cast<int>(rate_hz * horizon_s + 0.5); }
  double dt() const { return 1.0 / rate_hz; }
};

struct Dataset {
  std::vector<Trace> traces;
  double train_fraction = 0.9;

  std::size_t train_count() const;
  /// Contiguous split: the first train_count() traces train, the rest validate.
  std::vector<std::size_t> train_indices() const;
  std::vector<std::size_t> val_indices() const;
};

struct Violation {
  int frame = -1; // -1 for trace-level problems
  std::string field;
  std::string message;
};

std::string to_string(const Violation& v);

/// Empty iff all structural invariants hold.
std::vector<Violation> validate_trace(const Trace& trace);

/// Line-delimited trace records. Throws ParseError (with line number) on
/// malformed records or traces that fail validation.
Dataset parse_trace_file(std::istream& in);
Dataset load_dataset(const std::string& path);

std::string serialize_trace(const Trace& trace);
void serialize_dataset(const Dataset& ds, std::ostream& out);
void save_dataset(const Dataset& ds, const std::string& path);

/// Keeps every (rate_hz/target_hz)-th frame and plan sample; horizon_s unchanged.
Trace resample(const Trace& trace, double target_hz);

struct Kinematics {
  std::vector<double> a_long; // heading-frame forward(+)/backward(-) accel, m/s^2
  std::vector<double> a_lat;  // heading-frame left(+)/right(-) accel, m/s^2
  std::vector<double> jerk;   // d(a_long)/dt, m/s^3
};

/// Central differences in the interior, one-sided at the ends.
/// Requires plan.size() >= 3 and dt > 0.
Kinematics derive_kinematics(const std::vector<EgoPlanPoint>& plan, double dt);

} // namespace tlr
