#pragma once

#include <cstddef>
#include <vector>

namespace tlr {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double cross(Vec2 o) const { return x * o.y - y * o.x; }
  double norm() const;
  double norm2() const { return x * x + y * y; }
};

/// Simple (non-self-intersecting) polygon, vertices in order, implicitly closed.
struct Polygon {
  std::vector<Vec2> vertices;

  bool contains(Vec2 p) const;
  /// Distance from p to the polygon boundary (always >= 0).
  double boundary_distance(Vec2 p) const;
  /// Positive inside, negative outside; magnitude = distance to boundary.
  double signed_distance(Vec2 p) const;
  /// True if consecutive edges do not intersect each other (simple polygon).
  bool is_simple() const;
};

struct Polyline {
  std::vector<Vec2> points;

  double length() const;
  /// Distance from p to the nearest point on the polyline.
  double distance(Vec2 p) const;
  /// Arc-length position of the projection of p onto the polyline.
  double project_arclength(Vec2 p) const;
  /// Index of the vertex nearest to p (for per-vertex attribute lookup).
  std::size_t nearest_vertex(Vec2 p) const;
};

double segment_distance(Vec2 p, Vec2 a, Vec2 b);
bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d);

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

/// Earliest time t >= 0 at which |rel_pos + t*rel_vel| <= radius under
/// constant-velocity extrapolation; +inf if the gap never closes.
double time_to_radius(Vec2 rel_pos, Vec2 rel_vel, double radius);

} // namespace tlr
