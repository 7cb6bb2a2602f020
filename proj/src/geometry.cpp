#include "tlr/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tlr {

double Vec2::norm() const { return std::hypot(x, y); }

double segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  Vec2 ab = b - a;
  double len2 = ab.norm2();
  if (len2 <= 0.0) return (p - a).norm();
  double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  Vec2 closest = a + ab * t;
  return (p - closest).norm();
}

namespace {
int orientation(Vec2 a, Vec2 b, Vec2 c) {
  double v = (b - a).cross(c - a);
  if (v > 0) return 1;
  if (v < 0) return -1;
  return 0;
}

bool on_segment(Vec2 a, Vec2 b, Vec2 p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}
} // namespace

bool segments_intersect(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  int o1 = orientation(a, b, c);
  int o2 = orientation(a, b, d);
  int o3 = orientation(c, d, a);
  int o4 = orientation(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

bool Polygon::contains(Vec2 p) const {
  std::size_t n = vertices.size();
  if (n < 3) return false;
  // Ray cast to +x; boundary points count as inside.
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    Vec2 vi = vertices[i], vj = vertices[j];
    if (segment_distance(p, vj, vi) < 1e-12) return true;
    bool crosses = (vi.y > p.y) != (vj.y > p.y);
    if (crosses) {
      double x_at = vj.x + (p.y - vj.y) / (vi.y - vj.y) * (vi.x - vj.x);
      if (p.x < x_at) inside = !inside;
    }
  }
  return inside;
}

double Polygon::boundary_distance(Vec2 p) const {
  double best = std::numeric_limits<double>::infinity();
  std::size_t n = vertices.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    best = std::min(best, segment_distance(p, vertices[j], vertices[i]));
  }
  return best;
}

double Polygon::signed_distance(Vec2 p) const {
  double d = boundary_distance(p);
  return contains(p) ? d : -d;
}

bool Polygon::is_simple() const {
  std::size_t n = vertices.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    Vec2 a = vertices[i], b = vertices[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      // Skip edges sharing a vertex.
      if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
      Vec2 c = vertices[j], d = vertices[(j + 1) % n];
      if (segments_intersect(a, b, c, d)) return false;
    }
  }
  return true;
}

double Polyline::length() const {
  double total = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) total += (points[i] - points[i - 1]).norm();
  return total;
}

double Polyline::distance(Vec2 p) const {
  if (points.empty()) return std::numeric_limits<double>::infinity();
  if (points.size() == 1) return (p - points[0]).norm();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < points.size(); ++i) {
    best = std::min(best, segment_distance(p, points[i - 1], points[i]));
  }
  return best;
}

double Polyline::project_arclength(Vec2 p) const {
  double best = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  double s = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    Vec2 a = points[i - 1], b = points[i];
    Vec2 ab = b - a;
    double len = ab.norm();
    double t = len > 0 ? std::clamp((p - a).dot(ab) / (len * len), 0.0, 1.0) : 0.0;
    double d = (p - (a + ab * t)).norm();
    if (d < best) {
      best = d;
      best_s = s + t * len;
    }
    s += len;
  }
  return best_s;
}

std::size_t Polyline::nearest_vertex(Vec2 p) const {
  std::size_t best_i = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points.size(); ++i) {
    double d = (p - points[i]).norm2();
    if (d < best) {
      best = d;
      best_i = i;
    }
  }
  return best_i;
}

double wrap_angle(double a) {
  const double two_pi = 2.0 * M_PI;
  a = std::fmod(a, two_pi);
  if (a <= -M_PI) a += two_pi;
  if (a > M_PI) a -= two_pi;
  return a;
}

double time_to_radius(Vec2 rel_pos, Vec2 rel_vel, double radius) {
  const double inf = std::numeric_limits<double>::infinity();
  if (rel_pos.norm() <= radius) return 0.0;
  // |r + t v|^2 = radius^2  ->  v.v t^2 + 2 r.v t + r.r - radius^2 = 0
  double a = rel_vel.norm2();
  double b = 2.0 * rel_pos.dot(rel_vel);
  double c = rel_pos.norm2() - radius * radius;
  if (a < 1e-12) return inf; // no relative motion
  double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return inf;
  double sq = std::sqrt(disc);
  double t0 = (-b - sq) / (2.0 * a);
  double t1 = (-b + sq) / (2.0 * a);
  if (t0 >= 0.0) return t0;
  if (t1 >= 0.0) return 0.0; // currently separating but root straddles zero
  return inf;
}

} // namespace tlr
