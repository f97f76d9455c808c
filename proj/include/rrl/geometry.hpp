#pragma once
#include <algorithm>
#include <array>
#include <cmath>

namespace rrl {

using Vec2 = std::array<double, 2>;

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a[0] + b[0], a[1] + b[1]}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a[0] - b[0], a[1] - b[1]}; }
inline Vec2 operator*(double k, Vec2 v) { return {k * v[0], k * v[1]}; }
inline double dot(Vec2 a, Vec2 b) { return a[0] * b[0] + a[1] * b[1]; }
inline double norm(Vec2 v) { return std::sqrt(dot(v, v)); }

struct Rect {
  Vec2 lo{0.0, 0.0}, hi{0.0, 0.0};

  bool contains(Vec2 p) const {
    return p[0] >= lo[0] && p[0] <= hi[0] && p[1] >= lo[1] && p[1] <= hi[1];
  }
  Vec2 closest_point(Vec2 p) const {
    return {std::clamp(p[0], lo[0], hi[0]), std::clamp(p[1], lo[1], hi[1])};
  }
  bool valid() const { return lo[0] <= hi[0] && lo[1] <= hi[1]; }
};

// Liang-Barsky clip of the segment p0 -> p1 against the rectangle.
// Boundary touches count as intersection.
inline bool segment_intersects_rect(Vec2 p0, Vec2 p1, const Rect& r) {
  double t0 = 0.0, t1 = 1.0;
  const Vec2 d = p1 - p0;
  const double p[4] = {-d[0], d[0], -d[1], d[1]};
  const double q[4] = {p0[0] - r.lo[0], r.hi[0] - p0[0], p0[1] - r.lo[1], r.hi[1] - p0[1]};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;  // parallel and fully outside this slab
      continue;
    }
    const double t = q[i] / p[i];
    if (p[i] < 0.0)
      t0 = std::max(t0, t);
    else
      t1 = std::min(t1, t);
  }
  return t0 <= t1;
}

}  // namespace rrl
