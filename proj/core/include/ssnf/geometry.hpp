#pragma once

#include <cmath>
#include <stdexcept>

namespace ssnf {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    double n = norm();
    if (n == 0) throw std::invalid_argument("cannot normalize zero vector");
    return {x / n, y / n, z / n};
  }
};

// Axis-aligned scene bounds in world units.
struct Box3 {
  Vec3 min, max;

  bool valid() const { return max.x > min.x && max.y > min.y && max.z > min.z; }
  Vec3 center() const { return (min + max) * 0.5; }
};

// Affine map between world coordinates and the normalized [-1,1]^3 cube the
// field consumes. Inverse is exact.
inline Vec3 world_normalize(const Vec3& p, const Box3& b) {
  if (!b.valid()) throw std::invalid_argument("world_normalize: degenerate box");
  return {2.0 * (p.x - b.min.x) / (b.max.x - b.min.x) - 1.0,
          2.0 * (p.y - b.min.y) / (b.max.y - b.min.y) - 1.0,
          2.0 * (p.z - b.min.z) / (b.max.z - b.min.z) - 1.0};
}

inline Vec3 world_denormalize(const Vec3& p, const Box3& b) {
  if (!b.valid()) throw std::invalid_argument("world_denormalize: degenerate box");
  return {(p.x + 1.0) * 0.5 * (b.max.x - b.min.x) + b.min.x,
          (p.y + 1.0) * 0.5 * (b.max.y - b.min.y) + b.min.y,
          (p.z + 1.0) * 0.5 * (b.max.z - b.min.z) + b.min.z};
}

}  // namespace ssnf
