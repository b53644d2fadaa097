#pragma once

#include <stdexcept>
#include <vector>

#include "ssnf/geometry.hpp"
#include "ssnf/rng.hpp"
#include "ssnf/rpc.hpp"

namespace ssnf {

struct Ray {
  Vec3 origin;     // high-altitude endpoint
  Vec3 direction;  // unit vector toward the low endpoint
  double t_near = 0, t_far = 0;
  double row = 0, col = 0;
  int frame_index = -1;
};

struct SampleSet {
  std::vector<double> t;       // ascending
  std::vector<double> delta;   // delta[i] = t[i] - t[i-1], delta[0] = t[0] - t_near
  std::vector<Vec3> position;  // origin + t * direction
};

// Casts the viewing ray of a pixel between two altitude planes: both
// endpoints come from rpc_localize, the origin sits at the high end.
inline Ray build_ray(const RpcModel& model, double row, double col, double alt_min,
                     double alt_max) {
  if (!(alt_min < alt_max)) throw std::invalid_argument("build_ray: alt_min must be < alt_max");
  const LatLon top = rpc_localize(model, row, col, alt_max);
  const LatLon bot = rpc_localize(model, row, col, alt_min);
  const Vec3 p_top{top.lon, top.lat, alt_max};
  const Vec3 p_bot{bot.lon, bot.lat, alt_min};
  Ray r;
  r.origin = p_top;
  r.direction = (p_bot - p_top).normalized();
  r.t_near = 0;
  r.t_far = (p_bot - p_top).norm();
  r.row = row;
  r.col = col;
  return r;
}

// N uniform bins over [t_near, t_far]; jittered draws one uniform sample per
// bin (training), otherwise bin centers (evaluation).
inline SampleSet sample_along_ray(const Ray& ray, int n, bool jitter, Rng& rng) {
  if (n < 2) throw std::invalid_argument("sample_along_ray: need at least 2 samples");
  SampleSet s;
  s.t.resize(n);
  s.delta.resize(n);
  s.position.resize(n);
  const double span = (ray.t_far - ray.t_near) / n;
  for (int i = 0; i < n; ++i) {
    const double lo = ray.t_near + i * span;
    s.t[i] = jitter ? lo + rng.next_double() * span : lo + 0.5 * span;
  }
  double prev = ray.t_near;
  for (int i = 0; i < n; ++i) {
    s.delta[i] = s.t[i] - prev;
    prev = s.t[i];
    s.position[i] = ray.origin + ray.direction * s.t[i];
  }
  return s;
}

}  // namespace ssnf
