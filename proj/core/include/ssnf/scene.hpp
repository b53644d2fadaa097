#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ssnf/colormap.hpp"
#include "ssnf/geometry.hpp"
#include "ssnf/image.hpp"
#include "ssnf/rays.hpp"
#include "ssnf/rpc.hpp"

namespace ssnf {

// Vehicles are flat decals over ground cells: they recolor and relabel the
// surface without changing geometry, so the only difference between two
// dates of the same scene is vehicle coverage.
struct VehiclePlacement {
  int row = 0, col = 0;   // anchor cell
  int rows = 1, cols = 2; // footprint extent
  std::array<double, 3> albedo{0.15, 0.15, 0.18};
};

// Deterministic synthetic multi-date scene: a blocky heightfield over the
// normalized [-1,1]^2 footprint with per-cell classes and albedo, per-date
// sun/view directions and vehicle placements.
struct SceneSpec {
  uint64_t seed = 0;
  std::string preset = "flat";
  int grid = 48;
  int n_dates = 10;
  double alt_min = -0.5, alt_max = 0.6;
  std::vector<double> height;                   // grid*grid, surface altitude
  std::vector<uint8_t> cls;                     // grid*grid static class
  std::vector<std::array<double, 3>> albedo;    // grid*grid static albedo
  std::array<double, 3> ambient{0.35, 0.42, 0.55};
  std::vector<std::vector<VehiclePlacement>> vehicles;  // per date
  std::vector<Vec3> sun_dirs;   // unit, z > 0, pointing toward the sun
  std::vector<Vec3> view_dirs;  // unit, z < 0, pointing down at the scene

  double cell_size() const { return 2.0 / grid; }
  int cell_col(double x) const;
  int cell_row(double y) const;
  size_t cell_index(int r, int c) const { return size_t(r) * size_t(grid) + size_t(c); }
  double max_height() const;

  // vehicle covering cell (r, c) on the given date, or nullptr
  const VehiclePlacement* vehicle_at(int date, int r, int c) const;

  SceneSpec without_vehicles() const;
  void validate() const;  // footprints on ground cells, heights within bounds
};

// presets: flat | town | parking_lot
SceneSpec generate_scene(uint64_t seed, const std::string& preset, int n_dates = 10,
                         int grid = 48, bool with_vehicles = true);

struct OracleHit {
  bool hit = false;     // false: ray left the volume (treated as boundary ground)
  double depth = 0;     // t along the ray
  uint8_t cls = kGround;
  std::array<double, 3> albedo{0, 0, 0};
  bool lit = true;
  Vec3 point;
};

// Exact first intersection of a descending ray with the heightfield,
// including vertical walls between cells of different height.
OracleHit oracle_trace(const SceneSpec& scene, const Ray& ray, int date);

// true if the open ray from `point` toward the sun leaves the scene
// without re-entering geometry
bool oracle_sun_visible(const SceneSpec& scene, const Vec3& point, const Vec3& sun_dir);

struct FrameRecord {
  std::string name;
  int date = 0;
  int embed_index = -1;  // row in the training embedding table; -1 for test
  bool is_train = true;
  Vec3 sun, view;
  RpcModel rpc;
  ImageRgb8 rgb;
  std::vector<uint8_t> labels;
  std::vector<float> depth;  // full depth map, t units along each pixel ray
};

// Renders one view with binary shadows: color = albedo * (lit + (1-lit) * ambient).
FrameRecord oracle_render(const SceneSpec& scene, const RpcModel& camera, const Vec3& sun,
                          int date);

// Writes the on-disk dataset layout: meta.json, rpc/, rgb/, labels/,
// depth/ (sparse samples). Every split_every-th view becomes a test frame.
void export_dataset(const SceneSpec& scene, const std::string& out_dir, int split_every = 5,
                    double depth_fraction = 0.03);

}  // namespace ssnf
