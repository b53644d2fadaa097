#include "ssnf/scene.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "ssnf/rng.hpp"

namespace ssnf {

namespace fs = std::filesystem;
using nlohmann::json;

int SceneSpec::cell_col(double x) const {
  int c = int(std::floor((x + 1.0) / cell_size()));
  return std::clamp(c, 0, grid - 1);
}

int SceneSpec::cell_row(double y) const {
  int r = int(std::floor((1.0 - y) / cell_size()));
  return std::clamp(r, 0, grid - 1);
}

double SceneSpec::max_height() const {
  double mx = alt_min;
  for (double h : height) mx = std::max(mx, h);
  return mx;
}

const VehiclePlacement* SceneSpec::vehicle_at(int date, int r, int c) const {
  if (date < 0 || date >= int(vehicles.size())) return nullptr;
  for (const auto& v : vehicles[size_t(date)])
    if (r >= v.row && r < v.row + v.rows && c >= v.col && c < v.col + v.cols) return &v;
  return nullptr;
}

SceneSpec SceneSpec::without_vehicles() const {
  SceneSpec s = *this;
  for (auto& date : s.vehicles) date.clear();
  return s;
}

void SceneSpec::validate() const {
  if (int(height.size()) != grid * grid || int(cls.size()) != grid * grid ||
      int(albedo.size()) != grid * grid)
    throw std::invalid_argument("SceneSpec: grid buffers inconsistent");
  for (double h : height)
    if (h < alt_min || h > alt_max) throw std::invalid_argument("SceneSpec: height outside bounds");
  for (const auto& date : vehicles)
    for (const auto& v : date)
      for (int r = v.row; r < v.row + v.rows; ++r)
        for (int c = v.col; c < v.col + v.cols; ++c) {
          if (r < 0 || r >= grid || c < 0 || c >= grid)
            throw std::invalid_argument("SceneSpec: vehicle outside grid");
          if (cls[cell_index(r, c)] != kGround)
            throw std::invalid_argument("SceneSpec: vehicle not on ground");
        }
}

namespace {

// smooth value noise: coarse gaussian grid, bilinear interpolation
struct ValueNoise {
  int n;
  std::vector<double> values;

  ValueNoise(int n_, Rng& rng) : n(n_), values(size_t(n_ * n_)) {
    for (auto& v : values) v = rng.normal();
  }
  double at(double u, double v) const {  // u, v in [0,1]
    const double x = u * (n - 1), y = v * (n - 1);
    const int x0 = std::clamp(int(x), 0, n - 2), y0 = std::clamp(int(y), 0, n - 2);
    const double fx = x - x0, fy = y - y0;
    auto g = [&](int yy, int xx) { return values[size_t(yy * n + xx)]; };
    return g(y0, x0) * (1 - fx) * (1 - fy) + g(y0, x0 + 1) * fx * (1 - fy) +
           g(y0 + 1, x0) * (1 - fx) * fy + g(y0 + 1, x0 + 1) * fx * fy;
  }
};

const std::array<double, 3> kVehicleColors[] = {
    {0.10, 0.10, 0.12}, {0.92, 0.92, 0.95}, {0.70, 0.12, 0.10},
    {0.12, 0.20, 0.60}, {0.65, 0.67, 0.70},
};

void fill_albedo(SceneSpec& s, Rng& rng) {
  const auto palette = class_palette_f();
  for (size_t i = 0; i < s.albedo.size(); ++i) {
    const double gain = (s.cls[i] == kWater) ? rng.uniform(0.95, 1.05) : rng.uniform(0.85, 1.15);
    for (int c = 0; c < 3; ++c)
      s.albedo[i][size_t(c)] = std::clamp(palette[s.cls[i]][size_t(c)] * gain, 0.0, 1.0);
  }
}

void fill_directions(SceneSpec& s, uint64_t seed) {
  const double golden = 2.39996322972865332;
  for (int d = 0; d < s.n_dates; ++d) {
    Rng rs(seed, stream::kScene, uint64_t(100 + d));
    const double sun_el = (40.0 + 25.0 * rs.next_double()) * M_PI / 180.0;
    const double sun_az = golden * d + 0.3 * rs.next_double();
    s.sun_dirs.push_back(
        Vec3{std::cos(sun_el) * std::cos(sun_az), std::cos(sun_el) * std::sin(sun_az),
             std::sin(sun_el)});
    const double zen = (4.0 + 14.0 * rs.next_double()) * M_PI / 180.0;
    const double vaz = golden * d + 1.1 + 0.3 * rs.next_double();
    s.view_dirs.push_back(Vec3{-std::sin(zen) * std::cos(vaz), -std::sin(zen) * std::sin(vaz),
                               -std::cos(zen)});
  }
}

// places a vehicle if its whole footprint is ground
bool try_place(SceneSpec& s, int date, int row, int col, int rows, int cols, Rng& rng) {
  if (row < 0 || col < 0 || row + rows > s.grid || col + cols > s.grid) return false;
  for (int r = row; r < row + rows; ++r)
    for (int c = col; c < col + cols; ++c)
      if (s.cls[s.cell_index(r, c)] != kGround) return false;
  VehiclePlacement v;
  v.row = row;
  v.col = col;
  v.rows = rows;
  v.cols = cols;
  v.albedo = kVehicleColors[rng.next_below(5)];
  s.vehicles[size_t(date)].push_back(v);
  return true;
}

void build_flat(SceneSpec& s) {
  std::fill(s.height.begin(), s.height.end(), -0.1);
  std::fill(s.cls.begin(), s.cls.end(), uint8_t(kGround));
}

void build_town(SceneSpec& s, bool with_vehicles) {
  Rng rng(s.seed, stream::kScene, 1);
  const int g = s.grid;
  ValueNoise terrain(6, rng);
  for (int r = 0; r < g; ++r)
    for (int c = 0; c < g; ++c) {
      s.height[s.cell_index(r, c)] = -0.10 + 0.04 * terrain.at(c / double(g - 1), r / double(g - 1));
      s.cls[s.cell_index(r, c)] = kGround;
    }

  // water pond
  const double wx = rng.uniform(-0.5, 0.5), wy = rng.uniform(-0.5, 0.5);
  const double wrx = rng.uniform(0.15, 0.3), wry = rng.uniform(0.15, 0.3);
  for (int r = 0; r < g; ++r)
    for (int c = 0; c < g; ++c) {
      const double x = -1 + (2 * c + 1.0) / g, y = 1 - (2 * r + 1.0) / g;
      const double dx = (x - wx) / wrx, dy = (y - wy) / wry;
      if (dx * dx + dy * dy < 1.0) {
        s.cls[s.cell_index(r, c)] = kWater;
        s.height[s.cell_index(r, c)] = -0.18;
      }
    }

  // vegetation patches
  const int n_veg = 3 + int(rng.next_below(3));
  for (int i = 0; i < n_veg; ++i) {
    const double cx = rng.uniform(-0.8, 0.8), cy = rng.uniform(-0.8, 0.8);
    const double rad = rng.uniform(0.1, 0.25);
    for (int r = 0; r < g; ++r)
      for (int c = 0; c < g; ++c) {
        const double x = -1 + (2 * c + 1.0) / g, y = 1 - (2 * r + 1.0) / g;
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) < rad * rad &&
            s.cls[s.cell_index(r, c)] == kGround) {
          s.cls[s.cell_index(r, c)] = kVegetation;
          s.height[s.cell_index(r, c)] += 0.05 + 0.02 * rng.next_double();
        }
      }
  }

  // buildings
  const int n_bld = 7 + int(rng.next_below(4));
  for (int i = 0; i < n_bld; ++i) {
    const int bw = 3 + int(rng.next_below(6)), bh = 3 + int(rng.next_below(6));
    const int row = int(rng.next_below(uint64_t(g - bh)));
    const int col = int(rng.next_below(uint64_t(g - bw)));
    bool on_water = false;
    for (int r = row; r < row + bh && !on_water; ++r)
      for (int c = col; c < col + bw; ++c)
        if (s.cls[s.cell_index(r, c)] == kWater) {
          on_water = true;
          break;
        }
    if (on_water) continue;
    const double hgt = rng.uniform(0.10, 0.34);
    for (int r = row; r < row + bh; ++r)
      for (int c = col; c < col + bw; ++c) {
        s.cls[s.cell_index(r, c)] = kBuildings;
        s.height[s.cell_index(r, c)] = -0.1 + hgt;
      }
  }

  if (!with_vehicles) return;
  // a pool of candidate spots reused across dates, so some locations hold
  // vehicles in many views
  std::vector<std::pair<int, int>> spots;
  Rng spot_rng(s.seed, stream::kScene, 2);
  while (spots.size() < 30) {
    spots.push_back({int(spot_rng.next_below(uint64_t(g - 2))), int(spot_rng.next_below(uint64_t(g - 2)))});
  }
  for (int d = 0; d < s.n_dates; ++d) {
    Rng vr(s.seed, stream::kScene, uint64_t(200 + d));
    int placed = 0;
    for (size_t i = 0; i < spots.size() && placed < 12; ++i) {
      if (vr.next_double() > 0.4) continue;
      const bool horiz = vr.next_below(2) == 0;
      placed += try_place(s, d, spots[i].first, spots[i].second, horiz ? 1 : 2, horiz ? 2 : 1, vr)
                    ? 1
                    : 0;
    }
  }
}

void build_parking_lot(SceneSpec& s, bool with_vehicles) {
  Rng rng(s.seed, stream::kScene, 1);
  const int g = s.grid;
  std::fill(s.height.begin(), s.height.end(), -0.1);
  std::fill(s.cls.begin(), s.cls.end(), uint8_t(kGround));

  // vegetation border strip and two buildings give the scene structure
  for (int r = 0; r < g; ++r)
    for (int c = 0; c < 3; ++c) {
      s.cls[s.cell_index(r, c)] = kVegetation;
      s.height[s.cell_index(r, c)] = -0.05;
    }
  auto building = [&](int row, int col, int bh, int bw, double hgt) {
    for (int r = row; r < row + bh; ++r)
      for (int c = col; c < col + bw; ++c) {
        s.cls[s.cell_index(r, c)] = kBuildings;
        s.height[s.cell_index(r, c)] = -0.1 + hgt;
      }
  };
  building(2, g - 10, 6, 7, 0.28);
  building(g - 9, g - 8, 5, 5, 0.2);

  // slot grid in the central lot; slots repeat across dates
  std::vector<std::pair<int, int>> slots;
  const int lot_r0 = g / 2 - 8, lot_r1 = g / 2 + 8;
  const int lot_c0 = g / 2 - 10, lot_c1 = g / 2 + 10;
  for (int r = lot_r0; r < lot_r1; r += 2)
    for (int c = lot_c0; c < lot_c1; c += 3) slots.push_back({r, c});

  if (!with_vehicles) return;
  for (int d = 0; d < s.n_dates; ++d) {
    Rng vr(s.seed, stream::kScene, uint64_t(300 + d));
    for (const auto& [r, c] : slots)
      if (vr.next_double() < 0.65) try_place(s, d, r, c, 1, 2, vr);
  }
}

}  // namespace

SceneSpec generate_scene(uint64_t seed, const std::string& preset, int n_dates, int grid,
                         bool with_vehicles) {
  if (n_dates < 1 || grid < 8) throw std::invalid_argument("generate_scene: bad dimensions");
  SceneSpec s;
  s.seed = seed;
  s.preset = preset;
  s.grid = grid;
  s.n_dates = n_dates;
  s.height.resize(size_t(grid * grid));
  s.cls.resize(size_t(grid * grid));
  s.albedo.resize(size_t(grid * grid));
  s.vehicles.resize(size_t(n_dates));

  if (preset == "flat")
    build_flat(s);
  else if (preset == "town")
    build_town(s, with_vehicles);
  else if (preset == "parking_lot")
    build_parking_lot(s, with_vehicles);
  else
    throw std::invalid_argument("generate_scene: unknown preset " + preset);

  Rng arng(seed, stream::kScene, 3);
  fill_albedo(s, arng);
  fill_directions(s, seed);
  s.validate();
  return s;
}

OracleHit oracle_trace(const SceneSpec& scene, const Ray& ray, int date) {
  const Vec3 o = ray.origin, d = ray.direction;
  if (d.z >= 0) throw std::invalid_argument("oracle_trace: ray must descend");
  const double eps = 1e-12;

  // clip to the footprint and the altitude slab
  double t0 = ray.t_near, t1 = (o.z - scene.alt_min) / (-d.z);
  auto clip_axis = [&](double oa, double da) {
    if (std::abs(da) < 1e-15) {
      if (oa < -1 || oa > 1) t0 = t1 + 1;  // outside forever
      return;
    }
    double lo = (-1 - oa) / da, hi = (1 - oa) / da;
    if (lo > hi) std::swap(lo, hi);
    t0 = std::max(t0, lo);
    t1 = std::min(t1, hi);
  };
  clip_axis(o.x, d.x);
  clip_axis(o.y, d.y);

  OracleHit miss;
  miss.hit = false;
  miss.cls = kGround;
  miss.albedo = class_palette_f()[kGround];
  miss.lit = true;
  miss.depth = ray.t_far;
  miss.point = o + d * ray.t_far;
  if (t0 >= t1) return miss;

  double t = t0;
  Vec3 p = o + d * (t + eps);
  int r = scene.cell_row(p.y), c = scene.cell_col(p.x);
  const double cs = scene.cell_size();

  for (int guard = 0; guard < 4 * scene.grid + 8; ++guard) {
    // exit parameter of the current cell
    double tx = std::numeric_limits<double>::infinity();
    double ty = tx;
    if (d.x > 1e-15) tx = ((-1 + (c + 1) * cs) - o.x) / d.x;
    else if (d.x < -1e-15) tx = ((-1 + c * cs) - o.x) / d.x;
    if (d.y > 1e-15) ty = ((1 - r * cs) - o.y) / d.y;
    else if (d.y < -1e-15) ty = ((1 - (r + 1) * cs) - o.y) / d.y;
    const double t_cell_exit = std::min({tx, ty, t1});

    const double h = scene.height[scene.cell_index(r, c)];
    const double z_here = o.z + d.z * t;
    OracleHit hit;
    hit.hit = true;
    if (z_here <= h + 1e-12) {
      // entered this cell below its surface: wall face
      hit.depth = t;
    } else if (o.z + d.z * t_cell_exit <= h) {
      // crosses the cell top
      hit.depth = (o.z - h) / (-d.z);
    } else {
      if (t_cell_exit >= t1 - 1e-13) break;
      t = t_cell_exit;
      if (tx <= ty) c += d.x > 0 ? 1 : -1;
      if (ty <= tx) r += d.y > 0 ? -1 : 1;
      if (r < 0 || r >= scene.grid || c < 0 || c >= scene.grid) break;
      continue;
    }
    hit.point = o + d * hit.depth;
    const VehiclePlacement* v = scene.vehicle_at(date, r, c);
    hit.cls = v ? uint8_t(kVehicles) : scene.cls[scene.cell_index(r, c)];
    hit.albedo = v ? v->albedo : scene.albedo[scene.cell_index(r, c)];
    return hit;
  }
  return miss;
}

bool oracle_sun_visible(const SceneSpec& scene, const Vec3& point, const Vec3& sun_dir) {
  const Vec3 w = sun_dir.normalized();
  if (w.z <= 0) return false;
  const Vec3 o = point;
  const double cs = scene.cell_size();
  const double z_top = scene.max_height();

  double t = 0;
  const double t_top = (z_top - o.z) / w.z;  // above this altitude nothing occludes
  if (t_top <= 0) return true;
  // resolve boundary points (wall faces) toward the sun so the starting
  // cell is the one the ray actually travels through; a start outside the
  // footprint leaves the volume immediately
  const double nudge = 1e-9;
  const double nx = o.x + nudge * w.x, ny = o.y + nudge * w.y;
  if (nx < -1 || nx > 1 || ny < -1 || ny > 1) return true;
  int r = scene.cell_row(ny), c = scene.cell_col(nx);
  if (o.z < scene.height[scene.cell_index(r, c)] - 1e-12) return false;
  for (int guard = 0; guard < 4 * scene.grid + 8; ++guard) {
    double tx = std::numeric_limits<double>::infinity();
    double ty = tx;
    if (w.x > 1e-15) tx = ((-1 + (c + 1) * cs) - o.x) / w.x;
    else if (w.x < -1e-15) tx = ((-1 + c * cs) - o.x) / w.x;
    if (w.y > 1e-15) ty = ((1 - r * cs) - o.y) / w.y;
    else if (w.y < -1e-15) ty = ((1 - (r + 1) * cs) - o.y) / w.y;
    const double t_exit = std::min(tx, ty);
    if (t > 0) {
      // at cell entry the ray is at its lowest altitude within the cell
      const double z_enter = o.z + w.z * t;
      if (z_enter < scene.height[scene.cell_index(r, c)] - 1e-12) return false;
    }
    if (t_exit > t_top) return true;
    t = t_exit;
    if (tx <= ty) c += w.x > 0 ? 1 : -1;
    if (ty <= tx) r += w.y > 0 ? -1 : 1;
    if (r < 0 || r >= scene.grid || c < 0 || c >= scene.grid) return true;
  }
  return true;
}

FrameRecord oracle_render(const SceneSpec& scene, const RpcModel& camera, const Vec3& sun,
                          int date) {
  const int g = scene.grid;
  FrameRecord f;
  f.date = date;
  f.sun = sun.normalized();
  f.rpc = camera;
  f.rgb = ImageRgb8::make(g, g);
  f.labels.resize(size_t(g * g));
  f.depth.resize(size_t(g * g));
  for (int r = 0; r < g; ++r)
    for (int c = 0; c < g; ++c) {
      Ray ray = build_ray(camera, r, c, scene.alt_min, scene.alt_max);
      OracleHit hit = oracle_trace(scene, ray, date);
      const bool lit = hit.hit ? oracle_sun_visible(scene, hit.point, f.sun) : true;
      const double shade = lit ? 1.0 : 0.0;
      uint8_t* px = f.rgb.px(r, c);
      for (int ch = 0; ch < 3; ++ch)
        px[ch] = quantize8(hit.albedo[size_t(ch)] *
                           (shade + (1.0 - shade) * scene.ambient[size_t(ch)]));
      f.labels[size_t(r * g + c)] = hit.cls;
      f.depth[size_t(r * g + c)] = float(hit.depth);
    }
  return f;
}

void export_dataset(const SceneSpec& scene, const std::string& out_dir, int split_every,
                    double depth_fraction) {
  if (scene.n_dates < 2) throw std::invalid_argument("export_dataset: need at least 2 views");
  fs::create_directories(out_dir);
  for (const char* sub : {"rgb", "labels", "rpc", "depth"}) fs::create_directories(fs::path(out_dir) / sub);

  json meta;
  meta["grid"] = scene.grid;
  meta["preset"] = scene.preset;
  meta["alt_min"] = scene.alt_min;
  meta["alt_max"] = scene.alt_max;
  meta["bounds"] = {{"min", {-1.0, -1.0, scene.alt_min}}, {"max", {1.0, 1.0, scene.alt_max}}};
  meta["classes"] = class_names();
  meta["ambient"] = scene.ambient;
  meta["transient_class"] = int(kVehicles);

  int embed = 0;
  json frames = json::array();
  for (int d = 0; d < scene.n_dates; ++d) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04d", d);
    const bool is_test = split_every > 0 && (d % split_every) == split_every - 1;
    RpcModel camera = make_affine_rpc(scene.view_dirs[size_t(d)], scene.grid, scene.grid);
    FrameRecord f = oracle_render(scene, camera, scene.sun_dirs[size_t(d)], d);
    f.name = name;
    f.is_train = !is_test;
    f.embed_index = is_test ? -1 : embed++;

    write_png_rgb8((fs::path(out_dir) / "rgb" / (f.name + ".png")).string(), f.rgb);
    write_png_palette((fs::path(out_dir) / "labels" / (f.name + ".png")).string(), scene.grid,
                      scene.grid, f.labels, class_palette());
    write_rpc_file(camera, (fs::path(out_dir) / "rpc" / (f.name + ".txt")).string());

    // sparse depth supervision samples
    const int total = scene.grid * scene.grid;
    int k = int(std::lround(depth_fraction * total));
    k = std::clamp(k, 0, total);
    std::vector<int> order(static_cast<size_t>(total));
    for (int i = 0; i < total; ++i) order[size_t(i)] = i;
    Rng drng(scene.seed, stream::kScene, uint64_t(1000 + d));
    drng.shuffle(order);
    std::ofstream bin((fs::path(out_dir) / "depth" / (f.name + ".bin")).string(),
                      std::ios::binary);
    bin.write("SSNF", 4);
    const uint32_t count = uint32_t(k);
    bin.write(reinterpret_cast<const char*>(&count), 4);
    for (int i = 0; i < k; ++i) {
      const uint32_t row = uint32_t(order[size_t(i)] / scene.grid);
      const uint32_t col = uint32_t(order[size_t(i)] % scene.grid);
      const float depth = f.depth[size_t(order[size_t(i)])];
      bin.write(reinterpret_cast<const char*>(&row), 4);
      bin.write(reinterpret_cast<const char*>(&col), 4);
      bin.write(reinterpret_cast<const char*>(&depth), 4);
    }

    json jf;
    jf["name"] = f.name;
    jf["split"] = is_test ? "test" : "train";
    jf["embed"] = f.embed_index;
    jf["sun"] = {f.sun.x, f.sun.y, f.sun.z};
    jf["view"] = {scene.view_dirs[size_t(d)].x, scene.view_dirs[size_t(d)].y,
                  scene.view_dirs[size_t(d)].z};
    frames.push_back(jf);
  }
  meta["frames"] = frames;
  std::ofstream mf(fs::path(out_dir) / "meta.json");
  mf << meta.dump(2) << "\n";
}

}  // namespace ssnf
