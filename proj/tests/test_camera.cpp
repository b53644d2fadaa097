#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "ssnf/rays.hpp"
#include "ssnf/rng.hpp"
#include "ssnf/rpc.hpp"

using namespace ssnf;

namespace {

RpcModel offset_only_model() {
  RpcModel m;
  m.line_den[0] = 1;
  m.samp_den[0] = 1;
  m.line_off = 120;
  m.samp_off = 80;
  return m;
}

// mild random cubic perturbation of an affine model, still invertible over
// the normalized cube
RpcModel random_cubic_model(uint64_t seed) {
  Rng rng(seed);
  RpcModel m = make_affine_rpc(Vec3{0.2, -0.1, -1.0}.normalized(), 64, 64);
  for (int i = 4; i < 20; ++i) {
    m.line_num[i] += rng.uniform(-0.02, 0.02);
    m.samp_num[i] += rng.uniform(-0.02, 0.02);
    m.line_den[i] += rng.uniform(-0.01, 0.01);
    m.samp_den[i] += rng.uniform(-0.01, 0.01);
  }
  return m;
}

}  // namespace

TEST_CASE("project: zero numerators return the image offsets") {
  RpcModel m = offset_only_model();
  auto px = rpc_project(m, 0.37, -0.81, 0.12);
  CHECK(px.row == doctest::Approx(120).epsilon(1e-15));
  CHECK(px.col == doctest::Approx(80).epsilon(1e-15));
}

TEST_CASE("project: affine numerators match direct polynomial evaluation") {
  RpcModel m;
  m.line_den[0] = 1;
  m.samp_den[0] = 1;
  m.line_num[2] = 2.0;  // P term
  m.samp_num[1] = 3.0;  // L term
  m.line_scale = 10;
  m.samp_scale = 10;
  for (double lat : {-0.5, 0.1, 0.9})
    for (double lon : {-0.7, 0.0, 0.3}) {
      auto px = rpc_project(m, lat, lon, 0.0);
      CHECK(px.row == doctest::Approx(2.0 * lat * 10).epsilon(1e-12));
      CHECK(px.col == doctest::Approx(3.0 * lon * 10).epsilon(1e-12));
    }
}

TEST_CASE("localize: offset-only model returns the normalization center") {
  RpcModel m = offset_only_model();
  m.lat_off = 0.25;
  m.lon_off = -0.5;
  auto ll = rpc_localize(m, 120, 80, 0.0);
  CHECK(ll.lat == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(ll.lon == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("localize: affine model inverts exactly") {
  RpcModel m = make_affine_rpc(Vec3{0.15, 0.25, -0.95}.normalized(), 48, 48);
  auto ll = rpc_localize(m, 10.0, 33.0, 0.2);
  auto px = rpc_project(m, ll.lat, ll.lon, 0.2);
  CHECK(px.row == doctest::Approx(10.0).epsilon(1e-10));
  CHECK(px.col == doctest::Approx(33.0).epsilon(1e-10));
}

TEST_CASE("round-trip project(localize) over 1000 random points per model") {
  for (uint64_t seed : {11u, 12u, 13u}) {
    RpcModel m = random_cubic_model(seed);
    Rng rng(seed, 5);
    for (int i = 0; i < 1000; ++i) {
      const double lat = rng.uniform(-0.9, 0.9);
      const double lon = rng.uniform(-0.9, 0.9);
      const double alt = rng.uniform(-0.5, 0.5);
      auto px = rpc_project(m, lat, lon, alt);
      auto ll = rpc_localize(m, px.row, px.col, alt);
      // error measured in normalized geographic units
      CHECK(std::abs(ll.lat - lat) < 1e-6);
      CHECK(std::abs(ll.lon - lon) < 1e-6);
    }
  }
}

TEST_CASE("validate rejects zero denominator constant and bad scales") {
  RpcModel m;
  CHECK_THROWS(m.validate());  // den constant is zero by default
  m.line_den[0] = 1;
  m.samp_den[0] = 1;
  m.lat_scale = 0;
  CHECK_THROWS(m.validate());
  m.lat_scale = 1;
  CHECK_NOTHROW(m.validate());
}

TEST_CASE("rpc file io round-trips coefficients exactly") {
  RpcModel m = random_cubic_model(3);
  const std::string path = (std::filesystem::temp_directory_path() / "ssnf_rpc_test.txt").string();
  write_rpc_file(m, path);
  RpcModel r = read_rpc_file(path);
  for (int i = 0; i < 20; ++i) {
    CHECK(m.line_num[size_t(i)] == r.line_num[size_t(i)]);
    CHECK(m.samp_den[size_t(i)] == r.samp_den[size_t(i)]);
  }
  CHECK(m.line_off == r.line_off);
  CHECK(m.samp_scale == r.samp_scale);
  std::filesystem::remove(path);
}

TEST_CASE("build_ray: nadir view gives a straight-down ray") {
  RpcModel m = make_affine_rpc(Vec3{0, 0, -1}, 48, 48);
  Ray r = build_ray(m, 10, 20, -0.5, 0.5);
  CHECK(r.direction.x == doctest::Approx(0).epsilon(1e-12));
  CHECK(r.direction.y == doctest::Approx(0).epsilon(1e-12));
  CHECK(r.direction.z == doctest::Approx(-1).epsilon(1e-12));
  CHECK(r.t_near == 0);
  CHECK(r.t_far == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("build_ray: endpoints reproject to the pixel") {
  RpcModel m = random_cubic_model(21);
  for (double row : {5.0, 31.0})
    for (double col : {7.0, 50.0}) {
      Ray r = build_ray(m, row, col, -0.4, 0.6);
      const Vec3 top = r.origin;
      const Vec3 bot = r.origin + r.direction * r.t_far;
      auto p1 = rpc_project(m, top.y, top.x, top.z);
      auto p2 = rpc_project(m, bot.y, bot.x, bot.z);
      CHECK(std::abs(p1.row - row) < 1e-5);
      CHECK(std::abs(p1.col - col) < 1e-5);
      CHECK(std::abs(p2.row - row) < 1e-5);
      CHECK(std::abs(p2.col - col) < 1e-5);
      CHECK(r.direction.norm() == doctest::Approx(1).epsilon(1e-9));
    }
}

TEST_CASE("rays from adjacent pixels of an affine model are parallel") {
  RpcModel m = make_affine_rpc(Vec3{0.3, 0.2, -0.93}.normalized(), 48, 48);
  Ray a = build_ray(m, 10, 10, -0.5, 0.5);
  Ray b = build_ray(m, 10, 11, -0.5, 0.5);
  Ray c = build_ray(m, 11, 10, -0.5, 0.5);
  CHECK((a.direction - b.direction).norm() < 1e-9);
  CHECK((a.direction - c.direction).norm() < 1e-9);
}

TEST_CASE("sample_along_ray: bin centers for N=2 over [0,1]") {
  Ray r;
  r.origin = {0, 0, 1};
  r.direction = {0, 0, -1};
  r.t_near = 0;
  r.t_far = 1;
  Rng rng(0);
  SampleSet s = sample_along_ray(r, 2, false, rng);
  CHECK(s.t[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(s.t[1] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(s.delta[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(s.delta[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("sample_along_ray: partition property and reconstruction identity") {
  Ray r;
  r.origin = {0.3, -0.2, 0.9};
  r.direction = Vec3{0.1, 0.2, -0.97}.normalized();
  r.t_near = 0;
  r.t_far = 1.7;
  Rng rng(5, stream::kJitter, 0);
  for (bool jitter : {false, true}) {
    SampleSet s = sample_along_ray(r, 33, jitter, rng);
    double sum = 0;
    for (size_t i = 0; i < s.t.size(); ++i) {
      sum += s.delta[i];
      CHECK(s.delta[i] > 0);
      const Vec3 expect = r.origin + r.direction * s.t[i];
      CHECK(s.position[i].x == expect.x);
      CHECK(s.position[i].y == expect.y);
      CHECK(s.position[i].z == expect.z);
    }
    CHECK(sum <= r.t_far - r.t_near + 1e-12);
  }
}

TEST_CASE("sample_along_ray: jitter reproducible for a fixed seed") {
  Ray r;
  r.origin = {0, 0, 1};
  r.direction = {0, 0, -1};
  r.t_far = 1;
  Rng r1(3, stream::kJitter, 42), r2(3, stream::kJitter, 42);
  SampleSet a = sample_along_ray(r, 16, true, r1);
  SampleSet b = sample_along_ray(r, 16, true, r2);
  CHECK(a.t == b.t);
  CHECK_THROWS(sample_along_ray(r, 1, false, r1));
}

TEST_CASE("world_normalize: center, corner, round-trip") {
  Box3 box{{-2, 0, 10}, {4, 6, 20}};
  Vec3 c = world_normalize(box.center(), box);
  CHECK(c.x == doctest::Approx(0).epsilon(1e-14));
  CHECK(c.y == doctest::Approx(0).epsilon(1e-14));
  CHECK(c.z == doctest::Approx(0).epsilon(1e-14));
  Vec3 k = world_normalize(box.max, box);
  CHECK(k.x == doctest::Approx(1).epsilon(1e-14));
  CHECK(k.y == doctest::Approx(1).epsilon(1e-14));
  CHECK(k.z == doctest::Approx(1).epsilon(1e-14));
  Rng rng(2);
  for (int i = 0; i < 64; ++i) {
    Vec3 p{rng.uniform(-2, 4), rng.uniform(0, 6), rng.uniform(10, 20)};
    Vec3 back = world_denormalize(world_normalize(p, box), box);
    CHECK(std::abs(back.x - p.x) < 1e-12);
    CHECK(std::abs(back.y - p.y) < 1e-12);
    CHECK(std::abs(back.z - p.z) < 1e-12);
  }
  CHECK_THROWS(world_normalize({0, 0, 0}, Box3{{1, 1, 1}, {1, 2, 2}}));
}
