#pragma once

#include <array>
#include <string>

#include "ssnf/geometry.hpp"

namespace ssnf {

// Rational polynomial camera model. Maps geographic coordinates
// (lat, lon, alt) to image coordinates (row, col) as ratios of cubic
// polynomials over normalized inputs. Coefficients follow the conventional
// RPC00B monomial ordering over (P, L, H) = normalized (lat, lon, alt);
// see docs/formats.md for the full table.
struct RpcModel {
  std::array<double, 20> line_num{}, line_den{}, samp_num{}, samp_den{};
  double lat_off = 0, lat_scale = 1;
  double lon_off = 0, lon_scale = 1;
  double alt_off = 0, alt_scale = 1;
  double line_off = 0, line_scale = 1;
  double samp_off = 0, samp_scale = 1;

  void validate() const;  // throws on zero denominator constant or bad scales
};

struct PixelCoord {
  double row = 0, col = 0;
};

// Cubic monomial basis in the RPC00B order, plus partials w.r.t. P and L.
std::array<double, 20> rpc_basis(double p, double l, double h);
std::array<double, 20> rpc_basis_dp(double p, double l, double h);
std::array<double, 20> rpc_basis_dl(double p, double l, double h);

// (lat, lon, alt) -> (row, col)
PixelCoord rpc_project(const RpcModel& m, double lat, double lon, double alt);

// (row, col, alt) -> (lat, lon). Newton iteration on the normalized 2x2
// system with the analytic Jacobian; converges in one step for affine
// models. Throws after 50 iterations without convergence or on a singular
// Jacobian.
struct LatLon {
  double lat = 0, lon = 0;
};
LatLon rpc_localize(const RpcModel& m, double row, double col, double alt);

// Plain-text key/value metadata (LINE_OFF, SAMP_OFF, ..., LINE_NUM_COEFF_1..20).
RpcModel read_rpc_file(const std::string& path);
void write_rpc_file(const RpcModel& m, const std::string& path);

// Exactly-affine RPC instance for a parallel-projection view along
// `view_dir` (unit vector, pointing downward: z < 0) over the normalized
// scene cube. Pixel (r, c) centers map to cell centers of a width x height
// grid at nadir; oblique views widen the window so the whole cube stays in
// frame.
RpcModel make_affine_rpc(const Vec3& view_dir, int width, int height);

}  // namespace ssnf
