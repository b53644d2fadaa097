#include "ssnf/rpc.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace ssnf {

namespace {
constexpr double kDenEps = 1e-12;

double poly(const std::array<double, 20>& c, const std::array<double, 20>& basis) {
  double acc = 0;
  for (int i = 0; i < 20; ++i) acc += c[i] * basis[i];
  return acc;
}
}  // namespace

void RpcModel::validate() const {
  if (std::abs(line_den[0]) < kDenEps || std::abs(samp_den[0]) < kDenEps)
    throw std::invalid_argument("RpcModel: denominator constant coefficient is zero");
  if (lat_scale <= 0 || lon_scale <= 0 || alt_scale <= 0 || line_scale <= 0 || samp_scale <= 0)
    throw std::invalid_argument("RpcModel: scales must be positive");
}

std::array<double, 20> rpc_basis(double p, double l, double h) {
  return {1,         l,         p,         h,         l * p,     l * h,     p * h,
          l * l,     p * p,     h * h,     p * l * h, l * l * l, l * p * p, l * h * h,
          l * l * p, p * p * p, p * h * h, l * l * h, p * p * h, h * h * h};
}

std::array<double, 20> rpc_basis_dp(double p, double l, double h) {
  return {0,     0,         1, 0,         l,         0, h,         0,     2 * p, 0,
          l * h, 0,         2 * l * p,   0,         l * l,         3 * p * p,
          h * h, 0,         2 * p * h,   0};
}

std::array<double, 20> rpc_basis_dl(double p, double l, double h) {
  return {0,     1,         0, 0,         p,         h, 0,         2 * l, 0,     0,
          p * h, 3 * l * l, p * p,       h * h,     2 * l * p,     0,
          0,     2 * l * h, 0,           0};
}

PixelCoord rpc_project(const RpcModel& m, double lat, double lon, double alt) {
  const double p = (lat - m.lat_off) / m.lat_scale;
  const double l = (lon - m.lon_off) / m.lon_scale;
  const double h = (alt - m.alt_off) / m.alt_scale;
  const auto basis = rpc_basis(p, l, h);
  const double dl = poly(m.line_den, basis);
  const double ds = poly(m.samp_den, basis);
  if (std::abs(dl) < kDenEps || std::abs(ds) < kDenEps)
    throw std::domain_error("rpc_project: denominator vanishes");
  const double row_n = poly(m.line_num, basis) / dl;
  const double col_n = poly(m.samp_num, basis) / ds;
  return {row_n * m.line_scale + m.line_off, col_n * m.samp_scale + m.samp_off};
}

LatLon rpc_localize(const RpcModel& m, double row, double col, double alt) {
  const double target_r = (row - m.line_off) / m.line_scale;
  const double target_c = (col - m.samp_off) / m.samp_scale;
  const double h = (alt - m.alt_off) / m.alt_scale;

  double p = 0, l = 0;  // start at the normalization center
  for (int it = 0; it < 50; ++it) {
    const auto basis = rpc_basis(p, l, h);
    const double nl = poly(m.line_num, basis), dl = poly(m.line_den, basis);
    const double ns = poly(m.samp_num, basis), ds = poly(m.samp_den, basis);
    if (std::abs(dl) < kDenEps || std::abs(ds) < kDenEps)
      throw std::domain_error("rpc_localize: denominator vanishes");
    const double fr = nl / dl - target_r;
    const double fc = ns / ds - target_c;
    if (std::abs(fr) < 1e-9 && std::abs(fc) < 1e-9)
      return {p * m.lat_scale + m.lat_off, l * m.lon_scale + m.lon_off};

    const auto bp = rpc_basis_dp(p, l, h);
    const auto bl = rpc_basis_dl(p, l, h);
    // d(num/den) = (num' * den - num * den') / den^2
    const double jrp = (poly(m.line_num, bp) * dl - nl * poly(m.line_den, bp)) / (dl * dl);
    const double jrl = (poly(m.line_num, bl) * dl - nl * poly(m.line_den, bl)) / (dl * dl);
    const double jcp = (poly(m.samp_num, bp) * ds - ns * poly(m.samp_den, bp)) / (ds * ds);
    const double jcl = (poly(m.samp_num, bl) * ds - ns * poly(m.samp_den, bl)) / (ds * ds);
    const double det = jrp * jcl - jrl * jcp;
    if (std::abs(det) < 1e-15) throw std::domain_error("rpc_localize: singular Jacobian");
    p -= (fr * jcl - jrl * fc) / det;
    l -= (jrp * fc - fr * jcp) / det;
  }
  throw std::runtime_error("rpc_localize: no convergence after 50 iterations");
}

namespace {
const char* kScalarKeys[] = {"LINE_OFF",   "SAMP_OFF",   "LAT_OFF",   "LONG_OFF",   "HEIGHT_OFF",
                             "LINE_SCALE", "SAMP_SCALE", "LAT_SCALE", "LONG_SCALE", "HEIGHT_SCALE"};

double* scalar_slot(RpcModel& m, int i) {
  switch (i) {
    case 0: return &m.line_off;
    case 1: return &m.samp_off;
    case 2: return &m.lat_off;
    case 3: return &m.lon_off;
    case 4: return &m.alt_off;
    case 5: return &m.line_scale;
    case 6: return &m.samp_scale;
    case 7: return &m.lat_scale;
    case 8: return &m.lon_scale;
    default: return &m.alt_scale;
  }
}
}  // namespace

RpcModel read_rpc_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open RPC file: " + path);
  RpcModel m;
  std::string line;
  while (std::getline(in, line)) {
    auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::string key = line.substr(0, colon);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    // value may carry a trailing unit word (e.g. "pixels"); strtod stops there
    const double value = std::strtod(line.c_str() + colon + 1, nullptr);
    bool matched = false;
    for (int i = 0; i < 10 && !matched; ++i) {
      if (key == kScalarKeys[i]) {
        *scalar_slot(m, i) = value;
        matched = true;
      }
    }
    if (matched) continue;
    auto coeff = [&](const char* prefix, std::array<double, 20>& dst) {
      size_t n = std::string(prefix).size();
      if (key.rfind(prefix, 0) != 0) return false;
      int idx = std::atoi(key.c_str() + n);
      if (idx < 1 || idx > 20) throw std::runtime_error("bad coefficient index in " + key);
      dst[idx - 1] = value;
      return true;
    };
    coeff("LINE_NUM_COEFF_", m.line_num) || coeff("LINE_DEN_COEFF_", m.line_den) ||
        coeff("SAMP_NUM_COEFF_", m.samp_num) || coeff("SAMP_DEN_COEFF_", m.samp_den);
  }
  m.validate();
  return m;
}

void write_rpc_file(const RpcModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write RPC file: " + path);
  char buf[64];
  auto emit = [&](const std::string& key, double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << key << ": " << buf << "\n";
  };
  const RpcModel& c = m;
  const double scalars[] = {c.line_off,   c.samp_off,   c.lat_off,   c.lon_off,   c.alt_off,
                            c.line_scale, c.samp_scale, c.lat_scale, c.lon_scale, c.alt_scale};
  for (int i = 0; i < 10; ++i) emit(kScalarKeys[i], scalars[i]);
  for (int i = 0; i < 20; ++i) emit("LINE_NUM_COEFF_" + std::to_string(i + 1), m.line_num[i]);
  for (int i = 0; i < 20; ++i) emit("LINE_DEN_COEFF_" + std::to_string(i + 1), m.line_den[i]);
  for (int i = 0; i < 20; ++i) emit("SAMP_NUM_COEFF_" + std::to_string(i + 1), m.samp_num[i]);
  for (int i = 0; i < 20; ++i) emit("SAMP_DEN_COEFF_" + std::to_string(i + 1), m.samp_den[i]);
}

RpcModel make_affine_rpc(const Vec3& view_dir, int width, int height) {
  if (view_dir.z >= 0) throw std::invalid_argument("make_affine_rpc: view must point downward");
  const Vec3 d = view_dir.normalized();
  // image axes perpendicular to the view direction; col ~ east, row ~ south
  const Vec3 e_col{1, 0, 0}, e_row{0, -1, 0};
  Vec3 u = e_col - d * d.dot(e_col);
  Vec3 v = e_row - d * d.dot(e_row);
  // widen so u.p / umax stays in [-1,1] over the whole [-1,1]^3 cube;
  // exactly 1 at nadir, so nadir pixels align with heightfield cells
  const double umax = std::abs(u.x) + std::abs(u.y) + std::abs(u.z);
  const double vmax = std::abs(v.x) + std::abs(v.y) + std::abs(v.z);
  u = u * (1.0 / umax);
  v = v * (1.0 / vmax);

  RpcModel m;
  m.line_den[0] = 1;
  m.samp_den[0] = 1;
  // basis order: 1, L(lon=x), P(lat=y), H(alt=z)
  m.samp_num[1] = u.x;
  m.samp_num[2] = u.y;
  m.samp_num[3] = u.z;
  m.line_num[1] = v.x;
  m.line_num[2] = v.y;
  m.line_num[3] = v.z;
  m.samp_scale = width / 2.0;
  m.samp_off = (width - 1) / 2.0;
  m.line_scale = height / 2.0;
  m.line_off = (height - 1) / 2.0;
  return m;
}

}  // namespace ssnf
