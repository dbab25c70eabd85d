#include "lpcc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>

#include "lpcc/byte_io.hpp"
#include "lpcc/error.hpp"
#include "lpcc/hash.hpp"

namespace lpcc {

namespace {

constexpr double kPi = std::numbers::pi;

bool finite(const Point3& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
}

SensorIntrinsics make_intrinsics(std::vector<double> theta, std::vector<double> z,
                                 std::vector<int> phi) {
  SensorIntrinsics intr;
  intr.pitch_angles = std::move(theta);
  intr.vertical_offsets = std::move(z);
  intr.phi_per_turn = std::move(phi);
  intr.validate();
  return intr;
}

}  // namespace

void SensorIntrinsics::validate() {
  const auto b = pitch_angles.size();
  require(b >= 1, ErrorKind::invalid_argument, "intrinsics need at least one beam");
  require(vertical_offsets.size() == b, ErrorKind::invalid_argument,
          "lasersZ length does not match the beam count");
  require(phi_per_turn.empty() || phi_per_turn.size() == b, ErrorKind::invalid_argument,
          "lasersNumPhiPerTurn length does not match the beam count");
  require(std::isfinite(offset_unit_scale) && offset_unit_scale > 0.0,
          ErrorKind::invalid_argument, "unit scale must be positive");
  for (std::size_t i = 0; i < b; ++i) {
    require(std::isfinite(pitch_angles[i]) && std::abs(pitch_angles[i]) < kPi / 2,
            ErrorKind::invalid_argument, "pitch angle out of (-pi/2, pi/2)");
    require(std::isfinite(vertical_offsets[i]), ErrorKind::invalid_argument,
            "non-finite vertical offset");
  }
  pitch_order.resize(b);
  std::iota(pitch_order.begin(), pitch_order.end(), 0);
  std::stable_sort(pitch_order.begin(), pitch_order.end(),
                   [&](int a, int c) { return pitch_angles[a] < pitch_angles[c]; });
}

std::uint64_t SensorIntrinsics::digest() const {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(num_beams()));
  for (double v : pitch_angles) w.f64(v);
  for (double v : vertical_offsets) w.f64(v);
  return hash64(w.bytes());
}

SensorIntrinsics SensorIntrinsics::from_json(const nlohmann::json& j) {
  try {
    SensorIntrinsics intr;
    intr.pitch_angles = j.at("lasersTheta").get<std::vector<double>>();
    intr.vertical_offsets = j.at("lasersZ").get<std::vector<double>>();
    if (j.contains("lasersNumPhiPerTurn"))
      intr.phi_per_turn = j.at("lasersNumPhiPerTurn").get<std::vector<int>>();
    if (j.contains("lasersZUnitScale")) intr.offset_unit_scale = j.at("lasersZUnitScale").get<double>();
    const auto n = j.at("numLasers").get<long long>();
    require(n >= 1 && static_cast<std::size_t>(n) == intr.pitch_angles.size(),
            ErrorKind::invalid_argument, "numLasers does not match lasersTheta");
    for (double& z : intr.vertical_offsets) z *= intr.offset_unit_scale;
    intr.validate();
    return intr;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, std::string("intrinsics json: ") + e.what());
  }
}

SensorIntrinsics SensorIntrinsics::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::format, std::string("intrinsics json: ") + e.what());
  }
  return from_json(j);
}

nlohmann::json SensorIntrinsics::to_json() const {
  nlohmann::json j;
  j["numLasers"] = num_beams();
  j["lasersTheta"] = pitch_angles;
  std::vector<double> z = vertical_offsets;
  for (double& v : z) v /= offset_unit_scale;
  j["lasersZ"] = z;
  if (!phi_per_turn.empty()) j["lasersNumPhiPerTurn"] = phi_per_turn;
  if (offset_unit_scale != 1.0) j["lasersZUnitScale"] = offset_unit_scale;
  return j;
}

SensorIntrinsics ford_intrinsics() {
  std::vector<double> theta{
      -0.461611, -0.451281, -0.440090, -0.430000, -0.418945, -0.408667, -0.398230, -0.388220,
      -0.377890, -0.367720, -0.357393, -0.347628, -0.337549, -0.327694, -0.317849, -0.308124,
      -0.298358, -0.289066, -0.279139, -0.269655, -0.260049, -0.250622, -0.241152, -0.231731,
      -0.222362, -0.213039, -0.203702, -0.194415, -0.185154, -0.175909, -0.166688, -0.157484,
      -0.149826, -0.143746, -0.137673, -0.131631, -0.125582, -0.119557, -0.113538, -0.107534,
      -0.101530, -0.095548, -0.089562, -0.083590, -0.077623, -0.071665, -0.065708, -0.059758,
      -0.053810, -0.047868, -0.041931, -0.035993, -0.030061, -0.024124, -0.018193, -0.012259,
      -0.006324, -0.000393, 0.005547,  0.011485,  0.017431,  0.023376,  0.029328,  0.035285};
  std::vector<double> z{
      29.900000, 26.600000, 28.300000, 24.600000, 26.800000, 25.100000, 24.800000, 22.400000,
      22.400000, 21.900000, 23.000000, 20.700000, 21.100000, 20.300000, 19.900000, 19.000000,
      18.900000, 15.300000, 17.300000, 16.000000, 16.200000, 15.100000, 14.800000, 14.400000,
      13.800000, 13.000000, 12.700000, 12.100000, 11.500000, 11.000000, 10.400000, 9.800000,
      10.700000, 10.300000, 10.000000, 9.400000,  9.100000,  8.600000,  8.200000,  7.700000,
      7.400000,  6.800000,  6.500000,  6.000000,  5.600000,  5.100000,  4.700000,  4.300000,
      3.900000,  3.500000,  3.000000,  2.600000,  2.100000,  1.800000,  1.300000,  0.900000,
      0.500000,  -0.100000, -0.400000, -0.900000, -1.200000, -1.700000, -2.100000, -2.500000};
  std::vector<int> phi(64, 4000);
  std::fill(phi.begin(), phi.begin() + 32, 800);
  return make_intrinsics(std::move(theta), std::move(z), std::move(phi));
}

SensorIntrinsics qnx_intrinsics() {
  std::vector<double> theta{-0.268099, -0.230939, -0.194419, -0.158398, -0.122788, -0.087491,
                            -0.052410, -0.017455, 0.017456,  0.052408,  0.087487,  0.122781,
                            0.158381,  0.194378,  0.230865,  0.267953};
  std::vector<double> z{-2.000000, -1.500000, -1.300000, -1.100000, -1.000000, -1.000000,
                        -1.000000, -1.000000, 0.000000,  0.000000,  -0.100000, -0.200000,
                        -0.200000, -0.200000, -0.300000, -0.200000};
  return make_intrinsics(std::move(theta), std::move(z), std::vector<int>(16, 360));
}

SensorIntrinsics synthetic_intrinsics(int beams, double min_pitch, double max_pitch,
                                      double offset) {
  require(beams >= 1, ErrorKind::invalid_argument, "beam count must be positive");
  std::vector<double> theta(static_cast<std::size_t>(beams));
  std::vector<double> z(static_cast<std::size_t>(beams));
  for (int b = 0; b < beams; ++b) {
    const double t = beams == 1 ? 0.0 : static_cast<double>(b) / (beams - 1);
    theta[static_cast<std::size_t>(b)] = min_pitch + t * (max_pitch - min_pitch);
    z[static_cast<std::size_t>(b)] = (b % 2 == 0 ? offset : -offset) * (1.0 - t);
  }
  return make_intrinsics(std::move(theta), std::move(z), {});
}

double wrap_angle(double theta) {
  if (!std::isfinite(theta)) return theta;
  if (theta > -kPi && theta <= kPi) return theta;
  double w = std::remainder(theta, 2.0 * kPi);
  if (w <= -kPi) w += 2.0 * kPi;
  if (w > kPi) w -= 2.0 * kPi;
  return w;
}

Cylindrical to_cylindrical(const Point3& p) {
  require(finite(p), ErrorKind::invalid_point, "non-finite coordinate");
  Cylindrical c;
  c.rho = std::hypot(p.x, p.y);
  c.theta = (p.x == 0.0 && p.y == 0.0) ? 0.0 : wrap_angle(std::atan2(p.y, p.x));
  c.z = p.z;
  return c;
}

Point3 from_cylindrical(const Cylindrical& c) {
  return {c.rho * std::cos(c.theta), c.rho * std::sin(c.theta), c.z};
}

Spherical to_spherical(const Point3& p) {
  require(finite(p), ErrorKind::invalid_point, "non-finite coordinate");
  Spherical s;
  s.r = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
  require(s.r > 0.0, ErrorKind::degenerate_geometry, "spherical conversion of the origin");
  s.theta = (p.x == 0.0 && p.y == 0.0) ? 0.0 : wrap_angle(std::atan2(p.y, p.x));
  s.phi = std::asin(std::clamp(p.z / s.r, -1.0, 1.0));
  return s;
}

Point3 from_spherical(const Spherical& s) {
  const double planar = s.r * std::cos(s.phi);
  return {planar * std::cos(s.theta), planar * std::sin(s.theta), s.r * std::sin(s.phi)};
}

int map_beam(double rho, double z, const SensorIntrinsics& intr) {
  require(std::isfinite(rho) && std::isfinite(z), ErrorKind::invalid_point, "non-finite input");
  require(rho > 0.0, ErrorKind::degenerate_geometry, "pitch undefined at rho = 0");
  int best = 0;
  double best_residual = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < intr.num_beams(); ++b) {
    const double d = std::atan((z - intr.vertical_offsets[b]) / rho) - intr.pitch_angles[b];
    const double residual = d * d;
    if (residual < best_residual) {
      best_residual = residual;
      best = static_cast<int>(b);
    }
  }
  return best + 1;
}

double inverse_beam(double rho, int beam, const SensorIntrinsics& intr) {
  require(beam >= 1 && static_cast<std::size_t>(beam) <= intr.num_beams(), ErrorKind::invalid_beam,
          "beam " + std::to_string(beam) + " outside [1, " + std::to_string(intr.num_beams()) + "]");
  const auto b = static_cast<std::size_t>(beam - 1);
  return rho * std::tan(intr.pitch_angles[b]) + intr.vertical_offsets[b];
}

const char* to_string(CoordMode mode) {
  switch (mode) {
    case CoordMode::cartesian: return "cartesian";
    case CoordMode::spherical: return "spherical";
    case CoordMode::cylbeam: return "cylbeam";
  }
  return "unknown";
}

CoordMode parse_coord_mode(const std::string& name) {
  if (name == "cartesian" || name == "cart") return CoordMode::cartesian;
  if (name == "spherical" || name == "sph") return CoordMode::spherical;
  if (name == "cylbeam") return CoordMode::cylbeam;
  fail(ErrorKind::invalid_argument, "unknown preprocessing mode '" + name + "'");
}

Coords forward_transform(const Point3& p, CoordMode mode, const SensorIntrinsics* intr) {
  switch (mode) {
    case CoordMode::cartesian:
      require(finite(p), ErrorKind::invalid_point, "non-finite coordinate");
      return {p.x, p.y, p.z};
    case CoordMode::spherical: {
      const auto s = to_spherical(p);
      return {s.r, s.theta, s.phi};
    }
    case CoordMode::cylbeam: {
      require(intr != nullptr, ErrorKind::invalid_argument, "cylbeam mode requires intrinsics");
      const auto c = to_cylindrical(p);
      const int beam = map_beam(c.rho, c.z, *intr);
      return {c.rho, c.theta, static_cast<double>(beam)};
    }
  }
  fail(ErrorKind::invalid_argument, "bad mode");
}

Point3 inverse_transform(const Coords& c, CoordMode mode, const SensorIntrinsics* intr) {
  switch (mode) {
    case CoordMode::cartesian:
      return {c[0], c[1], c[2]};
    case CoordMode::spherical:
      return from_spherical({c[0], std::clamp(c[1], -kPi, kPi), std::clamp(c[2], -kPi / 2, kPi / 2)});
    case CoordMode::cylbeam: {
      require(intr != nullptr, ErrorKind::invalid_argument, "cylbeam mode requires intrinsics");
      const double rho = c[0];
      const double theta = std::clamp(c[1], -kPi, kPi);
      const int beam = static_cast<int>(std::lround(c[2]));
      return from_cylindrical({rho, theta, inverse_beam(rho, beam, *intr)});
    }
  }
  fail(ErrorKind::invalid_argument, "bad mode");
}

void QuantizationParams::validate() const {
  require(depth >= 1 && depth <= 21, ErrorKind::invalid_argument, "octree depth must be in [1, 21]");
  for (int a = 0; a < 3; ++a) {
    require(std::isfinite(scale[a]) && scale[a] > 0.0, ErrorKind::invalid_argument,
            "quantization scale must be positive");
    require(std::isfinite(offset[a]), ErrorKind::invalid_argument, "non-finite offset");
  }
}

std::optional<GridPoint> quantize(const Coords& c, const QuantizationParams& q) {
  const double top = static_cast<double>(q.max_coord());
  GridPoint g{};
  for (int a = 0; a < 3; ++a) {
    const double v = (c[a] - q.offset[a]) / q.scale[a];
    if (!std::isfinite(v) || v < -0.5 || v > top + 0.5) return std::nullopt;
    // std::round rounds half away from zero.
    g[a] = static_cast<std::uint32_t>(std::clamp(std::round(v), 0.0, top));
  }
  return g;
}

Coords dequantize(const GridPoint& g, const QuantizationParams& q) {
  return {q.offset[0] + static_cast<double>(g[0]) * q.scale[0],
          q.offset[1] + static_cast<double>(g[1]) * q.scale[1],
          q.offset[2] + static_cast<double>(g[2]) * q.scale[2]};
}

QuantizationParams fit_quantization(std::span<const Coords> coords, int depth, CoordMode mode) {
  QuantizationParams q;
  q.depth = depth;
  q.validate();
  const double top = static_cast<double>(q.max_coord());
  for (int a = 0; a < 3; ++a) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& c : coords) {
      lo = std::min(lo, c[a]);
      hi = std::max(hi, c[a]);
    }
    if (coords.empty()) lo = hi = 0.0;
    q.offset[a] = lo;
    const double extent = hi - lo;
    if (mode == CoordMode::cylbeam && a == 2) {
      q.scale[a] = std::max(1.0, std::ceil(extent / top));
    } else {
      q.scale[a] = extent > 0.0 ? extent / top : 1.0;
    }
  }
  return q;
}

PreprocessResult preprocess(std::span<const Point3> points, CoordMode mode,
                            const SensorIntrinsics* intr, int depth,
                            const std::optional<QuantizationParams>& fixed) {
  if (mode == CoordMode::cylbeam)
    require(intr != nullptr, ErrorKind::invalid_argument, "cylbeam mode requires intrinsics");
  PreprocessResult out;
  std::vector<Coords> coords;
  coords.reserve(points.size());
  for (const auto& p : points) {
    require(finite(p), ErrorKind::invalid_point, "non-finite coordinate in input");
    if (mode != CoordMode::cartesian && p.x == 0.0 && p.y == 0.0 &&
        (mode == CoordMode::cylbeam || p.z == 0.0)) {
      ++out.rejected_degenerate;
      continue;
    }
    coords.push_back(forward_transform(p, mode, intr));
  }
  if (fixed) {
    out.quant = *fixed;
    out.quant.depth = depth;
    out.quant.validate();
  } else {
    out.quant = fit_quantization(coords, depth, mode);
  }
  out.grid.reserve(coords.size());
  for (const auto& c : coords) {
    if (auto g = quantize(c, out.quant)) {
      out.grid.push_back(*g);
    } else {
      ++out.rejected_out_of_volume;
    }
  }
  return out;
}

Point3 postprocess(const GridPoint& g, const QuantizationParams& q, CoordMode mode,
                   const SensorIntrinsics* intr) {
  return inverse_transform(dequantize(g, q), mode, intr);
}

}  // namespace lpcc
