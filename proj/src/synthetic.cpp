#include "lpcc/synthetic.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "lpcc/error.hpp"

namespace lpcc {

namespace {

struct Box {
  double lo[3];
  double hi[3];
};

struct Pole {
  double x, y, r, top;
};

// Slab test; returns the entry distance or +inf.
double hit_box(const Box& b, const double o[3], const double d[3]) {
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-12) {
      if (o[a] < b.lo[a] || o[a] > b.hi[a]) return std::numeric_limits<double>::infinity();
      continue;
    }
    double ta = (b.lo[a] - o[a]) / d[a];
    double tb = (b.hi[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::numeric_limits<double>::infinity();
  }
  return t0 > 0.0 ? t0 : std::numeric_limits<double>::infinity();
}

// Vertical cylinder centered at (cx, cy) with radius r, from the ground up to
// `top`; `inside` selects the far intersection (used for the enclosing wall).
double hit_cylinder(double cx, double cy, double r, double bottom, double top, const double o[3],
                    const double d[3], bool inside) {
  const double ox = o[0] - cx;
  const double oy = o[1] - cy;
  const double a = d[0] * d[0] + d[1] * d[1];
  if (a < 1e-12) return std::numeric_limits<double>::infinity();
  const double b = 2.0 * (ox * d[0] + oy * d[1]);
  const double c = ox * ox + oy * oy - r * r;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return std::numeric_limits<double>::infinity();
  const double s = std::sqrt(disc);
  const double t = inside ? (-b + s) / (2.0 * a) : (-b - s) / (2.0 * a);
  if (t <= 0.0) return std::numeric_limits<double>::infinity();
  const double z = o[2] + t * d[2];
  if (z < bottom || z > top) return std::numeric_limits<double>::infinity();
  return t;
}

}  // namespace

std::vector<Point3> synthetic_scan(const SensorIntrinsics& intr, const SceneConfig& scene, std::uint64_t seed) {
  require(intr.num_beams() >= 1 && scene.azimuth_steps >= 1 && scene.unit > 0.0, ErrorKind::invalid_argument,
          "invalid synthetic scene configuration");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double ground = -scene.sensor_height;

  std::vector<Box> boxes;
  for (int i = 0; i < scene.boxes; ++i) {
    const double dist = 5.0 + uni(rng) * (scene.max_range * 0.5 - 5.0);
    const double ang = uni(rng) * 2.0 * std::numbers::pi;
    const double sx = 1.0 + uni(rng) * 4.0;
    const double sy = 1.0 + uni(rng) * 4.0;
    const double h = 1.0 + uni(rng) * 2.5;
    const double cx = dist * std::cos(ang);
    const double cy = dist * std::sin(ang);
    boxes.push_back({{cx - sx / 2, cy - sy / 2, ground}, {cx + sx / 2, cy + sy / 2, ground + h}});
  }
  std::vector<Pole> poles;
  for (int i = 0; i < scene.poles; ++i) {
    const double dist = 3.0 + uni(rng) * (scene.max_range * 0.4 - 3.0);
    const double ang = uni(rng) * 2.0 * std::numbers::pi;
    poles.push_back({dist * std::cos(ang), dist * std::sin(ang), 0.1 + uni(rng) * 0.3, ground + 3.0 + uni(rng) * 5.0});
  }
  const double wall_radius = scene.max_range * 0.85;

  std::vector<Point3> out;
  out.reserve(intr.num_beams() * static_cast<std::size_t>(scene.azimuth_steps));
  const double step = 2.0 * std::numbers::pi / scene.azimuth_steps;
  for (std::size_t b = 0; b < intr.num_beams(); ++b) {
    const double pitch = intr.pitch_angles[b];
    const double oz = intr.vertical_offsets[b] / scene.unit;
    for (int k = 0; k < scene.azimuth_steps; ++k) {
      if (uni(rng) < scene.dropout) continue;
      const double theta = -std::numbers::pi + (k + 0.5) * step + (uni(rng) - 0.5) * scene.azimuth_jitter * step;
      const double o[3] = {0.0, 0.0, oz};
      const double d[3] = {std::cos(pitch) * std::cos(theta), std::cos(pitch) * std::sin(theta), std::sin(pitch)};
      double t = std::numeric_limits<double>::infinity();
      if (d[2] < 0.0) t = (ground - oz) / d[2];
      for (const auto& bx : boxes) t = std::min(t, hit_box(bx, o, d));
      for (const auto& p : poles) t = std::min(t, hit_cylinder(p.x, p.y, p.r, ground, p.top, o, d, false));
      if (scene.wall) t = std::min(t, hit_cylinder(0.0, 0.0, wall_radius, ground, ground + 12.0, o, d, true));
      if (!(t < scene.max_range)) continue;
      t += gauss(rng) * scene.range_noise;
      if (t <= 0.5) continue;
      out.push_back({(o[0] + t * d[0]) * scene.unit, (o[1] + t * d[1]) * scene.unit, (o[2] + t * d[2]) * scene.unit});
    }
  }
  return out;
}

std::vector<Point3> random_cloud(std::size_t n, double extent, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-extent, extent);
  std::vector<Point3> out;
  out.reserve(n);
  while (out.size() < n) {
    Point3 p{uni(rng), uni(rng), uni(rng)};
    if (p.x == 0.0 && p.y == 0.0) continue;
    out.push_back(p);
  }
  return out;
}

}  // namespace lpcc
