#pragma once

#include <cstdint>
#include <vector>

#include "lpcc/geometry.hpp"

namespace lpcc {

/// Ray-cast street-like scene: ground plane, boxes, poles and a distant wall.
/// Geometry is described in meters; `unit` converts to sensor units.
struct SceneConfig {
  double unit = 1.0;  // sensor units per meter
  int azimuth_steps = 1024;
  double sensor_height = 1.73;
  double max_range = 80.0;
  int boxes = 14;
  int poles = 12;
  double range_noise = 0.01;  // meters, along the ray
  double azimuth_jitter = 0.2;  // fraction of one azimuth step
  double dropout = 0.03;
  bool wall = true;
};

/// One spinning-LiDAR sweep with one ray per (beam, azimuth step). Returned
/// points lie on the calibrated rays of `intr`.
std::vector<Point3> synthetic_scan(const SensorIntrinsics& intr, const SceneConfig& scene, std::uint64_t seed);

/// Uniform random points in [-extent, extent]^3 (origin excluded).
std::vector<Point3> random_cloud(std::size_t n, double extent, std::uint64_t seed);

}  // namespace lpcc
