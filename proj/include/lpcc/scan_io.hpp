#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lpcc/geometry.hpp"

namespace lpcc {

enum class ScanFormat { automatic, kitti_bin, ply };

ScanFormat parse_scan_format(const std::string& name);

/// KITTI velodyne .bin (x, y, z, intensity as little-endian float32; the
/// intensity is dropped) or PLY (ascii / binary_little_endian) with x, y, z
/// vertex properties. `automatic` picks by extension.
std::vector<Point3> load_scan(const std::filesystem::path& path, ScanFormat format = ScanFormat::automatic);

void save_kitti_bin(const std::filesystem::path& path, const std::vector<Point3>& points);
/// Writes x, y, z as double properties.
void save_ply(const std::filesystem::path& path, const std::vector<Point3>& points, bool binary = true);

}  // namespace lpcc
