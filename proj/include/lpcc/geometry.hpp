#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace lpcc {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Point3&, const Point3&) = default;
};

struct Cylindrical {
  double rho = 0.0;
  double theta = 0.0;
  double z = 0.0;
};

struct Spherical {
  double r = 0.0;
  double theta = 0.0;  // azimuth
  double phi = 0.0;    // elevation
};

struct CylBeamPoint {
  double rho = 0.0;
  double theta = 0.0;
  int beam = 1;  // 1-based
};

/// Per-laser calibration of a spinning scanner.
///
/// `vertical_offsets` are stored already multiplied by `offset_unit_scale`, so
/// they are in the same unit as point coordinates.
struct SensorIntrinsics {
  std::vector<double> pitch_angles;      // radians, one per beam
  std::vector<double> vertical_offsets;  // point units
  std::vector<int> phi_per_turn;         // optional; carried for fidelity only
  double offset_unit_scale = 1.0;
  /// Beam indices (0-based) ordered by increasing pitch. Identity when the
  /// calibration is already sorted.
  std::vector<int> pitch_order;

  std::size_t num_beams() const { return pitch_angles.size(); }

  /// Throws Error(invalid_argument) on inconsistent lengths or non-finite values,
  /// and fills `pitch_order`.
  void validate();

  std::uint64_t digest() const;

  static SensorIntrinsics from_json(const nlohmann::json& j);
  static SensorIntrinsics load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

/// Ford (Velodyne HDL-64E) calibration as published with the MPEG CTC.
SensorIntrinsics ford_intrinsics();
/// QNX (Velodyne VLP-16) calibration as published with the MPEG CTC.
SensorIntrinsics qnx_intrinsics();
/// Evenly spaced pitches between `min_pitch` and `max_pitch` (radians), small
/// alternating vertical offsets.
SensorIntrinsics synthetic_intrinsics(int beams, double min_pitch, double max_pitch,
                                      double offset = 0.0);

/// Wrap an angle to (-pi, pi].
double wrap_angle(double theta);

Cylindrical to_cylindrical(const Point3& p);
Point3 from_cylindrical(const Cylindrical& c);
Spherical to_spherical(const Point3& p);
Point3 from_spherical(const Spherical& s);

/// Beam whose calibrated pitch best explains (rho, z); ties go to the lower index.
int map_beam(double rho, double z, const SensorIntrinsics& intr);
/// Height on the calibrated ray of `beam` (1-based) at planar distance rho.
double inverse_beam(double rho, int beam, const SensorIntrinsics& intr);

enum class CoordMode : std::uint8_t { cartesian = 0, spherical = 1, cylbeam = 2 };

const char* to_string(CoordMode mode);
CoordMode parse_coord_mode(const std::string& name);

using Coords = std::array<double, 3>;
using GridPoint = std::array<std::uint32_t, 3>;

/// Forward preprocessing: Cartesian -> (x,y,z) | (r,theta,phi) | (rho,theta,beam).
Coords forward_transform(const Point3& p, CoordMode mode, const SensorIntrinsics* intr);
/// Inverse preprocessing; the beam channel is rounded to the nearest index.
Point3 inverse_transform(const Coords& c, CoordMode mode, const SensorIntrinsics* intr);

struct QuantizationParams {
  int depth = 16;
  std::array<double, 3> scale{1.0, 1.0, 1.0};
  std::array<double, 3> offset{0.0, 0.0, 0.0};

  std::uint32_t max_coord() const { return (depth >= 32) ? 0xFFFFFFFFu : ((1u << depth) - 1u); }
  void validate() const;
};

/// Grid coordinate for `c`, or nullopt when the point lies outside the
/// configured volume (more than half a cell beyond either end of an axis).
std::optional<GridPoint> quantize(const Coords& c, const QuantizationParams& q);
/// Cell center of a grid coordinate.
Coords dequantize(const GridPoint& g, const QuantizationParams& q);

/// Per-frame bounds: each axis spans [min, max] mapped onto [0, 2^L - 1]. The
/// beam axis of cylbeam keeps an integer step so beams stay distinct.
QuantizationParams fit_quantization(std::span<const Coords> coords, int depth, CoordMode mode);

struct PreprocessResult {
  std::vector<GridPoint> grid;       // one per accepted input point (not deduplicated)
  QuantizationParams quant;
  std::size_t rejected_degenerate = 0;  // origin points in non-Cartesian modes
  std::size_t rejected_out_of_volume = 0;
};

/// Full encoder-side chain. With `fixed` params, out-of-volume points are
/// counted; otherwise bounds are fit to the frame.
PreprocessResult preprocess(std::span<const Point3> points, CoordMode mode,
                            const SensorIntrinsics* intr, int depth,
                            const std::optional<QuantizationParams>& fixed = std::nullopt);

/// Decoder-side chain for a single grid point.
Point3 postprocess(const GridPoint& g, const QuantizationParams& q, CoordMode mode,
                   const SensorIntrinsics* intr);

}  // namespace lpcc
