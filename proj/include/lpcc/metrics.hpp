#pragma once

#include <span>
#include <vector>

#include "lpcc/geometry.hpp"

namespace lpcc {

inline constexpr double kPeakKitti = 59.70;
inline constexpr double kPeakMillimeter = 30000.0;
/// Stand-in for an infinite PSNR in reports.
inline constexpr double kPsnrSentinel = 999.0;

/// Exact nearest-neighbor index over a fixed reference cloud, bucketed on a
/// uniform grid.
class NearestNeighbor {
 public:
  explicit NearestNeighbor(std::span<const Point3> reference);
  /// Squared distance to the closest reference point.
  double nearest_sq(const Point3& q) const;

 private:
  std::vector<Point3> points_;
  double lo_[3]{};
  double cell_ = 1.0;
  long dims_[3]{1, 1, 1};
  std::vector<std::uint32_t> cell_start_;  // CSR layout over cells
  std::vector<std::uint32_t> cell_items_;
  bool brute_ = false;

  long cell_of(double v, int axis) const;
};

struct D1Result {
  double mse_ab = 0.0;  // original -> reconstructed
  double mse_ba = 0.0;
  double mse = 0.0;     // max of the two
  double psnr = 0.0;    // +inf when mse == 0
};

/// Symmetric point-to-point error; PSNR = 10 log10(3 peak^2 / mse).
D1Result d1_psnr(std::span<const Point3> original, std::span<const Point3> reconstructed, double peak);
/// Same, with O(n^2) search. Test oracle.
D1Result d1_psnr_brute(std::span<const Point3> original, std::span<const Point3> reconstructed, double peak);

double report_psnr(double psnr);

struct RDPoint {
  double bpp = 0.0;
  double psnr = 0.0;
};

/// Average bitrate difference (percent) of curve b against curve a at equal
/// quality: cubic fit of log10(rate) over PSNR, integrated over the shared
/// PSNR interval. Negative means b needs fewer bits.
double bd_br(std::span<const RDPoint> a, std::span<const RDPoint> b);

}  // namespace lpcc
