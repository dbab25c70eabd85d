#include "lpcc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "lpcc/error.hpp"

namespace lpcc {

namespace {

double sq_dist(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

double coord(const Point3& p, int a) { return a == 0 ? p.x : (a == 1 ? p.y : p.z); }

D1Result finish(double sum_ab, std::size_t n_ab, double sum_ba, std::size_t n_ba, double peak) {
  D1Result r;
  r.mse_ab = sum_ab / static_cast<double>(n_ab);
  r.mse_ba = sum_ba / static_cast<double>(n_ba);
  r.mse = std::max(r.mse_ab, r.mse_ba);
  r.psnr = r.mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(3.0 * peak * peak / r.mse);
  return r;
}

}  // namespace

NearestNeighbor::NearestNeighbor(std::span<const Point3> reference) : points_(reference.begin(), reference.end()) {
  require(!points_.empty(), ErrorKind::invalid_argument, "nearest-neighbor index over an empty cloud");
  const std::size_t n = points_.size();
  if (n < 64) {
    brute_ = true;
    return;
  }
  double hi[3];
  for (int a = 0; a < 3; ++a) {
    lo_[a] = std::numeric_limits<double>::infinity();
    hi[a] = -lo_[a];
  }
  for (const auto& p : points_)
    for (int a = 0; a < 3; ++a) {
      lo_[a] = std::min(lo_[a], coord(p, a));
      hi[a] = std::max(hi[a], coord(p, a));
    }
  double ext[3];
  double max_ext = 0.0;
  for (int a = 0; a < 3; ++a) {
    ext[a] = hi[a] - lo_[a];
    max_ext = std::max(max_ext, ext[a]);
  }
  if (max_ext == 0.0) {
    cell_ = 1.0;
  } else {
    // Cell size giving roughly two points per occupied-volume cell.
    const double target = std::max(1.0, static_cast<double>(n) / 2.0);
    double lo_c = max_ext * 1e-9;
    double hi_c = max_ext;
    for (int it = 0; it < 80; ++it) {
      const double mid = std::sqrt(lo_c * hi_c);
      double cells = 1.0;
      for (double e : ext) cells *= std::max(1.0, e / mid);
      (cells > target ? lo_c : hi_c) = mid;
    }
    cell_ = hi_c;
  }
  for (int a = 0; a < 3; ++a) dims_[a] = std::max<long>(1, static_cast<long>(std::floor(ext[a] / cell_)) + 1);
  const auto total = static_cast<std::size_t>(dims_[0] * dims_[1] * dims_[2]);
  std::vector<std::uint32_t> ids(n);
  cell_start_.assign(total + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = points_[i];
    const long c = (cell_of(p.x, 0) * dims_[1] + cell_of(p.y, 1)) * dims_[2] + cell_of(p.z, 2);
    ids[i] = static_cast<std::uint32_t>(c);
    ++cell_start_[static_cast<std::size_t>(c) + 1];
  }
  for (std::size_t c = 0; c < total; ++c) cell_start_[c + 1] += cell_start_[c];
  cell_items_.resize(n);
  std::vector<std::uint32_t> fill(cell_start_.begin(), cell_start_.end() - 1);
  for (std::size_t i = 0; i < n; ++i) cell_items_[fill[ids[i]]++] = static_cast<std::uint32_t>(i);
}

long NearestNeighbor::cell_of(double v, int axis) const {
  const double f = std::floor((v - lo_[axis]) / cell_);
  if (!(f > 0.0)) return 0;
  return std::min<long>(dims_[axis] - 1, static_cast<long>(f));
}

double NearestNeighbor::nearest_sq(const Point3& q) const {
  double best = std::numeric_limits<double>::infinity();
  if (brute_) {
    for (const auto& p : points_) best = std::min(best, sq_dist(p, q));
    return best;
  }
  const long c[3] = {cell_of(q.x, 0), cell_of(q.y, 1), cell_of(q.z, 2)};
  for (long r = 0;; ++r) {
    long lo[3], hi[3];
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::max<long>(0, c[a] - r);
      hi[a] = std::min<long>(dims_[a] - 1, c[a] + r);
    }
    for (long x = lo[0]; x <= hi[0]; ++x)
      for (long y = lo[1]; y <= hi[1]; ++y)
        for (long z = lo[2]; z <= hi[2]; ++z) {
          const long ring = std::max({std::abs(x - c[0]), std::abs(y - c[1]), std::abs(z - c[2])});
          if (ring != r) continue;
          const auto cell = static_cast<std::size_t>((x * dims_[1] + y) * dims_[2] + z);
          for (auto k = cell_start_[cell]; k < cell_start_[cell + 1]; ++k)
            best = std::min(best, sq_dist(points_[cell_items_[k]], q));
        }
    // Anything not yet visited lies outside the searched box.
    double bound = std::numeric_limits<double>::infinity();
    bool covered = true;
    for (int a = 0; a < 3; ++a) {
      const double qa = coord(q, a);
      if (lo[a] > 0) {
        covered = false;
        bound = std::min(bound, qa - (lo_[a] + static_cast<double>(lo[a]) * cell_));
      }
      if (hi[a] < dims_[a] - 1) {
        covered = false;
        bound = std::min(bound, lo_[a] + static_cast<double>(hi[a] + 1) * cell_ - qa);
      }
    }
    if (covered) return best;
    bound = std::max(0.0, bound);
    if (best <= bound * bound) return best;
  }
}

D1Result d1_psnr(std::span<const Point3> original, std::span<const Point3> reconstructed, double peak) {
  require(!original.empty() && !reconstructed.empty(), ErrorKind::invalid_argument, "D1 PSNR of an empty cloud");
  require(peak > 0.0, ErrorKind::invalid_argument, "PSNR peak must be positive");
  const NearestNeighbor to_rec(reconstructed);
  const NearestNeighbor to_orig(original);
  double sum_ab = 0.0;
  for (const auto& p : original) sum_ab += to_rec.nearest_sq(p);
  double sum_ba = 0.0;
  for (const auto& p : reconstructed) sum_ba += to_orig.nearest_sq(p);
  return finish(sum_ab, original.size(), sum_ba, reconstructed.size(), peak);
}

D1Result d1_psnr_brute(std::span<const Point3> original, std::span<const Point3> reconstructed, double peak) {
  require(!original.empty() && !reconstructed.empty(), ErrorKind::invalid_argument, "D1 PSNR of an empty cloud");
  auto directed = [](std::span<const Point3> from, std::span<const Point3> to) {
    double sum = 0.0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, sq_dist(p, q));
      sum += best;
    }
    return sum;
  };
  return finish(directed(original, reconstructed), original.size(), directed(reconstructed, original),
                reconstructed.size(), peak);
}

double report_psnr(double psnr) { return std::isfinite(psnr) ? psnr : kPsnrSentinel; }

namespace {

Eigen::Vector4d fit_cubic(std::span<const RDPoint> c) {
  Eigen::MatrixXd a(static_cast<Eigen::Index>(c.size()), 4);
  Eigen::VectorXd y(static_cast<Eigen::Index>(c.size()));
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double x = c[i].psnr;
    const auto r = static_cast<Eigen::Index>(i);
    a(r, 0) = 1.0;
    a(r, 1) = x;
    a(r, 2) = x * x;
    a(r, 3) = x * x * x;
    y(r) = std::log10(c[i].bpp);
  }
  return a.colPivHouseholderQr().solve(y);
}

double integral(const Eigen::Vector4d& p, double lo, double hi) {
  auto prim = [&](double x) { return p(0) * x + p(1) * x * x / 2 + p(2) * x * x * x / 3 + p(3) * x * x * x * x / 4; };
  return prim(hi) - prim(lo);
}

void check_curve(std::span<const RDPoint> c) {
  require(c.size() >= 4, ErrorKind::invalid_argument, "BD-BR needs at least 4 points per curve");
  for (const auto& p : c)
    require(p.bpp > 0.0 && std::isfinite(p.bpp) && std::isfinite(p.psnr), ErrorKind::invalid_argument,
            "BD-BR needs positive rates and finite PSNR");
}

}  // namespace

double bd_br(std::span<const RDPoint> a, std::span<const RDPoint> b) {
  check_curve(a);
  check_curve(b);
  auto range = [](std::span<const RDPoint> c) {
    const auto [mn, mx] = std::minmax_element(c.begin(), c.end(), [](auto& x, auto& y) { return x.psnr < y.psnr; });
    return std::pair{mn->psnr, mx->psnr};
  };
  const auto [a_lo, a_hi] = range(a);
  const auto [b_lo, b_hi] = range(b);
  const double lo = std::max(a_lo, b_lo);
  const double hi = std::min(a_hi, b_hi);
  require(hi > lo, ErrorKind::invalid_argument, "BD-BR undefined: quality ranges do not overlap");
  const auto pa = fit_cubic(a);
  const auto pb = fit_cubic(b);
  const double avg = (integral(pb, lo, hi) - integral(pa, lo, hi)) / (hi - lo);
  return (std::pow(10.0, avg) - 1.0) * 100.0;
}

}  // namespace lpcc
