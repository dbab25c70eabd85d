#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "lpcc/error.hpp"
#include "lpcc/geometry.hpp"

using namespace lpcc;

namespace {

// Exhaustive argmin written independently of map_beam; ties keep the first beam.
int brute_beam(double rho, double z, const SensorIntrinsics& intr) {
  int best = 1;
  double best_r = std::numeric_limits<double>::infinity();
  for (std::size_t b = 1; b <= intr.num_beams(); ++b) {
    const double e = std::atan((z - intr.vertical_offsets[b - 1]) / rho) - intr.pitch_angles[b - 1];
    if (e * e < best_r) {
      best_r = e * e;
      best = static_cast<int>(b);
    }
  }
  return best;
}

}  // namespace

TEST_CASE("cylindrical conversion of a 3-4-5 triangle") {
  const auto c = to_cylindrical({3.0, 4.0, 0.0});
  CHECK(c.rho == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(c.theta == std::atan2(4.0, 3.0));
  CHECK(c.z == 0.0);
  const auto p = from_cylindrical(c);
  CHECK(p.x == doctest::Approx(3.0));
  CHECK(p.y == doctest::Approx(4.0));
}

TEST_CASE("origin has theta 0 in cylindrical form and is degenerate in spherical form") {
  CHECK(to_cylindrical({0, 0, 2}).theta == 0.0);
  CHECK_THROWS_AS(to_spherical({0, 0, 0}), Error);
  CHECK_THROWS_AS(to_cylindrical({NAN, 0, 0}), Error);
}

TEST_CASE("wrap_angle maps into (-pi, pi]") {
  const double pi = std::numbers::pi;
  CHECK(wrap_angle(pi) == pi);
  CHECK(wrap_angle(-pi) == doctest::Approx(pi));
  CHECK(wrap_angle(3 * pi) == doctest::Approx(pi));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int i = 0; i < 1000; ++i) {
    const double w = wrap_angle(u(rng));
    CHECK(w > -pi);
    CHECK(w <= pi);
  }
}

TEST_CASE("spherical round trip") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-100, 100);
  for (int i = 0; i < 500; ++i) {
    const Point3 p{u(rng), u(rng), u(rng)};
    const auto q = from_spherical(to_spherical(p));
    CHECK(q.x == doctest::Approx(p.x).epsilon(1e-12));
    CHECK(q.y == doctest::Approx(p.y).epsilon(1e-12));
    CHECK(q.z == doctest::Approx(p.z).epsilon(1e-12));
  }
}

TEST_CASE("a point on a calibrated ray maps to that beam") {
  const auto ford = ford_intrinsics();
  for (int b = 1; b <= 64; ++b) {
    const double z = inverse_beam(37.0, b, ford);
    CHECK(map_beam(37.0, z, ford) == b);
  }
  CHECK(inverse_beam(100.0, 1, ford) == doctest::Approx(100.0 * std::tan(-0.461611) + 29.9));
}

TEST_CASE("map_beam agrees with exhaustive search and rejects rho = 0") {
  for (const auto& intr : {ford_intrinsics(), qnx_intrinsics()}) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> rho(0.5, 120.0);
    std::uniform_real_distribution<double> z(-40.0, 40.0);
    for (int i = 0; i < 20000; ++i) {
      const double r = rho(rng), zz = z(rng);
      CHECK(map_beam(r, zz, intr) == brute_beam(r, zz, intr));
    }
    CHECK_THROWS_AS(map_beam(0.0, 1.0, intr), Error);
  }
  CHECK_THROWS_AS(inverse_beam(1.0, 0, qnx_intrinsics()), Error);
  CHECK_THROWS_AS(inverse_beam(1.0, 17, qnx_intrinsics()), Error);
}

TEST_CASE("map_beam breaks exact ties toward the lower beam") {
  SensorIntrinsics intr;
  intr.pitch_angles = {-0.1, 0.1};
  intr.vertical_offsets = {0.0, 0.0};
  intr.validate();
  CHECK(map_beam(10.0, 0.0, intr) == 1);
}

TEST_CASE("intrinsics JSON round trip and validation") {
  const auto ford = ford_intrinsics();
  const auto back = SensorIntrinsics::from_json(ford.to_json());
  CHECK(back.pitch_angles == ford.pitch_angles);
  CHECK(back.vertical_offsets == ford.vertical_offsets);
  CHECK(back.digest() == ford.digest());
  CHECK(ford.num_beams() == 64);
  CHECK(qnx_intrinsics().num_beams() == 16);

  auto j = ford.to_json();
  j["numLasers"] = 63;
  CHECK_THROWS_AS(SensorIntrinsics::from_json(j), Error);
  j = ford.to_json();
  j.erase("lasersZ");
  CHECK_THROWS_AS(SensorIntrinsics::from_json(j), Error);
  j = qnx_intrinsics().to_json();
  j["lasersZUnitScale"] = 10.0;
  j["somethingElse"] = "ignored";
  const auto scaled = SensorIntrinsics::from_json(j);
  CHECK(scaled.vertical_offsets[0] == doctest::Approx(-20.0));
}

TEST_CASE("unsorted pitches record a sorting permutation") {
  SensorIntrinsics intr;
  intr.pitch_angles = {0.1, -0.2, 0.0};
  intr.vertical_offsets = {0, 0, 0};
  intr.validate();
  CHECK(intr.pitch_order == std::vector<int>{1, 2, 0});
}

TEST_CASE("quantization rounds to the nearest cell and rejects points outside the volume") {
  QuantizationParams q;
  q.depth = 4;
  q.scale = {1.0, 1.0, 1.0};
  q.offset = {0.0, 0.0, 0.0};
  CHECK(quantize({0.49, 1.5, 15.0}, q) == GridPoint{0, 2, 15});
  CHECK(quantize({15.5, 0, 0}, q) == GridPoint{15, 0, 0});
  CHECK_FALSE(quantize({15.51, 0, 0}, q).has_value());
  CHECK_FALSE(quantize({-0.51, 0, 0}, q).has_value());
  const auto c = dequantize({3, 4, 5}, q);
  CHECK(c == Coords{3.0, 4.0, 5.0});
}

TEST_CASE("requantizing dequantized cells is the identity") {
  std::mt19937_64 rng(9);
  for (auto mode : {CoordMode::cartesian, CoordMode::spherical}) {
    std::uniform_real_distribution<double> u(-30, 30);
    std::vector<Point3> pts;
    for (int i = 0; i < 400; ++i) pts.push_back({u(rng), u(rng), u(rng)});
    const auto pre = preprocess(pts, mode, nullptr, 12);
    for (const auto& g : pre.grid) CHECK(quantize(dequantize(g, pre.quant), pre.quant) == g);
  }
}

TEST_CASE("preprocess error bound in Cartesian mode is half a cell") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-50, 50);
  std::vector<Point3> pts;
  for (int i = 0; i < 1000; ++i) pts.push_back({u(rng), u(rng), u(rng)});
  const auto pre = preprocess(pts, CoordMode::cartesian, nullptr, 10);
  REQUIRE(pre.grid.size() == pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto p = postprocess(pre.grid[i], pre.quant, CoordMode::cartesian, nullptr);
    CHECK(std::abs(p.x - pts[i].x) <= pre.quant.scale[0] / 2 * (1 + 1e-9));
    CHECK(std::abs(p.y - pts[i].y) <= pre.quant.scale[1] / 2 * (1 + 1e-9));
    CHECK(std::abs(p.z - pts[i].z) <= pre.quant.scale[2] / 2 * (1 + 1e-9));
  }
}

TEST_CASE("cylbeam keeps integer beam cells and rejects origin points") {
  const auto qnx = qnx_intrinsics();
  std::vector<Point3> pts{{0, 0, 1}, {10, 0, 0}, {0, 12, 1}, {-5, -5, -1}};
  const auto pre = preprocess(pts, CoordMode::cylbeam, &qnx, 12);
  CHECK(pre.rejected_degenerate == 1);
  CHECK(pre.grid.size() == 3);
  CHECK(pre.quant.scale[2] == 1.0);
  for (const auto& g : pre.grid) {
    const auto c = dequantize(g, pre.quant);
    CHECK(c[2] == std::round(c[2]));
  }
  CHECK_THROWS_AS(preprocess(pts, CoordMode::cylbeam, nullptr, 12), Error);
}

TEST_CASE("fixed quantization counts out-of-volume points") {
  QuantizationParams q;
  q.depth = 3;
  std::vector<Point3> pts{{1, 1, 1}, {100, 1, 1}};
  const auto pre = preprocess(pts, CoordMode::cartesian, nullptr, 3, q);
  CHECK(pre.grid.size() == 1);
  CHECK(pre.rejected_out_of_volume == 1);
}

TEST_CASE("theta and theta + 2 pi quantize alike after wrapping") {
  const auto a = to_cylindrical(from_cylindrical({7.0, 1.0, 0.0}));
  const auto b = to_cylindrical(from_cylindrical({7.0, 1.0 + 2 * std::numbers::pi, 0.0}));
  CHECK(a.theta == doctest::Approx(b.theta).epsilon(1e-12));
}

TEST_CASE("coordinate mode names") {
  CHECK(parse_coord_mode("cylbeam") == CoordMode::cylbeam);
  CHECK(parse_coord_mode("spherical") == CoordMode::spherical);
  CHECK(parse_coord_mode("cartesian") == CoordMode::cartesian);
  CHECK_THROWS_AS(parse_coord_mode("polar"), Error);
}
