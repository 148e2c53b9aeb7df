#include <cmath>
#include <map>
#include <utility>

#include "doctest.h"
#include "test_util.hpp"
#include "xmreg/errors.hpp"
#include "xmreg/geometry.hpp"
#include "xmreg/rng.hpp"

using namespace xmreg;

namespace {

CameraIntrinsics test_k() { return {100.0, 100.0, 320.0, 240.0, 640, 480}; }

PointCloud4D cloud_from_pixels(SplitMix64& rng, const CameraIntrinsics& k, int n) {
  PointCloud4D cloud;
  for (int i = 0; i < n; ++i) {
    const double u = static_cast<double>(rng.uniform_int(k.width));
    const double v = static_cast<double>(rng.uniform_int(k.height));
    const double d = rng.uniform(1.0, 20.0);
    const Eigen::Vector3d p = back_project(u, v, d, k);
    cloud.points.push_back({p.x(), p.y(), p.z(), rng.uniform()});
  }
  return cloud;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("project places a point on the principal axis at the principal point") {
  PointCloud4D cloud;
  cloud.points.push_back({0.0, 0.0, 5.0, 0.7});
  const Projection pr = project(cloud, RigidTransform::identity(), test_k());
  REQUIRE(pr.intensity.validity(240, 320));
  CHECK(pr.depth.depths(240, 320) == doctest::Approx(5.0));
  CHECK(pr.intensity.pixels(240, 320) == doctest::Approx(0.7));
  // no other pixel is valid
  CHECK(pr.intensity.validity.count() == 1);
}

TEST_CASE("z-buffer keeps the nearer of two points sharing a pixel") {
  PointCloud4D cloud;
  cloud.points.push_back({0.0, 0.0, 9.0, 0.9});
  cloud.points.push_back({0.0, 0.0, 4.0, 0.3});
  const Projection pr = project(cloud, RigidTransform::identity(), test_k());
  CHECK(pr.depth.depths(240, 320) == doctest::Approx(4.0));
  CHECK(pr.intensity.pixels(240, 320) == doctest::Approx(0.3));
}

TEST_CASE("project then back_project recovers kept points within 1e-6 m") {
  SplitMix64 rng(11);
  const CameraIntrinsics k = test_k();
  const PointCloud4D cloud = cloud_from_pixels(rng, k, 1000);

  // map each pixel to the minimum-depth source point landing there
  std::map<std::pair<long, long>, Eigen::Vector3d> expected;
  for (const auto& p : cloud.points) {
    const long u = std::lround(k.fx * p.x / p.z + k.cx);
    const long v = std::lround(k.fy * p.y / p.z + k.cy);
    auto it = expected.find({v, u});
    if (it == expected.end() || p.z < it->second.z()) expected[{v, u}] = p.position();
  }

  const Projection pr = project(cloud, RigidTransform::identity(), k);
  int checked = 0;
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      if (!pr.depth.validity(v, u)) continue;
      const Eigen::Vector3d rec = back_project(u, v, pr.depth.depths(v, u), k);
      REQUIRE(expected.count({v, u}) == 1);
      CHECK((rec - expected.at({v, u})).norm() < 1e-6);
      ++checked;
    }
  }
  CHECK(checked > 500);
}

TEST_CASE("z-buffer equals the brute-force minimum-depth oracle") {
  SplitMix64 rng(23);
  const CameraIntrinsics k{50.0, 60.0, 40.0, 30.0, 80, 60};
  for (int trial = 0; trial < 20; ++trial) {
    PointCloud4D cloud;
    for (int i = 0; i < 500; ++i) {
      cloud.points.push_back({rng.uniform(-10, 10), rng.uniform(-8, 8),
                              rng.uniform(0.5, 25.0), rng.uniform()});
    }
    const Projection pr = project(cloud, RigidTransform::identity(), k);
    Grid oracle = Grid::Zero(k.height, k.width);
    Mask hit = Mask::Constant(k.height, k.width, false);
    for (const auto& p : cloud.points) {
      if (p.z <= 0) continue;
      const long u = std::lround(k.fx * p.x / p.z + k.cx);
      const long v = std::lround(k.fy * p.y / p.z + k.cy);
      if (u < 0 || u >= k.width || v < 0 || v >= k.height) continue;
      if (!hit(v, u) || p.z < oracle(v, u)) {
        oracle(v, u) = p.z;
        hit(v, u) = true;
      }
    }
    for (int v = 0; v < k.height; ++v) {
      for (int u = 0; u < k.width; ++u) {
        REQUIRE(pr.depth.validity(v, u) == hit(v, u));
        if (hit(v, u)) REQUIRE(pr.depth.depths(v, u) == doctest::Approx(oracle(v, u)));
      }
    }
  }
}

TEST_CASE("project throws EmptyProjection when nothing lands in the image") {
  PointCloud4D cloud;
  cloud.points.push_back({0.0, 0.0, -5.0, 0.5});  // behind the camera
  CHECK_THROWS_AS(project(cloud, RigidTransform::identity(), test_k()), EmptyProjection);
}

TEST_CASE("back_project on the optical axis and the unit tangent") {
  const CameraIntrinsics k = test_k();
  for (double d : {0.5, 1.0, 7.25}) {
    const Eigen::Vector3d p = back_project(k.cx, k.cy, d, k);
    CHECK(p.x() == doctest::Approx(0.0));
    CHECK(p.y() == doctest::Approx(0.0));
    CHECK(p.z() == doctest::Approx(d));
  }
  const Eigen::Vector3d q = back_project(k.cx + k.fx, k.cy, 2.0, k);
  CHECK(q.x() == doctest::Approx(2.0));
  CHECK(q.y() == doctest::Approx(0.0));
  CHECK(q.z() == doctest::Approx(2.0));
}

TEST_CASE("back_project rejects non-positive depth") {
  CHECK_THROWS_AS(back_project(10, 10, 0.0, test_k()), NonPositiveDepth);
  CHECK_THROWS_AS(back_project(10, 10, -1.0, test_k()), NonPositiveDepth);
}

TEST_CASE("round trip on 500 random frustum points is identity within 1e-6 m") {
  SplitMix64 rng(99);
  const CameraIntrinsics k = test_k();
  for (int i = 0; i < 500; ++i) {
    const double u = static_cast<double>(rng.uniform_int(k.width));
    const double v = static_cast<double>(rng.uniform_int(k.height));
    const double d = rng.uniform(0.1, 50.0);
    const Eigen::Vector3d p = back_project(u, v, d, k);
    const double ru = k.fx * p.x() / p.z() + k.cx;
    const double rv = k.fy * p.y() / p.z() + k.cy;
    CHECK(std::abs(ru - u) < 1e-9);
    CHECK(std::abs(rv - v) < 1e-9);
    CHECK(std::abs(p.z() - d) < 1e-9);
  }
}

TEST_CASE("fill_depth_nearest is a no-op on a fully valid map") {
  DepthMap d;
  d.depths = Grid::Constant(6, 6, 2.5);
  d.validity = Mask::Constant(6, 6, true);
  const DepthMap out = fill_depth_nearest(d, 8);
  CHECK((out.depths == d.depths).all());
  CHECK((out.validity == d.validity).all());
}

TEST_CASE("fill_depth_nearest fills from the unique nearest neighbor") {
  DepthMap d;
  d.depths = Grid::Zero(3, 3);
  d.validity = Mask::Constant(3, 3, false);
  d.depths(1, 0) = 3.5;
  d.validity(1, 0) = true;
  const DepthMap out = fill_depth_nearest(d, 1);
  CHECK(out.validity(1, 1));
  CHECK(out.depths(1, 1) == doctest::Approx(3.5));
  // corner (0,2) is at distance 2.24 > 1, stays invalid
  CHECK_FALSE(out.validity(0, 2));
}

TEST_CASE("fill_depth_nearest matches the brute-force nearest-valid oracle") {
  SplitMix64 rng(7);
  const int h = 24, w = 30, radius = 5;
  DepthMap d;
  d.depths = Grid::Zero(h, w);
  d.validity = Mask::Constant(h, w, false);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (rng.uniform() < 0.2) {
        d.depths(y, x) = rng.uniform(0.5, 9.0);
        d.validity(y, x) = true;
      }
    }
  }
  const DepthMap out = fill_depth_nearest(d, radius);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (d.validity(y, x)) {
        // valid pixels unchanged
        REQUIRE(out.validity(y, x));
        REQUIRE(out.depths(y, x) == d.depths(y, x));
        continue;
      }
      // exhaustive nearest-valid search, ties by row-major candidate order
      double best = 1e18;
      double val = 0;
      bool found = false;
      for (int yy = 0; yy < h; ++yy) {
        for (int xx = 0; xx < w; ++xx) {
          if (!d.validity(yy, xx)) continue;
          const double dist =
              std::sqrt(static_cast<double>((yy - y) * (yy - y) + (xx - x) * (xx - x)));
          if (dist <= radius && dist < best - 1e-12) {
            best = dist;
            val = d.depths(yy, xx);
            found = true;
          }
        }
      }
      REQUIRE(out.validity(y, x) == found);
      if (found) REQUIRE(out.depths(y, x) == val);
    }
  }
}

TEST_CASE("fill_depth_nearest introduces no new depth values") {
  SplitMix64 rng(31);
  DepthMap d;
  d.depths = Grid::Zero(16, 16);
  d.validity = Mask::Constant(16, 16, false);
  std::vector<double> source;
  for (int i = 0; i < 40; ++i) {
    const int y = static_cast<int>(rng.uniform_int(16));
    const int x = static_cast<int>(rng.uniform_int(16));
    d.depths(y, x) = rng.uniform(1.0, 5.0);
    d.validity(y, x) = true;
    source.push_back(d.depths(y, x));
  }
  const DepthMap out = fill_depth_nearest(d, 8);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      if (!out.validity(y, x)) continue;
      bool present = false;
      for (double s : source) present = present || s == out.depths(y, x);
      REQUIRE(present);
    }
  }
}

TEST_CASE("resize_long_side scales a wide image to the target long side") {
  GrayImage img;
  img.pixels = Grid::Constant(370, 1240, 0.5);
  const ResizeResult r = resize_long_side(img, 840);
  CHECK(r.image.width() == 840);
  CHECK(r.image.height() == 250);
  CHECK(r.scale == doctest::Approx(840.0 / 1240.0).epsilon(1e-6));
}

TEST_CASE("resize_long_side leaves an at-target square image unchanged") {
  SplitMix64 rng(3);
  GrayImage img;
  img.pixels = Grid::Zero(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) img.pixels(y, x) = rng.uniform();
  const ResizeResult r = resize_long_side(img, 64);
  CHECK(r.scale == doctest::Approx(1.0));
  CHECK(r.image.height() == 64);
  CHECK(r.image.width() == 64);
  CHECK((r.image.pixels - img.pixels).abs().maxCoeff() < 1e-12);
}

TEST_CASE("bilinear resize preserves constant images") {
  GrayImage img;
  img.pixels = Grid::Constant(123, 77, 0.37);
  const ResizeResult r = resize_long_side(img, 200);
  CHECK((r.image.pixels - 0.37).abs().maxCoeff() < 1e-12);
}

TEST_CASE("rigid transform algebra") {
  SplitMix64 rng(5);
  const RigidTransform id = RigidTransform::identity();
  CHECK((id.inverse().rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(id.inverse().translation.norm() < 1e-15);

  for (int i = 0; i < 50; ++i) {
    const RigidTransform t = testutil::random_pose(rng, 5.0);
    REQUIRE(t.is_valid());
    const Eigen::Vector3d p(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3));
    CHECK((t.apply(t.inverse().apply(p)) - p).norm() < 1e-9);
    const RigidTransform round = t.compose(t.inverse());
    CHECK((round.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(round.translation.norm() < 1e-9);
    CHECK(std::abs(t.rotation.determinant() - 1.0) < 1e-9);
  }

  // associativity on random triples
  for (int i = 0; i < 20; ++i) {
    const RigidTransform a = testutil::random_pose(rng);
    const RigidTransform b = testutil::random_pose(rng);
    const RigidTransform c = testutil::random_pose(rng);
    const RigidTransform left = a.compose(b).compose(c);
    const RigidTransform right = a.compose(b.compose(c));
    CHECK((left.rotation - right.rotation).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((left.translation - right.translation).norm() < 1e-9);
  }
}

}  // TEST_SUITE
