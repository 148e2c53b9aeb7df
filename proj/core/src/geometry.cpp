#include "xmreg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace xmreg {

void PointCloud4D::normalize_intensity() {
  if (points.empty()) return;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& p : points) {
    lo = std::min(lo, p.intensity);
    hi = std::max(hi, p.intensity);
  }
  const double range = hi - lo;
  for (auto& p : points) {
    p.intensity = range > 0 ? (p.intensity - lo) / range : 0.0;
  }
}

Projection project(const PointCloud4D& cloud, const RigidTransform& pose,
                   const CameraIntrinsics& K) {
  const int h = K.height, w = K.width;
  Projection out;
  out.intensity.pixels = Grid::Zero(h, w);
  out.intensity.validity = Mask::Constant(h, w, false);
  out.depth.depths = Grid::Zero(h, w);
  out.depth.validity = Mask::Constant(h, w, false);

  size_t landed = 0;
  for (const auto& p : cloud.points) {
    const Eigen::Vector3d q = pose.apply(p.position());
    if (q.z() <= 0) continue;
    const long u = std::lround(K.fx * q.x() / q.z() + K.cx);
    const long v = std::lround(K.fy * q.y() / q.z() + K.cy);
    if (u < 0 || u >= w || v < 0 || v >= h) continue;
    ++landed;
    if (!out.depth.validity(v, u) || q.z() < out.depth.depths(v, u)) {
      out.depth.depths(v, u) = q.z();
      out.intensity.pixels(v, u) = p.intensity;
      out.depth.validity(v, u) = true;
      out.intensity.validity(v, u) = true;
    }
  }
  if (landed == 0) {
    throw EmptyProjection("no point projects inside the image; fields of view may be disjoint");
  }
  return out;
}

Eigen::Vector3d back_project(double u, double v, double depth,
                             const CameraIntrinsics& K) {
  if (depth <= 0) throw NonPositiveDepth("back_project requires depth > 0");
  return {depth * (u - K.cx) / K.fx, depth * (v - K.cy) / K.fy, depth};
}

void fill_nearest(Grid& values, Mask& validity, int max_radius) {
  const int h = static_cast<int>(values.rows());
  const int w = static_cast<int>(values.cols());
  const Grid src_v = values;
  const Mask src_m = validity;
  const int r = max_radius;
  const double r2 = static_cast<double>(r) * r;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (src_m(y, x)) continue;
      double best = std::numeric_limits<double>::infinity();
      double best_val = 0;
      bool found = false;
      // Row-major window scan; strict < keeps the first candidate at
      // equal distance.
      for (int dy = -r; dy <= r; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= w) continue;
          if (!src_m(yy, xx)) continue;
          const double d2 = static_cast<double>(dy) * dy + static_cast<double>(dx) * dx;
          if (d2 > r2) continue;
          if (d2 < best) {
            best = d2;
            best_val = src_v(yy, xx);
            found = true;
          }
        }
      }
      if (found) {
        values(y, x) = best_val;
        validity(y, x) = true;
      }
    }
  }
}

DepthMap fill_depth_nearest(const DepthMap& d, int max_radius) {
  DepthMap out = d;
  fill_nearest(out.depths, out.validity, max_radius);
  return out;
}

namespace {

double bilinear_sample(const Grid& g, double x, double y) {
  const int h = static_cast<int>(g.rows());
  const int w = static_cast<int>(g.cols());
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double ax = x - x0;
  const double ay = y - y0;
  return (1 - ay) * ((1 - ax) * g(y0, x0) + ax * g(y0, x1)) +
         ay * ((1 - ax) * g(y1, x0) + ax * g(y1, x1));
}

}  // namespace

ResizeResult resize_long_side(const GrayImage& img, int target) {
  const int h = img.height();
  const int w = img.width();
  const int long_side = std::max(h, w);
  const double scale = static_cast<double>(target) / long_side;

  int nh, nw;
  if (w >= h) {
    nw = target;
    nh = std::max(1, static_cast<int>(h * scale));
  } else {
    nh = target;
    nw = std::max(1, static_cast<int>(w * scale));
  }

  GrayImage out;
  out.pixels = Grid::Zero(nh, nw);
  for (int y = 0; y < nh; ++y) {
    for (int x = 0; x < nw; ++x) {
      const double sx = (x + 0.5) / scale - 0.5;
      const double sy = (y + 0.5) / scale - 0.5;
      out.pixels(y, x) = bilinear_sample(img.pixels, sx, sy);
    }
  }
  return {std::move(out), scale};
}

}  // namespace xmreg
