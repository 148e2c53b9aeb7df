#pragma once

#include <Eigen/Dense>
#include <vector>

#include "xmreg/errors.hpp"

namespace xmreg {

using Grid = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }

  // this ∘ rhs: rhs is applied first.
  RigidTransform compose(const RigidTransform& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }

  RigidTransform inverse() const {
    Eigen::Matrix3d rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }

  bool is_valid(double tol = 1e-9) const {
    Eigen::Matrix3d err = rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
    return err.cwiseAbs().maxCoeff() < tol && std::abs(rotation.determinant() - 1.0) < tol;
  }
};

struct CameraIntrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  bool is_valid() const {
    return fx > 0 && fy > 0 && cx >= 0 && cx < width && cy >= 0 && cy < height;
  }

  CameraIntrinsics scaled(double s) const {
    return {fx * s, fy * s, cx * s, cy * s,
            static_cast<int>(std::lround(width * s)),
            static_cast<int>(std::lround(height * s))};
  }
};

struct LidarPoint {
  double x = 0, y = 0, z = 0;
  double intensity = 0;  // reflectance in [0, 1] after load-time normalization

  Eigen::Vector3d position() const { return {x, y, z}; }
};

struct PointCloud4D {
  std::vector<LidarPoint> points;

  // Min-max normalization to [0, 1]; constant-intensity clouds map to 0.
  void normalize_intensity();
};

struct GrayImage {
  Grid pixels;  // H×W in [0, 1]

  int height() const { return static_cast<int>(pixels.rows()); }
  int width() const { return static_cast<int>(pixels.cols()); }
};

struct IntensityImage {
  Grid pixels;    // 0 where validity is false
  Mask validity;  // true where a LiDAR return landed
};

struct DepthMap {
  Grid depths;    // meters, 0 = missing
  Mask validity;

  int height() const { return static_cast<int>(depths.rows()); }
  int width() const { return static_cast<int>(depths.cols()); }
};

struct Projection {
  IntensityImage intensity;
  DepthMap depth;  // shares the validity pattern of the intensity image
};

// Rasterizes the cloud through `pose` into the image plane of `K`.
// Pixel conflicts keep the smallest depth. Throws EmptyProjection if no
// point lands inside the image.
Projection project(const PointCloud4D& cloud, const RigidTransform& pose,
                   const CameraIntrinsics& K);

Eigen::Vector3d back_project(double u, double v, double depth,
                             const CameraIntrinsics& K);

// Generic nearest-valid fill on a value grid. Invalid cells within
// `max_radius` (Euclidean, pixels) of a valid cell take the value of the
// nearest valid cell; ties resolve to the candidate earliest in row-major
// scan order.
void fill_nearest(Grid& values, Mask& validity, int max_radius);

DepthMap fill_depth_nearest(const DepthMap& d, int max_radius);

struct ResizeResult {
  GrayImage image;
  double scale;
};

// Bilinear resize so that max(H, W) == target, aspect preserved. Scaling of
// intrinsics is left to the caller via `scale`.
ResizeResult resize_long_side(const GrayImage& img, int target);

}  // namespace xmreg
