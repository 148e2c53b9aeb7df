#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "xmreg/geometry.hpp"
#include "xmreg/io.hpp"

namespace xmreg {

// World frame == LiDAR frame (sensor at the origin, z forward, x right,
// y down). Ground plane is world XZ; up axis is world Y.
struct Primitive {
  enum class Kind { plane, box };
  Kind kind = Kind::plane;

  // plane: finite rectangle origin + two edge vectors
  Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  Eigen::Vector3d edge_u = Eigen::Vector3d::Zero();
  Eigen::Vector3d edge_v = Eigen::Vector3d::Zero();

  // box: axis-aligned corners
  Eigen::Vector3d box_min = Eigen::Vector3d::Zero();
  Eigen::Vector3d box_max = Eigen::Vector3d::Zero();

  // reflectance = base + span · hash(texture_seed, tile) per square tile
  double base_reflectance = 0.2;
  double reflectance_span = 0.6;
  double tile_size = 1.0;  // meters
  uint64_t texture_seed = 0;
};

struct SceneConfig {
  int ray_count = 60000;
  int elevation_lines = 64;
  double elevation_span_deg = 30.0;  // half-span around the horizon
  double azimuth_span_deg = 60.0;    // half-span around forward
  double range_jitter_sigma = 0.0;   // optional Gaussian range noise, meters
  CameraIntrinsics intrinsics{260.0, 260.0, 160.0, 120.0, 320, 240};
  RigidTransform camera_pose;        // LiDAR → camera (ground truth)
  std::vector<Primitive> primitives;

  // Striped/tiled driving-style layout: ground plane, back wall, two boxes.
  // Tile textures derive from `seed`.
  static SceneConfig standard(uint64_t seed);
};

struct SyntheticScene {
  PointCloud4D cloud;          // LiDAR frame
  GrayImage camera_image;
  DepthMap camera_depth;       // exact rendered depth in the camera view
  CameraIntrinsics intrinsics;
  RigidTransform gt_extrinsics;  // LiDAR → camera
  uint64_t seed = 0;
};

struct RayHit {
  double t = 0;
  double reflectance = 0;
};

// Nearest primitive hit along origin + t·dir, t > epsilon.
std::optional<RayHit> cast_ray(const std::vector<Primitive>& primitives,
                               const Eigen::Vector3d& origin, const Eigen::Vector3d& dir);

SyntheticScene generate_scene(uint64_t seed, const SceneConfig& config);

struct PerturbationSpec {
  double max_translation = 1.0;  // meters, ground-plane disc radius
  double max_rotation_deg = 10.0;  // up-axis, ±
  uint64_t seed = 0;
};

// Translation uniform on the ground-plane (XZ) disc, rotation uniform in
// [−max, +max] about the up axis (Y).
RigidTransform sample_perturbation(const PerturbationSpec& spec);

// Scene config file parsing (documented keys: points, elevation_lines,
// spans, image/intrinsics, camera pose, primitive lines).
SceneConfig parse_scene_config(const KeyValueConfig& kv);

}  // namespace xmreg
