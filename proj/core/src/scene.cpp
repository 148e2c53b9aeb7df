#include "xmreg/scene.hpp"

#include <cmath>
#include <sstream>

#include "xmreg/rng.hpp"

namespace xmreg {

namespace {

constexpr double kDeg = 3.14159265358979323846 / 180.0;
constexpr double kRayEps = 1e-9;

double tile_reflectance(const Primitive& p, double a, double b) {
  // two texture octaves: coarse tiles carry most of the contrast, quarter-size
  // sub-tiles keep every descriptor cell distinctive
  const int64_t ta = static_cast<int64_t>(std::floor(a / p.tile_size));
  const int64_t tb = static_cast<int64_t>(std::floor(b / p.tile_size));
  const double fine_size = p.tile_size * 0.25;
  const int64_t fa = static_cast<int64_t>(std::floor(a / fine_size));
  const int64_t fb = static_cast<int64_t>(std::floor(b / fine_size));
  const double octave0 = hash01(p.texture_seed, ta, tb);
  const double octave1 = hash01(mix_u64(p.texture_seed ^ 0x51ed270b7a1fb5efull), fa, fb);
  const double r =
      p.base_reflectance + p.reflectance_span * (0.85 * octave0 + 0.15 * octave1);
  return std::clamp(r, 0.0, 1.0);
}

std::optional<RayHit> hit_plane(const Primitive& p, const Eigen::Vector3d& o,
                                const Eigen::Vector3d& d) {
  const Eigen::Vector3d n = p.edge_u.cross(p.edge_v);
  const double denom = d.dot(n);
  if (std::abs(denom) < 1e-12) return std::nullopt;
  const double t = (p.origin - o).dot(n) / denom;
  if (t <= kRayEps) return std::nullopt;
  const Eigen::Vector3d rel = o + t * d - p.origin;
  const double lu2 = p.edge_u.squaredNorm(), lv2 = p.edge_v.squaredNorm();
  const double a = rel.dot(p.edge_u) / lu2;
  const double b = rel.dot(p.edge_v) / lv2;
  if (a < 0 || a > 1 || b < 0 || b > 1) return std::nullopt;
  return RayHit{t, tile_reflectance(p, a * std::sqrt(lu2), b * std::sqrt(lv2))};
}

std::optional<RayHit> hit_box(const Primitive& p, const Eigen::Vector3d& o,
                              const Eigen::Vector3d& d) {
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  int entry_axis = -1;
  for (int ax = 0; ax < 3; ++ax) {
    if (std::abs(d(ax)) < 1e-15) {
      if (o(ax) < p.box_min(ax) || o(ax) > p.box_max(ax)) return std::nullopt;
      continue;
    }
    double t0 = (p.box_min(ax) - o(ax)) / d(ax);
    double t1 = (p.box_max(ax) - o(ax)) / d(ax);
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > tmin) {
      tmin = t0;
      entry_axis = ax;
    }
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return std::nullopt;
  }
  if (tmin <= kRayEps || entry_axis < 0) return std::nullopt;
  const Eigen::Vector3d hit = o + tmin * d;
  // texture coords on the entry face: the two non-normal axes
  const int a_ax = (entry_axis + 1) % 3, b_ax = (entry_axis + 2) % 3;
  return RayHit{tmin, tile_reflectance(p, hit(a_ax), hit(b_ax))};
}

}  // namespace

std::optional<RayHit> cast_ray(const std::vector<Primitive>& primitives,
                               const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) {
  std::optional<RayHit> best;
  for (const auto& p : primitives) {
    const auto h = p.kind == Primitive::Kind::plane ? hit_plane(p, origin, dir)
                                                    : hit_box(p, origin, dir);
    if (h && (!best || h->t < best->t)) best = h;
  }
  return best;
}

SceneConfig SceneConfig::standard(uint64_t seed) {
  SceneConfig cfg;
  cfg.ray_count = 1000000;  // dense scan: the virtual view needs good coverage
  cfg.elevation_lines = 256;
  cfg.elevation_span_deg = 25.0;
  cfg.azimuth_span_deg = 55.0;
  cfg.camera_pose.translation = Eigen::Vector3d(0.1, 0.0, 0.0);

  SplitMix64 rng(mix_u64(seed ^ 0x5ce4e5b9u));

  Primitive ground;
  ground.kind = Primitive::Kind::plane;
  ground.origin = {-30.0, 1.6, 1.0};
  ground.edge_u = {60.0, 0.0, 0.0};
  ground.edge_v = {0.0, 0.0, 55.0};
  ground.base_reflectance = 0.1;
  ground.reflectance_span = 0.8;
  ground.tile_size = 1.2;
  ground.texture_seed = mix_u64(seed + 1);
  cfg.primitives.push_back(ground);

  Primitive wall;
  wall.kind = Primitive::Kind::plane;
  wall.origin = {-30.0, -12.0, 18.0};
  wall.edge_u = {60.0, 0.0, 0.0};
  wall.edge_v = {0.0, 13.6, 0.0};
  wall.base_reflectance = 0.15;
  wall.reflectance_span = 0.7;
  wall.tile_size = 1.8;
  wall.texture_seed = mix_u64(seed + 2);
  cfg.primitives.push_back(wall);

  // near-to-mid-range boxes on both sides: close fronto-parallel texture is
  // what conditions the translation estimate
  for (int b = 0; b < 5; ++b) {
    Primitive box;
    box.kind = Primitive::Kind::box;
    const double side = (b % 2 == 0) ? -1.0 : 1.0;
    const double x = side * rng.uniform(1.6, 4.5);
    const double z = 4.0 + 2.1 * b + rng.uniform(0.0, 1.2);
    const double w = rng.uniform(1.4, 2.6);
    const double h = rng.uniform(1.8, 3.2);
    box.box_min = {std::min(x, x + side * w), 1.6 - h, z};
    box.box_max = {std::max(x, x + side * w), 1.6, z + rng.uniform(1.0, 2.0)};
    box.base_reflectance = 0.2;
    box.reflectance_span = 0.7;
    box.tile_size = std::max(0.55, z / 13.0);
    box.texture_seed = mix_u64(seed + 3 + static_cast<uint64_t>(b));
    cfg.primitives.push_back(box);
  }
  return cfg;
}

SyntheticScene generate_scene(uint64_t seed, const SceneConfig& config) {
  if (config.primitives.empty()) throw InvalidConfig("scene needs at least one primitive");
  if (config.ray_count <= 0 || config.elevation_lines <= 0) {
    throw InvalidConfig("scene needs positive ray and elevation-line counts");
  }
  if (!config.intrinsics.is_valid()) throw InvalidConfig("invalid scene intrinsics");

  SyntheticScene scene;
  scene.seed = seed;
  scene.intrinsics = config.intrinsics;
  scene.gt_extrinsics = config.camera_pose;

  SplitMix64 rng(seed);

  // LiDAR sweep: uniform angular grid, origin at the sensor
  const int lines = config.elevation_lines;
  const int per_line = std::max(1, config.ray_count / lines);
  const double espan = config.elevation_span_deg * kDeg;
  const double aspan = config.azimuth_span_deg * kDeg;
  scene.cloud.points.reserve(static_cast<size_t>(lines) * per_line);
  for (int ring = 0; ring < lines; ++ring) {
    for (int s = 0; s < per_line; ++s) {
      // stratified angular sampling: sub-cell jitter stops the scan grid from
      // aliasing against the image pixel grid in the virtual view
      const double elev =
          -espan + 2.0 * espan * (ring + 0.1 + 0.8 * rng.uniform()) / lines;
      const double az =
          -aspan + 2.0 * aspan * (s + 0.1 + 0.8 * rng.uniform()) / per_line;
      const Eigen::Vector3d dir(std::cos(elev) * std::sin(az), std::sin(elev),
                                std::cos(elev) * std::cos(az));
      const auto hit = cast_ray(config.primitives, Eigen::Vector3d::Zero(), dir);
      if (!hit) continue;
      double range = hit->t;
      if (config.range_jitter_sigma > 0) {
        range = std::max(0.05, range + config.range_jitter_sigma * rng.gaussian());
      }
      const Eigen::Vector3d p = range * dir;
      scene.cloud.points.push_back({p.x(), p.y(), p.z(), hit->reflectance});
    }
  }

  // camera view rendered against the same primitives
  const CameraIntrinsics& K = config.intrinsics;
  const RigidTransform cam_from_world = config.camera_pose;
  const RigidTransform world_from_cam = cam_from_world.inverse();
  const Eigen::Vector3d cam_center = world_from_cam.translation;
  scene.camera_image.pixels = Grid::Zero(K.height, K.width);
  scene.camera_depth.depths = Grid::Zero(K.height, K.width);
  scene.camera_depth.validity = Mask::Constant(K.height, K.width, false);
  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      const Eigen::Vector3d dir_cam((x - K.cx) / K.fx, (y - K.cy) / K.fy, 1.0);
      const Eigen::Vector3d dir_world = world_from_cam.rotation * dir_cam;
      const auto hit = cast_ray(config.primitives, cam_center, dir_world);
      if (!hit) continue;
      scene.camera_image.pixels(y, x) = hit->reflectance;
      scene.camera_depth.depths(y, x) = hit->t;  // dir_cam.z == 1, so t is camera depth
      scene.camera_depth.validity(y, x) = true;
    }
  }

  // Normalize cloud intensity min-max (so a bin-file round trip is the
  // identity) and push the camera image through the same affine map: the two
  // modalities stay value-aligned on shared surfaces.
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& p : scene.cloud.points) {
    lo = std::min(lo, p.intensity);
    hi = std::max(hi, p.intensity);
  }
  if (!scene.cloud.points.empty() && hi > lo) {
    const double span = hi - lo;
    for (auto& p : scene.cloud.points) p.intensity = (p.intensity - lo) / span;
    scene.camera_image.pixels =
        ((scene.camera_image.pixels - lo) / span).cwiseMax(0.0).cwiseMin(1.0);
  }
  return scene;
}

RigidTransform sample_perturbation(const PerturbationSpec& spec) {
  if (spec.max_translation < 0 || spec.max_rotation_deg < 0) {
    throw InvalidConfig("perturbation bounds must be nonnegative");
  }
  SplitMix64 rng(spec.seed);
  const double radius = spec.max_translation * std::sqrt(rng.uniform());
  const double phi = 2.0 * 3.14159265358979323846 * rng.uniform();
  const double yaw = rng.uniform(-spec.max_rotation_deg, spec.max_rotation_deg) * kDeg;

  RigidTransform t;
  t.translation = Eigen::Vector3d(radius * std::cos(phi), 0.0, radius * std::sin(phi));
  t.rotation = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitY()).toRotationMatrix();
  return t;
}

SceneConfig parse_scene_config(const KeyValueConfig& kv) {
  SceneConfig cfg = SceneConfig::standard(0);
  if (kv.has("preset_seed")) {
    cfg = SceneConfig::standard(static_cast<uint64_t>(kv.get_int("preset_seed", 0)));
  }
  cfg.ray_count = kv.get_int("points", cfg.ray_count);
  cfg.elevation_lines = kv.get_int("elevation_lines", cfg.elevation_lines);
  cfg.elevation_span_deg = kv.get_double("elevation_span", cfg.elevation_span_deg);
  cfg.azimuth_span_deg = kv.get_double("azimuth_span", cfg.azimuth_span_deg);
  cfg.range_jitter_sigma = kv.get_double("range_jitter", cfg.range_jitter_sigma);
  cfg.intrinsics.width = kv.get_int("width", cfg.intrinsics.width);
  cfg.intrinsics.height = kv.get_int("height", cfg.intrinsics.height);
  cfg.intrinsics.fx = kv.get_double("fx", cfg.intrinsics.fx);
  cfg.intrinsics.fy = kv.get_double("fy", cfg.intrinsics.fy);
  cfg.intrinsics.cx = kv.get_double("cx", cfg.intrinsics.cx);
  cfg.intrinsics.cy = kv.get_double("cy", cfg.intrinsics.cy);
  if (kv.has("camera_pose")) {
    std::istringstream ss(kv.get("camera_pose"));
    RigidTransform t;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) ss >> t.rotation(r, c);
      ss >> t.translation(r);
    }
    if (!ss) throw InvalidConfig("camera_pose needs 12 reals");
    cfg.camera_pose = t;
  }
  const auto prim_lines = kv.get_all("primitive");
  if (!prim_lines.empty()) {
    cfg.primitives.clear();
    for (const auto& line : prim_lines) {
      std::istringstream ss(line);
      std::string kind;
      ss >> kind;
      Primitive p;
      if (kind == "plane") {
        p.kind = Primitive::Kind::plane;
        for (int i = 0; i < 3; ++i) ss >> p.origin(i);
        for (int i = 0; i < 3; ++i) ss >> p.edge_u(i);
        for (int i = 0; i < 3; ++i) ss >> p.edge_v(i);
      } else if (kind == "box") {
        p.kind = Primitive::Kind::box;
        for (int i = 0; i < 3; ++i) ss >> p.box_min(i);
        for (int i = 0; i < 3; ++i) ss >> p.box_max(i);
      } else {
        throw InvalidConfig("unknown primitive kind: " + kind);
      }
      ss >> p.base_reflectance >> p.reflectance_span >> p.tile_size;
      if (!ss) throw InvalidConfig("malformed primitive line: " + line);
      uint64_t ts;
      if (ss >> ts) p.texture_seed = ts;
      cfg.primitives.push_back(p);
    }
  }
  return cfg;
}

}  // namespace xmreg
