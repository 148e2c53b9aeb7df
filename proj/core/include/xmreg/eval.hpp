#pragma once

#include <string>
#include <vector>

#include "xmreg/pipeline.hpp"
#include "xmreg/scene.hpp"

namespace xmreg {

struct PoseErrors {
  double e_t = 0;      // meters
  double e_r_deg = 0;  // geodesic angle, degrees
  // Z-Y-X Euler magnitudes of the residual rotation, degrees
  double yaw = 0;    // about Y (up)
  double pitch = 0;  // about X
  double roll = 0;   // about Z
  // per-axis translation error magnitudes, meters
  double tx = 0, ty = 0, tz = 0;
};

PoseErrors pose_errors(const RigidTransform& est, const RigidTransform& gt);

struct RegistrationResult {
  int sample_id = 0;
  bool success = false;
  std::string failure_reason;  // InsufficientCorrespondences | NoConsensus
  RigidTransform estimate;
  RigidTransform gt;
  int match_count = 0;
  double precision = 0;  // epipolar matching precision of the sample
};

// Fraction of samples with e_r < rot_thresh AND e_t < trans_thresh; failures
// always count in the denominator and never as successes.
double accuracy(const std::vector<RegistrationResult>& results, double rot_thresh_deg = 5.0,
                double trans_thresh_m = 2.0);

// Fraction of matches whose symmetric epipolar error (normalized image
// coordinates) under the gt relative pose is below `epi_thresh`. Empty match
// sets yield 0.
double matching_precision(const std::vector<FineMatch>& matches, const RigidTransform& gt,
                          const CameraIntrinsics& K_lidar, const CameraIntrinsics& K_cam,
                          double epi_thresh, bool* empty_flag = nullptr);

struct BenchmarkConfig {
  int scene_count = 50;
  uint64_t seed = 1;
  PerturbationSpec perturbation{1.0, 10.0, 0};
  MatcherParams matcher;
  RansacConfig ransac;
  double epi_thresh = 1e-3;
  int jobs = 1;
  std::string out_dir;  // empty = no artifacts written
};

struct MetricsReport {
  int sample_count = 0;
  int failure_count = 0;
  double e_t_mean = 0, e_t_std = 0;
  double e_r_mean = 0, e_r_std = 0;
  double yaw_mean = 0, pitch_mean = 0, roll_mean = 0;
  double tx_mean = 0, ty_mean = 0, tz_mean = 0;
  double acc = 0;
  double precision = 0;
  double failure_rate = 0;
};

// Aggregates a result list into the report (used both by run_benchmark and
// by report-recomputation checks).
MetricsReport aggregate(const std::vector<RegistrationResult>& results);

std::string format_report_table(const MetricsReport& r, const BenchmarkConfig& cfg);
std::string format_report_csv(const MetricsReport& r);

// Synthetic benchmark: per sample, builds a scene under the perturbation
// regime, runs the full pipeline and scores it. Writes the metrics table,
// CSV, per-sample match dumps and depth-tinted overlay images when out_dir
// is set.
MetricsReport run_benchmark(const BenchmarkConfig& cfg,
                            std::vector<RegistrationResult>* results_out = nullptr);

// Depth-tinted projection of the cloud over the camera image (PNG).
void write_overlay_png(const std::string& path, const GrayImage& camera_image,
                       const PointCloud4D& cloud, const RigidTransform& pose,
                       const CameraIntrinsics& K);

}  // namespace xmreg
