#include "xmreg/eval.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <thread>

#include "xmreg/rng.hpp"

namespace xmreg {

namespace {

constexpr double kRad2Deg = 180.0 / 3.14159265358979323846;

}  // namespace

PoseErrors pose_errors(const RigidTransform& est, const RigidTransform& gt) {
  const RigidTransform delta = gt.inverse().compose(est);
  PoseErrors e;
  e.e_t = delta.translation.norm();
  e.tx = std::abs(delta.translation.x());
  e.ty = std::abs(delta.translation.y());
  e.tz = std::abs(delta.translation.z());

  const Eigen::Matrix3d& r = delta.rotation;
  const double cos_angle = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
  e.e_r_deg = std::acos(cos_angle) * kRad2Deg;

  // ΔR = Rz(roll)·Ry(yaw)·Rx(pitch)
  const double sy = std::clamp(-r(2, 0), -1.0, 1.0);
  e.yaw = std::abs(std::asin(sy)) * kRad2Deg;
  e.pitch = std::abs(std::atan2(r(2, 1), r(2, 2))) * kRad2Deg;
  e.roll = std::abs(std::atan2(r(1, 0), r(0, 0))) * kRad2Deg;
  return e;
}

double accuracy(const std::vector<RegistrationResult>& results, double rot_thresh_deg,
                double trans_thresh_m) {
  if (results.empty()) throw EmptyResults("accuracy over an empty result list");
  int good = 0;
  for (const auto& r : results) {
    if (!r.success) continue;
    const PoseErrors e = pose_errors(r.estimate, r.gt);
    if (e.e_r_deg < rot_thresh_deg && e.e_t < trans_thresh_m) ++good;
  }
  return static_cast<double>(good) / static_cast<double>(results.size());
}

double matching_precision(const std::vector<FineMatch>& matches, const RigidTransform& gt,
                          const CameraIntrinsics& K_lidar, const CameraIntrinsics& K_cam,
                          double epi_thresh, bool* empty_flag) {
  if (empty_flag) *empty_flag = matches.empty();
  if (matches.empty()) return 0.0;

  Eigen::Matrix3d t_cross;
  const Eigen::Vector3d& t = gt.translation;
  t_cross << 0, -t.z(), t.y(), t.z(), 0, -t.x(), -t.y(), t.x(), 0;
  const Eigen::Matrix3d e = t_cross * gt.rotation;

  int correct = 0;
  for (const auto& m : matches) {
    const Eigen::Vector3d x0((m.u0 - K_lidar.cx) / K_lidar.fx,
                             (m.v0 - K_lidar.cy) / K_lidar.fy, 1.0);
    const Eigen::Vector3d x1((m.u1 - K_cam.cx) / K_cam.fx, (m.v1 - K_cam.cy) / K_cam.fy, 1.0);
    const Eigen::Vector3d l0 = e * x0;        // epipolar line of x0 in view 1
    const Eigen::Vector3d l1 = e.transpose() * x1;
    const double num = x1.dot(l0);
    const double d0 = l0.head<2>().squaredNorm();
    const double d1 = l1.head<2>().squaredNorm();
    if (d0 <= 0 || d1 <= 0) continue;
    const double err = num * num * (1.0 / d0 + 1.0 / d1);
    if (err < epi_thresh) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(matches.size());
}

MetricsReport aggregate(const std::vector<RegistrationResult>& results) {
  MetricsReport r;
  r.sample_count = static_cast<int>(results.size());
  std::vector<PoseErrors> errs;
  double prec_sum = 0;
  int prec_n = 0;
  for (const auto& res : results) {
    if (!res.success) {
      ++r.failure_count;
      continue;
    }
    errs.push_back(pose_errors(res.estimate, res.gt));
    prec_sum += res.precision;
    ++prec_n;
  }
  r.failure_rate = r.sample_count > 0
                       ? static_cast<double>(r.failure_count) / r.sample_count
                       : 0.0;
  if (!results.empty()) r.acc = accuracy(results);
  if (prec_n > 0) r.precision = prec_sum / prec_n;
  if (!errs.empty()) {
    const double n = static_cast<double>(errs.size());
    for (const auto& e : errs) {
      r.e_t_mean += e.e_t;
      r.e_r_mean += e.e_r_deg;
      r.yaw_mean += e.yaw;
      r.pitch_mean += e.pitch;
      r.roll_mean += e.roll;
      r.tx_mean += e.tx;
      r.ty_mean += e.ty;
      r.tz_mean += e.tz;
    }
    r.e_t_mean /= n;
    r.e_r_mean /= n;
    r.yaw_mean /= n;
    r.pitch_mean /= n;
    r.roll_mean /= n;
    r.tx_mean /= n;
    r.ty_mean /= n;
    r.tz_mean /= n;
    for (const auto& e : errs) {
      r.e_t_std += (e.e_t - r.e_t_mean) * (e.e_t - r.e_t_mean);
      r.e_r_std += (e.e_r_deg - r.e_r_mean) * (e.e_r_deg - r.e_r_mean);
    }
    r.e_t_std = std::sqrt(r.e_t_std / n);
    r.e_r_std = std::sqrt(r.e_r_std / n);
  }
  return r;
}

std::string format_report_table(const MetricsReport& r, const BenchmarkConfig& cfg) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(4);
  ss << "samples: " << r.sample_count << "  failures: " << r.failure_count
     << "  epi_thresh: " << cfg.epi_thresh << "\n";
  ss << "-----------------------------------------------------------\n";
  ss << "e_t (m)        e_r (deg)      Acc@5deg/2m   precision\n";
  ss << r.e_t_mean << " +- " << r.e_t_std << "  " << r.e_r_mean << " +- " << r.e_r_std
     << "  " << r.acc << "        " << r.precision << "\n";
  ss << "-----------------------------------------------------------\n";
  ss << "rotation (deg)  yaw " << r.yaw_mean << "  pitch " << r.pitch_mean << "  roll "
     << r.roll_mean << "\n";
  ss << "translation (m)   X " << r.tx_mean << "    Y " << r.ty_mean << "     Z "
     << r.tz_mean << "\n";
  return ss.str();
}

std::string format_report_csv(const MetricsReport& r) {
  std::ostringstream ss;
  ss.precision(10);
  ss << "samples,failures,e_t_mean,e_t_std,e_r_mean,e_r_std,yaw,pitch,roll,tx,ty,tz,acc,"
        "precision,failure_rate\n";
  ss << r.sample_count << "," << r.failure_count << "," << r.e_t_mean << "," << r.e_t_std
     << "," << r.e_r_mean << "," << r.e_r_std << "," << r.yaw_mean << "," << r.pitch_mean
     << "," << r.roll_mean << "," << r.tx_mean << "," << r.ty_mean << "," << r.tz_mean
     << "," << r.acc << "," << r.precision << "," << r.failure_rate << "\n";
  return ss.str();
}

void write_overlay_png(const std::string& path, const GrayImage& camera_image,
                       const PointCloud4D& cloud, const RigidTransform& pose,
                       const CameraIntrinsics& K) {
  const int h = camera_image.height(), w = camera_image.width();
  cv::Mat img(h, w, CV_8UC3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto g = static_cast<unsigned char>(
          std::lround(std::clamp(camera_image.pixels(y, x), 0.0, 1.0) * 255.0));
      img.at<cv::Vec3b>(y, x) = {g, g, g};
    }
  }
  double max_depth = 1.0;
  for (const auto& p : cloud.points) {
    max_depth = std::max(max_depth, pose.apply(p.position()).z());
  }
  for (const auto& p : cloud.points) {
    const Eigen::Vector3d q = pose.apply(p.position());
    if (q.z() <= 0) continue;
    const long u = std::lround(K.fx * q.x() / q.z() + K.cx);
    const long v = std::lround(K.fy * q.y() / q.z() + K.cy);
    if (u < 0 || u >= w || v < 0 || v >= h) continue;
    const double f = std::clamp(q.z() / max_depth, 0.0, 1.0);
    // near = red, far = blue
    img.at<cv::Vec3b>(v, u) = {static_cast<unsigned char>(255 * f), 64,
                               static_cast<unsigned char>(255 * (1.0 - f))};
  }
  if (!cv::imwrite(path, img)) throw IoError("cannot write overlay: " + path);
}

MetricsReport run_benchmark(const BenchmarkConfig& cfg,
                            std::vector<RegistrationResult>* results_out) {
  namespace fs = std::filesystem;
  const bool write = !cfg.out_dir.empty();
  if (write) fs::create_directories(cfg.out_dir);

  std::vector<RegistrationResult> results(cfg.scene_count);
  std::atomic<int> next{0};

  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= cfg.scene_count) return;
      const uint64_t scene_seed = cfg.seed + static_cast<uint64_t>(i);
      SceneConfig scfg = SceneConfig::standard(scene_seed);

      PerturbationSpec pspec = cfg.perturbation;
      pspec.seed = mix_u64(cfg.seed ^ (0x9e3779b97f4a7c15ull * (i + 1)));
      const RigidTransform perturb = sample_perturbation(pspec);
      scfg.camera_pose = perturb.compose(scfg.camera_pose);

      const SyntheticScene scene = generate_scene(scene_seed, scfg);
      RansacConfig rcfg = cfg.ransac;
      rcfg.seed = mix_u64(scene_seed ^ 0xabcdef12345ull);
      const PipelineResult pr =
          calibrate(scene.cloud, scene.camera_image, scene.intrinsics, cfg.matcher, rcfg);

      RegistrationResult& res = results[i];
      res.sample_id = i;
      res.gt = scene.gt_extrinsics;
      res.match_count = static_cast<int>(pr.fine.size());
      res.precision = matching_precision(pr.fine, scene.gt_extrinsics, scene.intrinsics,
                                         scene.intrinsics, cfg.epi_thresh);
      if (pr.status == PipelineStatus::success && pr.estimate) {
        res.success = true;
        res.estimate = pr.estimate->transform;
      } else {
        res.failure_reason = pr.status == PipelineStatus::no_consensus
                                 ? "NoConsensus"
                                 : "InsufficientCorrespondences";
      }
      if (write) {
        const std::string stem = cfg.out_dir + "/sample_" + std::to_string(i);
        atomic_write_text(stem + "_matches.txt", format_match_dump(pr.fine, cfg.matcher));
        write_overlay_png(stem + "_overlay.png", scene.camera_image, scene.cloud,
                          res.success ? res.estimate : scene.gt_extrinsics,
                          scene.intrinsics);
      }
    }
  };

  const int jobs = std::max(1, cfg.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  const MetricsReport report = aggregate(results);
  if (write) {
    atomic_write_text(cfg.out_dir + "/report.txt", format_report_table(report, cfg));
    atomic_write_text(cfg.out_dir + "/report.csv", format_report_csv(report));
  }
  if (results_out) *results_out = std::move(results);
  return report;
}

}  // namespace xmreg
