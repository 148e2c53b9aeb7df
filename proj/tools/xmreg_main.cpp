// xmreg: command-line front end for the registration toolkit.
//
// Subcommands: synth, project, match, calibrate, eval.
// Exit codes: 0 success, 2 invalid config, 3 registration failure, 4 I/O error.
// The REG_SEED environment variable overrides any configured seed.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "xmreg/eval.hpp"
#include "xmreg/io.hpp"
#include "xmreg/pipeline.hpp"
#include "xmreg/scene.hpp"

namespace fs = std::filesystem;
using namespace xmreg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRegistration = 3;
constexpr int kExitIo = 4;

std::optional<uint64_t> env_seed() {
  const char* s = std::getenv("REG_SEED");
  if (!s || !*s) return std::nullopt;
  return std::strtoull(s, nullptr, 10);
}

KeyValueConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  return read_config(path);
}

CameraIntrinsics read_intrinsics_file(const std::string& path) {
  const KeyValueConfig kv = read_config(path);
  CameraIntrinsics K;
  K.fx = kv.get_double("fx", 0);
  K.fy = kv.get_double("fy", 0);
  K.cx = kv.get_double("cx", 0);
  K.cy = kv.get_double("cy", 0);
  K.width = kv.get_int("width", 0);
  K.height = kv.get_int("height", 0);
  if (!K.is_valid()) throw InvalidConfig("invalid intrinsics in " + path);
  return K;
}

std::string format_intrinsics(const CameraIntrinsics& K) {
  std::ostringstream ss;
  ss.precision(17);
  ss << "fx = " << K.fx << "\nfy = " << K.fy << "\ncx = " << K.cx << "\ncy = " << K.cy
     << "\nwidth = " << K.width << "\nheight = " << K.height << "\n";
  return ss.str();
}

// Flags already applied via CLI11 defaults; config-file keys fill anything the
// user did not pass on the command line.
void apply_matcher_config(const KeyValueConfig& kv, const CLI::App& app, MatcherParams& mp) {
  auto flag_unset = [&](const std::string& name) {
    const CLI::Option* o = app.get_option_no_throw(name);
    return o == nullptr || o->count() == 0;
  };
  if (flag_unset("--theta-c")) mp.theta_c = kv.get_double("theta_c", mp.theta_c);
  if (flag_unset("--sim-temp")) mp.sim_temperature = kv.get_double("sim_temperature", mp.sim_temperature);
  if (flag_unset("--fine-temp")) mp.fine_temperature = kv.get_double("fine_temperature", mp.fine_temperature);
  if (flag_unset("--window")) mp.window = kv.get_int("window", mp.window);
  if (flag_unset("--fill-radius")) mp.fill_radius = kv.get_int("fill_radius", mp.fill_radius);
  if (flag_unset("--rerender"))
    mp.rerender_iterations = kv.get_int("rerender_iterations", mp.rerender_iterations);
}

void apply_ransac_config(const KeyValueConfig& kv, const CLI::App& app, RansacConfig& rc) {
  auto flag_unset = [&](const std::string& name) {
    const CLI::Option* o = app.get_option_no_throw(name);
    return o == nullptr || o->count() == 0;
  };
  if (flag_unset("--max-iters")) rc.max_iters = kv.get_int("max_iters", rc.max_iters);
  if (flag_unset("--inlier-threshold"))
    rc.inlier_threshold = kv.get_double("inlier_threshold", rc.inlier_threshold);
  if (flag_unset("--confidence")) rc.confidence = kv.get_double("confidence", rc.confidence);
  if (flag_unset("--seed")) rc.seed = static_cast<uint64_t>(kv.get_double("seed", static_cast<double>(rc.seed)));
}

void write_scene(const std::string& dir, const SyntheticScene& scene) {
  fs::create_directories(dir);
  write_cloud_bin(dir + "/cloud.bin", scene.cloud);
  write_pfm(dir + "/camera.pfm", scene.camera_image.pixels);
  write_pgm(dir + "/camera.pgm", scene.camera_image.pixels);
  write_pfm(dir + "/camera_depth.pfm", scene.camera_depth.depths);
  write_pose_txt(dir + "/gt_pose.txt", scene.gt_extrinsics);
  atomic_write_text(dir + "/intrinsics.txt", format_intrinsics(scene.intrinsics));
}

int cmd_synth(const std::string& config_path, uint64_t seed, bool seed_set,
              const std::string& out_dir) {
  const KeyValueConfig kv = load_config(config_path);
  SceneConfig cfg;
  uint64_t use_seed = seed_set ? seed : static_cast<uint64_t>(kv.get_double("seed", 7));
  if (auto es = env_seed()) use_seed = *es;
  if (kv.entries.empty()) {
    cfg = SceneConfig::standard(use_seed);
  } else if (kv.has("preset_seed") || !kv.has("points")) {
    cfg = SceneConfig::standard(use_seed);
    if (kv.has("points") || kv.has("range_jitter")) {
      SceneConfig parsed = parse_scene_config(kv);
      cfg.ray_count = parsed.ray_count;
      cfg.range_jitter_sigma = parsed.range_jitter_sigma;
    }
  } else {
    cfg = parse_scene_config(kv);
  }
  const SyntheticScene scene = generate_scene(use_seed, cfg);
  write_scene(out_dir, scene);
  std::cout << "synth: wrote " << scene.cloud.points.size() << " points to " << out_dir
            << " (seed " << use_seed << ")\n";
  return kExitOk;
}

int cmd_project(const std::string& cloud_path, const std::string& pose_path,
                const std::string& intr_path, const std::string& out_prefix) {
  const PointCloud4D cloud = read_cloud_bin(cloud_path);
  const RigidTransform pose =
      pose_path.empty() ? RigidTransform::identity() : read_pose_txt(pose_path);
  const CameraIntrinsics K = read_intrinsics_file(intr_path);
  const Projection proj = project(cloud, pose, K);
  const fs::path parent = fs::path(out_prefix).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  write_pfm(out_prefix + "_intensity.pfm", proj.intensity.pixels);
  write_pfm(out_prefix + "_depth.pfm", proj.depth.depths);
  std::cout << "project: wrote " << out_prefix << "_intensity.pfm and _depth.pfm\n";
  return kExitOk;
}

struct CalibrateIo {
  std::string cloud_path, image_path, intr_path, out_dir, config_path;
  MatcherParams mp;
  RansacConfig rc;
};

int run_pipeline(const CalibrateIo& io, const CLI::App& app, bool matches_only) {
  const KeyValueConfig kv = load_config(io.config_path);
  MatcherParams mp = io.mp;
  RansacConfig rc = io.rc;
  apply_matcher_config(kv, app, mp);
  apply_ransac_config(kv, app, rc);
  if (auto es = env_seed()) rc.seed = *es;
  if (mp.theta_c <= 0.0 || mp.theta_c >= 1.0)
    throw InvalidConfig("theta_c must lie in (0, 1)");
  if (mp.window < 1 || mp.window % 2 == 0) throw InvalidConfig("window must be odd");

  const PointCloud4D cloud = read_cloud_bin(io.cloud_path);
  GrayImage image;
  image.pixels = read_pfm(io.image_path);
  const CameraIntrinsics K = read_intrinsics_file(io.intr_path);

  const PipelineResult pr = calibrate(cloud, image, K, mp, rc);
  fs::create_directories(io.out_dir);
  atomic_write_text(io.out_dir + "/matches.txt", format_match_dump(pr.fine, mp));
  if (matches_only) {
    std::cout << "match: " << pr.fine.size() << " fine matches ("
              << pr.coarse.matches.size() << " coarse)\n";
    return kExitOk;
  }

  std::ostringstream rep;
  rep << "coarse_matches " << pr.coarse.matches.size() << "\n"
      << "fine_matches " << pr.fine.size() << "\n"
      << "correspondences " << pr.correspondences.size() << "\n"
      << "filled_depth_lifts " << pr.lift_stats.filled << "\n";
  if (pr.status == PipelineStatus::success && pr.estimate) {
    rep << "status success\n"
        << "inliers "
        << std::count(pr.estimate->inlier_mask.begin(), pr.estimate->inlier_mask.end(), true)
        << "\nmean_reprojection_error " << pr.estimate->mean_reprojection_error << "\n";
    write_pose_txt(io.out_dir + "/pose.txt", pr.estimate->transform);
    atomic_write_text(io.out_dir + "/report.txt", rep.str());
    std::cout << "calibrate: success, pose written to " << io.out_dir << "/pose.txt\n";
    return kExitOk;
  }
  rep << "status "
      << (pr.status == PipelineStatus::no_consensus ? "no_consensus"
                                                    : "insufficient_correspondences")
      << "\n";
  atomic_write_text(io.out_dir + "/report.txt", rep.str());
  std::cerr << "calibrate: registration failed ("
            << (pr.status == PipelineStatus::no_consensus ? "no consensus"
                                                          : "fewer than 4 correspondences")
            << ")\n";
  return kExitRegistration;
}

int cmd_eval(const std::string& config_path, const CLI::App& app, BenchmarkConfig cfg) {
  const KeyValueConfig kv = load_config(config_path);
  auto flag_unset = [&](const std::string& name) {
    const CLI::Option* o = app.get_option_no_throw(name);
    return o == nullptr || o->count() == 0;
  };
  if (flag_unset("--scenes")) cfg.scene_count = kv.get_int("scenes", cfg.scene_count);
  if (flag_unset("--seed"))
    cfg.seed = static_cast<uint64_t>(kv.get_double("seed", static_cast<double>(cfg.seed)));
  if (flag_unset("--jobs")) cfg.jobs = kv.get_int("jobs", cfg.jobs);
  if (flag_unset("--translation"))
    cfg.perturbation.max_translation = kv.get_double("max_translation", cfg.perturbation.max_translation);
  if (flag_unset("--rotation"))
    cfg.perturbation.max_rotation_deg = kv.get_double("max_rotation_deg", cfg.perturbation.max_rotation_deg);
  if (flag_unset("--epi-thresh")) cfg.epi_thresh = kv.get_double("epi_thresh", cfg.epi_thresh);
  apply_matcher_config(kv, app, cfg.matcher);
  apply_ransac_config(kv, app, cfg.ransac);
  if (auto es = env_seed()) cfg.seed = *es;
  if (cfg.scene_count < 1) throw InvalidConfig("scenes must be positive");
  if (cfg.jobs < 1) throw InvalidConfig("jobs must be positive");

  const MetricsReport report = run_benchmark(cfg);
  std::cout << format_report_table(report, cfg);
  if (report.failure_count == cfg.scene_count) return kExitRegistration;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LiDAR-camera extrinsic registration toolkit"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic scene");
  std::string synth_cfg, synth_out = "scene";
  uint64_t synth_seed = 7;
  synth->add_option("--config", synth_cfg, "Scene config file");
  auto* synth_seed_opt = synth->add_option("--seed", synth_seed, "Scene seed");
  synth->add_option("--out", synth_out, "Output directory");

  // project
  auto* proj = app.add_subcommand("project", "Project a cloud into a virtual view");
  std::string proj_cloud, proj_pose, proj_intr, proj_out = "view";
  proj->add_option("--cloud", proj_cloud, "Cloud .bin file")->required();
  proj->add_option("--pose", proj_pose, "Pose file (default identity)");
  proj->add_option("--intrinsics", proj_intr, "Intrinsics file")->required();
  proj->add_option("--out", proj_out, "Output prefix");

  auto add_pipeline_flags = [](CLI::App* cmd, CalibrateIo& io) {
    cmd->add_option("--cloud", io.cloud_path, "Cloud .bin file")->required();
    cmd->add_option("--image", io.image_path, "Camera image (PFM)")->required();
    cmd->add_option("--intrinsics", io.intr_path, "Intrinsics file")->required();
    cmd->add_option("--out", io.out_dir, "Output directory")->required();
    cmd->add_option("--config", io.config_path, "Parameter config file");
    cmd->add_option("--theta-c", io.mp.theta_c, "Coarse confidence threshold");
    cmd->add_option("--sim-temp", io.mp.sim_temperature, "Similarity temperature");
    cmd->add_option("--fine-temp", io.mp.fine_temperature, "Fine softmax temperature");
    cmd->add_option("--window", io.mp.window, "Fine refinement window (odd)");
    cmd->add_option("--fill-radius", io.mp.fill_radius, "Nearest-fill radius, pixels");
    cmd->add_option("--rerender", io.mp.rerender_iterations,
                    "Extra re-render match/solve passes");
    cmd->add_option("--max-iters", io.rc.max_iters, "RANSAC iteration cap");
    cmd->add_option("--inlier-threshold", io.rc.inlier_threshold,
                    "RANSAC inlier threshold, pixels");
    cmd->add_option("--confidence", io.rc.confidence, "RANSAC confidence");
    cmd->add_option("--seed", io.rc.seed, "RANSAC seed");
  };

  auto* match = app.add_subcommand("match", "Coarse-to-fine matching only");
  CalibrateIo match_io;
  add_pipeline_flags(match, match_io);

  auto* calib = app.add_subcommand("calibrate", "Full extrinsic calibration");
  CalibrateIo calib_io;
  add_pipeline_flags(calib, calib_io);

  // eval
  auto* eval = app.add_subcommand("eval", "Run the synthetic benchmark");
  std::string eval_cfg;
  BenchmarkConfig bcfg;
  eval->add_option("--config", eval_cfg, "Benchmark config file");
  eval->add_option("--scenes", bcfg.scene_count, "Number of scenes");
  eval->add_option("--seed", bcfg.seed, "Benchmark seed");
  eval->add_option("--jobs", bcfg.jobs, "Parallel workers");
  eval->add_option("--translation", bcfg.perturbation.max_translation,
                   "Perturbation disc radius, meters");
  eval->add_option("--rotation", bcfg.perturbation.max_rotation_deg,
                   "Perturbation yaw range, degrees");
  eval->add_option("--epi-thresh", bcfg.epi_thresh, "Epipolar precision threshold");
  eval->add_option("--out", bcfg.out_dir, "Artifact output directory");
  eval->add_option("--theta-c", bcfg.matcher.theta_c, "Coarse confidence threshold");
  eval->add_option("--sim-temp", bcfg.matcher.sim_temperature, "Similarity temperature");
  eval->add_option("--fine-temp", bcfg.matcher.fine_temperature, "Fine softmax temperature");
  eval->add_option("--window", bcfg.matcher.window, "Fine refinement window (odd)");
  eval->add_option("--fill-radius", bcfg.matcher.fill_radius, "Nearest-fill radius, pixels");
  eval->add_option("--rerender", bcfg.matcher.rerender_iterations,
                   "Extra re-render match/solve passes");
  eval->add_option("--max-iters", bcfg.ransac.max_iters, "RANSAC iteration cap");
  eval->add_option("--inlier-threshold", bcfg.ransac.inlier_threshold,
                   "RANSAC inlier threshold, pixels");
  eval->add_option("--confidence", bcfg.ransac.confidence, "RANSAC confidence");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (synth->parsed())
      return cmd_synth(synth_cfg, synth_seed, synth_seed_opt->count() > 0, synth_out);
    if (proj->parsed()) return cmd_project(proj_cloud, proj_pose, proj_intr, proj_out);
    if (match->parsed()) return run_pipeline(match_io, *match, /*matches_only=*/true);
    if (calib->parsed()) return run_pipeline(calib_io, *calib, /*matches_only=*/false);
    if (eval->parsed()) return cmd_eval(eval_cfg, *eval, bcfg);
  } catch (const InvalidConfig& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const EmptyProjection& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRegistration;
  } catch (const InsufficientCorrespondences& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRegistration;
  } catch (const NoConsensus& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRegistration;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}
