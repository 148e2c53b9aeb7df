#include <benchmark/benchmark.h>

#include "xmreg/geometry.hpp"
#include "xmreg/matcher.hpp"
#include "xmreg/pnp.hpp"
#include "xmreg/rng.hpp"
#include "xmreg/scene.hpp"

using namespace xmreg;

namespace {

PointCloud4D make_cloud(int n) {
  SplitMix64 rng(42);
  PointCloud4D c;
  c.points.reserve(n);
  for (int i = 0; i < n; ++i)
    c.points.push_back({rng.uniform(-10, 10), rng.uniform(-8, 8),
                        rng.uniform(0.5, 40.0), rng.uniform()});
  return c;
}

void BM_project(benchmark::State& state) {
  const PointCloud4D cloud = make_cloud(static_cast<int>(state.range(0)));
  const CameraIntrinsics k{350.0, 350.0, 160.0, 120.0, 320, 240};
  for (auto _ : state) {
    benchmark::DoNotOptimize(project(cloud, RigidTransform::identity(), k));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_project)->Arg(10000)->Arg(100000);

void BM_dual_softmax(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  SplitMix64 rng(7);
  Eigen::MatrixXd s(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s(i, j) = rng.uniform(-4, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(dual_softmax(s));
  }
}
BENCHMARK(BM_dual_softmax)->Arg(64)->Arg(256)->Arg(1024);

void BM_epnp(benchmark::State& state) {
  SplitMix64 rng(9);
  const CameraIntrinsics k{400.0, 400.0, 320.0, 240.0, 640, 480};
  RigidTransform pose;
  pose.rotation =
      Eigen::AngleAxisd(0.1, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
  pose.translation = Eigen::Vector3d(0.2, -0.1, 0.3);
  std::vector<Correspondence3D2D> corrs;
  while (corrs.size() < static_cast<size_t>(state.range(0))) {
    Correspondence3D2D c;
    c.point3d = Eigen::Vector3d(rng.uniform(-2.5, 2.5), rng.uniform(-2.0, 2.0),
                                rng.uniform(6.0, 12.0));
    const Eigen::Vector3d q = pose.apply(c.point3d);
    if (q.z() <= 0.1) continue;
    c.pixel2d = Eigen::Vector2d(k.fx * q.x() / q.z() + k.cx, k.fy * q.y() / q.z() + k.cy);
    corrs.push_back(c);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(epnp(corrs, k));
  }
}
BENCHMARK(BM_epnp)->Arg(8)->Arg(64)->Arg(512);

void BM_scene_generation(benchmark::State& state) {
  SceneConfig cfg = SceneConfig::standard(3);
  cfg.ray_count = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_scene(3, cfg));
  }
}
BENCHMARK(BM_scene_generation)->Arg(20000)->Arg(80000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
