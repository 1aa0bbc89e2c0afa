#include <benchmark/benchmark.h>

#include <algorithm>
#include <map>
#include <span>

#include "evrecon/depth_opt.hpp"
#include "evrecon/events.hpp"
#include "evrecon/flow.hpp"
#include "evrecon/pose_opt.hpp"
#include "evrecon/sim.hpp"
#include "evrecon/warp.hpp"

using namespace evrecon;

namespace {

struct Pair {
  CameraIntrinsics camera;
  View a, b;
  Pose xi;
};

// Two views of the default scene at the given resolution.
const Pair& pair_at(int size) {
  static std::map<int, Pair> cache;
  auto it = cache.find(size);
  if (it != cache.end()) return it->second;
  Pair p{CameraIntrinsics(size, size, (size - 1) / 2.0, (size - 1) / 2.0, size, size), {}, {}, {}};
  const SyntheticScene scene(default_two_plane_scene());
  const Trajectory traj(default_keyframes(1.0));
  p.a = render_view(scene, traj.at(0.2), p.camera, 0.2);
  p.b = render_view(scene, traj.at(0.3), p.camera, 0.3);
  p.xi = traj.relative(0.2, 0.3);
  return cache.emplace(size, std::move(p)).first->second;
}

void BM_InverseWarp(benchmark::State& state) {
  const Pair& p = pair_at(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(inverse_warp(p.b.image.pixels(), p.a.depth, p.xi, p.camera));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_InverseWarp)->Arg(64)->Arg(128)->Arg(256);

void BM_InverseWarpJacobian(benchmark::State& state) {
  const Pair& p = pair_at(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(inverse_warp_jacobian(p.b.image.pixels(), p.a.depth, p.xi, p.camera));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_InverseWarpJacobian)->Arg(64)->Arg(128);

void BM_ForwardSplat(benchmark::State& state) {
  const Pair& p = pair_at(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(forward_splat(p.a.image.pixels(), p.a.depth, p.xi, p.camera));
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}
BENCHMARK(BM_ForwardSplat)->Arg(64)->Arg(128)->Arg(256);

void BM_PhotometricLoss(benchmark::State& state) {
  const Pair& p = pair_at(static_cast<int>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(
        photometric_loss(p.a.image.pixels(), p.b.image.pixels(), p.a.depth, p.b.depth, p.xi, p.camera));
}
BENCHMARK(BM_PhotometricLoss)->Arg(64)->Arg(128);

void BM_SmoothnessLoss(benchmark::State& state) {
  const Pair& p = pair_at(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(smoothness_loss(p.a.depth, p.a.image.pixels(), 10.0));
}
BENCHMARK(BM_SmoothnessLoss)->Arg(64)->Arg(128);

void BM_PoseLoss(benchmark::State& state) {
  const Pair& p = pair_at(static_cast<int>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(pose_photometric_loss(p.a.image.pixels(), p.b.image.pixels(), p.a.depth, p.xi, p.camera));
}
BENCHMARK(BM_PoseLoss)->Arg(64)->Arg(128);

void BM_Flow(benchmark::State& state) {
  const Pair& p = pair_at(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(estimate_flow(p.a.image.pixels(), p.b.image.pixels()));
}
BENCHMARK(BM_Flow)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_DepthStage(benchmark::State& state) {
  const Pair& p = pair_at(static_cast<int>(state.range(0)));
  DepthStageSettings s;
  s.optimizer.max_iterations = 100;
  s.optimizer.convergence_tol = 0.0;
  const DepthMap init(ImageGrid(p.camera.width(), p.camera.height(), 1.0));
  for (auto _ : state) benchmark::DoNotOptimize(estimate_depth_and_pose(p.a.image, p.b.image, init, init, p.camera, s));
}
BENCHMARK(BM_DepthStage)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_PseudoIntensity(benchmark::State& state) {
  const int size = 128;
  const SyntheticScene scene(default_two_plane_scene());
  const CameraIntrinsics cam(size, size, 63.5, 63.5, size, size);
  const EventStream events = generate_events(scene, Trajectory(default_keyframes(1.0)), cam, 0.1, 1000.0, 0.2, 0.25);
  const std::span<const Event> block(events.events().data(), std::min<std::size_t>(events.size(), 2000));
  for (auto _ : state)
    benchmark::DoNotOptimize(pseudo_intensity(block, nullptr, size, size, PseudoIntensitySettings{}));
}
BENCHMARK(BM_PseudoIntensity);

}  // namespace

BENCHMARK_MAIN();
