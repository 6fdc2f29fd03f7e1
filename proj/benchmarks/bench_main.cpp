// Microbenchmarks for the hot paths: sampling, neighbor queries, the
// Chamfer metric, convolution, and the splat renderer. Run with
// --benchmark_filter=<regex> to narrow down.

#include <benchmark/benchmark.h>

#include <vector>

#include "pcsm/codec.hpp"
#include "pcsm/geometry.hpp"
#include "pcsm/metrics.hpp"
#include "pcsm/rng.hpp"
#include "pcsm/tensor.hpp"

namespace {

pcsm::PointCloud random_cloud(int n, std::uint64_t seed) {
  pcsm::Rng rng(pcsm::mix_seed(seed));
  pcsm::PointCloud c;
  c.points.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    c.points.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
  return c;
}

void bm_fps(benchmark::State& state) {
  const pcsm::PointCloud cloud = random_cloud(static_cast<int>(state.range(0)), 1);
  const int m = static_cast<int>(state.range(0)) / 8;
  for (auto _ : state) benchmark::DoNotOptimize(pcsm::fps(cloud, m));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_fps)->Arg(1024)->Arg(4096);

void bm_knn(benchmark::State& state) {
  const pcsm::PointCloud cloud = random_cloud(static_cast<int>(state.range(0)), 2);
  for (auto _ : state)
    benchmark::DoNotOptimize(pcsm::knn(cloud, cloud.points[17], 64));
}
BENCHMARK(bm_knn)->Arg(1024)->Arg(4096);

void bm_grid_nearest(benchmark::State& state) {
  const pcsm::PointCloud cloud = random_cloud(static_cast<int>(state.range(0)), 3);
  const pcsm::PointCloud queries = random_cloud(256, 4);
  const pcsm::GridIndex index(cloud);
  for (auto _ : state)
    for (const pcsm::Vec3& q : queries.points) benchmark::DoNotOptimize(index.nearest(q));
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(bm_grid_nearest)->Arg(1024)->Arg(16384);

void bm_chamfer(benchmark::State& state) {
  const pcsm::PointCloud a = random_cloud(static_cast<int>(state.range(0)), 5);
  const pcsm::PointCloud b = random_cloud(static_cast<int>(state.range(0)), 6);
  for (auto _ : state) benchmark::DoNotOptimize(pcsm::chamfer(a, b));
}
BENCHMARK(bm_chamfer)->Arg(1024)->Arg(4096);

void bm_d1_psnr(benchmark::State& state) {
  const pcsm::PointCloud a = random_cloud(static_cast<int>(state.range(0)), 7);
  pcsm::PointCloud b = a;
  pcsm::Rng rng(pcsm::mix_seed(8));
  for (pcsm::Vec3& p : b.points) p[0] += 0.01 * rng.gaussian();
  for (auto _ : state) benchmark::DoNotOptimize(pcsm::evaluate(a, b));
}
BENCHMARK(bm_d1_psnr)->Arg(1024);

void bm_conv2d_forward(benchmark::State& state) {
  pcsm::Rng rng(pcsm::mix_seed(9));
  const int hw = static_cast<int>(state.range(0));
  std::vector<double> xv(static_cast<std::size_t>(4 * hw * hw));
  for (double& v : xv) v = rng.uniform(-1, 1);
  pcsm::Tensor x = pcsm::Tensor::constant({1, 4, hw, hw}, xv);
  std::vector<double> wv(static_cast<std::size_t>(8 * 4 * 3 * 3));
  for (double& v : wv) v = rng.uniform(-0.3, 0.3);
  pcsm::Tensor w = pcsm::Tensor::constant({8, 4, 3, 3}, wv);
  pcsm::Tensor b = pcsm::Tensor::zeros({8});
  for (auto _ : state) benchmark::DoNotOptimize(pcsm::nn::conv2d(x, w, b, 1, 1));
}
BENCHMARK(bm_conv2d_forward)->Arg(32)->Arg(64);

void bm_render(benchmark::State& state) {
  const pcsm::PointCloud cloud = random_cloud(static_cast<int>(state.range(0)), 10);
  pcsm::CameraParams cams;
  for (int v = 0; v < 4; ++v) {
    cams.azimuth.push_back(1.57 * v);
    cams.elevation.push_back(0.3);
    cams.distance.push_back(3.0);
  }
  for (auto _ : state)
    benchmark::DoNotOptimize(pcsm::render_views(cloud, cams, 32, 32, 1.0));
}
BENCHMARK(bm_render)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();
