// Serial reference against the OpenMP row kernels. Run with
// CONIC_SCAN_THREADS=n to pin the worker count.
#include "conicscan/parallel.hpp"
#include "conicscan/pipeline.hpp"
#include "conicscan/synth.hpp"

#include <benchmark/benchmark.h>

using namespace conicscan;

namespace {

const DepthFrame& frame_for(int width) {
  static std::vector<std::pair<int, DepthFrame>> cache;
  for (const auto& [w, f] : cache)
    if (w == width) return f;
  const auto k = CameraIntrinsics::for_resolution(width, width * 3 / 4);
  cache.emplace_back(width, render(three_object_scene(0.005, 1), k));
  return cache.back().second;
}

void BM_Extract(benchmark::State& state, Execution exec) {
  const auto& f = frame_for(static_cast<int>(state.range(0)));
  const DetectorConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(extract_frame_ellipses(f, cfg.segmenter, exec));
  state.SetItemsProcessed(state.iterations() * f.width() * f.height());
  state.counters["workers"] = exec == Execution::Serial ? 1 : worker_count();
}

void BM_Detect(benchmark::State& state, Execution exec) {
  const auto& f = frame_for(static_cast<int>(state.range(0)));
  const DetectorConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(detect_frame(f, cfg, exec));
  state.SetItemsProcessed(state.iterations() * f.width() * f.height());
  state.counters["fps"] = benchmark::Counter(static_cast<double>(state.iterations()), benchmark::Counter::kIsRate);
}

void BM_Render(benchmark::State& state, bool parallel) {
  const auto k = CameraIntrinsics::for_resolution(static_cast<int>(state.range(0)), static_cast<int>(state.range(0)) * 3 / 4);
  const auto scene = three_object_scene(0.005, 1);
  for (auto _ : state) benchmark::DoNotOptimize(parallel ? render(scene, k) : render_serial(scene, k));
}

}  // namespace

BENCHMARK_CAPTURE(BM_Extract, serial, Execution::Serial)->Arg(160)->Arg(320)->Arg(640)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Extract, parallel, Execution::Parallel)->Arg(160)->Arg(320)->Arg(640)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Detect, serial, Execution::Serial)->Arg(320)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Detect, parallel, Execution::Parallel)->Arg(320)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Render, serial, false)->Arg(320)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Render, parallel, true)->Arg(320)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
