#include <benchmark/benchmark.h>

#include <filesystem>

#include "coordsim/codec.hpp"
#include "coordsim/harness.hpp"
#include "coordsim/polar.hpp"
#include "coordsim/region.hpp"

namespace {

using namespace coordsim;

polar::SourceModel bundled(const char* name) {
  return polar::model_from_json(
      harness::load_json(std::filesystem::path(COORDSIM_DATA_DIR) / "models" / (std::string(name) + ".json")));
}

void BM_PolarTransform(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  prob::Rng rng(1);
  polar::Bits x(n);
  for (auto& b : x) b = rng.bit();
  for (auto _ : state) {
    polar::polar_transform_inplace(x);
    benchmark::DoNotOptimize(x.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_PolarTransform)->RangeMultiplier(4)->Range(64, 16384);

void BM_SuccessiveCancellation(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto m = bundled("bsc_constant_w");
  prob::Rng rng(2);
  const auto blk = polar::draw_block(m, n, rng);
  const auto evidence = polar::x_evidence(m, blk.y);
  polar::ScEngine engine(n);
  polar::Bits out(n);
  for (auto _ : state) {
    engine.run(evidence, out, [](std::size_t, double p1) { return p1 > 0.5 ? 1u : 0u; });
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_SuccessiveCancellation)->RangeMultiplier(4)->Range(64, 16384);

void BM_ProfileEstimate(benchmark::State& state) {
  const auto m = bundled("bsc_constant_w");
  const polar::PolarParams params{static_cast<std::size_t>(state.range(0)), 0.25, 512};
  for (auto _ : state) benchmark::DoNotOptimize(polar::estimate_profile(m, params, 3));
}
BENCHMARK(BM_ProfileEstimate)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_Trial(benchmark::State& state) {
  const auto m = bundled("bsc_constant_w");
  const polar::PolarParams params{static_cast<std::size_t>(state.range(0)), 0.25, 2000};
  const auto c = polar::construct(m, params, 4);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(codec::run_trial(m, c, params, 8, ++seed));
}
BENCHMARK(BM_Trial)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_RegionEvaluate(benchmark::State& state) {
  const auto m = bundled("planted_w2");
  const auto target = harness::target_from_model(m);
  const auto aux = harness::aux_from_model(m);
  for (auto _ : state) benchmark::DoNotOptimize(region::evaluate(target, aux));
}
BENCHMARK(BM_RegionEvaluate);

void BM_RegionSearch(benchmark::State& state) {
  const auto m = bundled("planted_w2");
  const auto target = harness::target_from_model(m);
  const region::SearchBudget budget{2, 500, 4, 1};
  for (auto _ : state) benchmark::DoNotOptimize(region::search_auxiliary(target, 2, budget));
}
BENCHMARK(BM_RegionSearch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
