// SPDX-License-Identifier: Apache-2.0
//
// Serial reference against the OpenMP kernels: dense products and the
// per-batch prompt objective.

#include <benchmark/benchmark.h>

#include <vector>

#include "mpt/kernels.hpp"
#include "mpt/objectives.hpp"
#include "mpt/prompts.hpp"
#include "mpt/taskgen.hpp"
#include "mpt/trainer.hpp"

using namespace mpt;

namespace {

std::vector<double> filled(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

template <bool Parallel>
void BM_gemm_nn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const kernels::Dims d{n, n, n};
  const auto a = filled(n * n, 1), b = filled(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::parallel::gemm_nn(d, a, b, c);
    else
      kernels::serial::gemm_nn(d, a, b, c);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}

template <Exec E>
void BM_prompt_objective(benchmark::State& state) {
  const RunConfig cfg;
  const FrozenModel model = init_model(cfg.model, Rng(cfg.model_seed), cfg.init);
  SuiteSpec spec = cfg.suite_spec();
  spec.sizes = {static_cast<std::size_t>(state.range(0)), 1, 1};
  const Suite suite = generate_suite(spec, cfg.data_seed);
  Rng rng(3);
  const VanillaPrompt student = init_vanilla_prompt(model, cfg.prompt_length, rng);
  const VanillaPrompt teacher = init_vanilla_prompt(model, cfg.prompt_length, rng);
  const auto& batch = suite.sources[0].train;
  for (auto _ : state) {
    PromptObjective r =
        prompt_objective(model, student.matrix, batch, &teacher.matrix, cfg.distill_config(), E);
    benchmark::DoNotOptimize(r.l_total);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * batch.size()));
}

}  // namespace

BENCHMARK(BM_gemm_nn<false>)->Name("gemm_nn/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_gemm_nn<true>)->Name("gemm_nn/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_prompt_objective<Exec::kSerial>)->Name("prompt_objective/serial")->Arg(64);
BENCHMARK(BM_prompt_objective<Exec::kParallel>)->Name("prompt_objective/parallel")->Arg(64);

BENCHMARK_MAIN();
