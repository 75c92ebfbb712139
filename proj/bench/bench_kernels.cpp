// OpenMP kernels vs the serial reference, forward and backward, over batch
// sizes seen during rollouts (one group) and updates (a full minibatch).

#include "cgrpo/policy_net.hpp"
#include "cgrpo/rng.hpp"

#include <benchmark/benchmark.h>

#include <omp.h>

using namespace cgrpo;

namespace {

std::vector<double> random_obs(std::size_t rows) {
  Rng rng(derive_seed(1, Domain::Test));
  std::vector<double> obs(rows * kObsDim);
  for (double& v : obs) v = rng.uniform01();
  return obs;
}

template <void (*Forward)(const MlpParams&, std::span<const double>, Activations&)>
void BM_Forward(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const MlpParams p = MlpParams::init(3);
  const std::vector<double> obs = random_obs(rows);
  Activations act;
  for (auto _ : state) {
    Forward(p, obs, act);
    benchmark::DoNotOptimize(act.logits.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * rows));
}

template <void (*Forward)(const MlpParams&, std::span<const double>, Activations&),
          void (*Backward)(const MlpParams&, std::span<const double>, const Activations&, std::span<const double>,
                           MlpParams&)>
void BM_Backward(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const MlpParams p = MlpParams::init(3);
  const std::vector<double> obs = random_obs(rows);
  Activations act;
  Forward(p, obs, act);
  std::vector<double> dlogits(rows * kNumActions);
  Rng rng(7);
  for (double& v : dlogits) v = rng.normal();
  MlpParams grad;
  for (auto _ : state) {
    Backward(p, obs, act, dlogits, grad);
    benchmark::DoNotOptimize(grad.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * rows));
}

constexpr auto kParallelForward = static_cast<void (*)(const MlpParams&, std::span<const double>, Activations&)>(
    &cgrpo::forward_batch);
constexpr auto kParallelBackward =
    static_cast<void (*)(const MlpParams&, std::span<const double>, const Activations&, std::span<const double>,
                         MlpParams&)>(&cgrpo::backward_batch);

}  // namespace

BENCHMARK(BM_Forward<kParallelForward>)->Name("forward/openmp")->Arg(8)->Arg(64)->Arg(2048);
BENCHMARK(BM_Forward<&reference::forward_batch>)->Name("forward/reference")->Arg(8)->Arg(64)->Arg(2048);
BENCHMARK(BM_Backward<kParallelForward, kParallelBackward>)->Name("backward/openmp")->Arg(64)->Arg(2048);
BENCHMARK(BM_Backward<&reference::forward_batch, &reference::backward_batch>)
    ->Name("backward/reference")
    ->Arg(64)
    ->Arg(2048);

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  benchmark::AddCustomContext("omp_max_threads", std::to_string(omp_get_max_threads()));
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
