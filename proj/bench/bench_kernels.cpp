#include <benchmark/benchmark.h>

#include "cmi/critic.hpp"
#include "cmi/kernels.hpp"
#include "cmi/objectives.hpp"
#include "cmi/rng.hpp"

using namespace cmi;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(r, c);
    for (double& v : m.data()) v = rng.normal();
    return m;
}

template <Matrix (*Kernel)(const Matrix&, const Matrix&)>
void bm_matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix a = random_matrix(n, n, 1);
    const Matrix b = random_matrix(n, n, 2);
    for (auto _ : state) benchmark::DoNotOptimize(Kernel(a, b));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

template <Matrix (*Kernel)(const Matrix&)>
void bm_logsumexp(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix a = random_matrix(n, n, 3);
    for (auto _ : state) benchmark::DoNotOptimize(Kernel(a));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}

// One forward/backward pass of the C-InfoNCE objective at the default batch size.
void bm_c_infonce_step(benchmark::State& state) {
    Rng rng(4);
    const std::size_t n = 64;
    const std::size_t d_z = static_cast<std::size_t>(state.range(0));
    Critic critic = Critic::bilinear_z(1, 1, d_z, CriticOptions{}, rng);
    const std::vector<TripleBatch> batches{{random_matrix(n, 1, 5), random_matrix(n, 1, 6), random_matrix(n, d_z, 7)}};
    for (auto _ : state) {
        Tape tape;
        Var v = c_infonce_value(tape, batches, critic);
        tape.backward(v);
        benchmark::DoNotOptimize(tape.scalar(v));
    }
}

}  // namespace

BENCHMARK(bm_matmul<kernels::serial::matmul>)->Name("matmul/serial")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(bm_matmul<kernels::omp::matmul>)->Name("matmul/omp")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(bm_matmul<kernels::serial::matmul_nt>)->Name("matmul_nt/serial")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(bm_matmul<kernels::omp::matmul_nt>)->Name("matmul_nt/omp")->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(bm_logsumexp<kernels::serial::row_logsumexp>)->Name("row_logsumexp/serial")->Range(64, 1024);
BENCHMARK(bm_logsumexp<kernels::omp::row_logsumexp>)->Name("row_logsumexp/omp")->Range(64, 1024);
BENCHMARK(bm_c_infonce_step)->Name("c_infonce_step")->Arg(20)->Arg(100);

BENCHMARK_MAIN();
