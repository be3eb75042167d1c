// Serial reference vs OpenMP kernels. Run with OMP_NUM_THREADS set to compare
// thread counts; the two variants produce identical numbers, only time differs.

#include <benchmark/benchmark.h>

#include <cmath>

#include "sdfo/gp.hpp"
#include "sdfo/kernels.hpp"
#include "sdfo/rng.hpp"

using namespace sdfo;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd points(Eigen::Index n, Eigen::Index m, std::uint64_t seed) {
  Rng rng(seed);
  return MatrixXd::NullaryExpr(n, m, [&] { return rng.uniform(-1.0, 1.0); });
}

const KernelSpec kSq{KernelKind::sqexp, 1};
const KernelParams kHp{0.4, 1.0, 0.0};

GprModel model_of(Eigen::Index n) {
  const MatrixXd x = points(n, 3, 1);
  VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = std::sin(3 * x(i, 0)) + x(i, 1) * x(i, 2);
  return gpr_condition(x, y, kSq, kHp, 1e-8);
}

// a point function with some arithmetic in it, like a cheap black box
double bumpy(const VectorXd& x) {
  double s = 0.0;
  for (int k = 1; k <= 40; ++k) s += std::sin(k * x[0]) * std::cos(k * x[1]) / k;
  return s;
}

void BM_gram_serial(benchmark::State& st) {
  const MatrixXd a = points(st.range(0), 3, 2), b = points(st.range(0), 3, 3);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::gram_serial(kSq, kHp, a, b));
  st.SetItemsProcessed(st.iterations() * st.range(0) * st.range(0));
}
void BM_gram_parallel(benchmark::State& st) {
  const MatrixXd a = points(st.range(0), 3, 2), b = points(st.range(0), 3, 3);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::gram_parallel(kSq, kHp, a, b));
  st.SetItemsProcessed(st.iterations() * st.range(0) * st.range(0));
}

void BM_predict_rows_serial(benchmark::State& st) {
  const auto m = model_of(st.range(0));
  const MatrixXd q = points(2500, 3, 4);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::predict_rows_serial(m, q));
  st.SetItemsProcessed(st.iterations() * q.rows());
}
void BM_predict_rows_parallel(benchmark::State& st) {
  const auto m = model_of(st.range(0));
  const MatrixXd q = points(2500, 3, 4);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::predict_rows_parallel(m, q));
  st.SetItemsProcessed(st.iterations() * q.rows());
}

void BM_evaluate_rows_serial(benchmark::State& st) {
  const MatrixXd q = points(st.range(0), 2, 5);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::evaluate_rows_serial(bumpy, q));
  st.SetItemsProcessed(st.iterations() * q.rows());
}
void BM_evaluate_rows_parallel(benchmark::State& st) {
  const MatrixXd q = points(st.range(0), 2, 5);
  for (auto _ : st) benchmark::DoNotOptimize(kernels::evaluate_rows_parallel(bumpy, q));
  st.SetItemsProcessed(st.iterations() * q.rows());
}

}  // namespace

BENCHMARK(BM_gram_serial)->Arg(128)->Arg(512);
BENCHMARK(BM_gram_parallel)->Arg(128)->Arg(512);
BENCHMARK(BM_predict_rows_serial)->Arg(32)->Arg(128);
BENCHMARK(BM_predict_rows_parallel)->Arg(32)->Arg(128);
BENCHMARK(BM_evaluate_rows_serial)->Arg(10000);
BENCHMARK(BM_evaluate_rows_parallel)->Arg(10000);

BENCHMARK_MAIN();
