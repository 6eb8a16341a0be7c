// Benchmarks the parallel matrix kernels against the serial reference and
// checks that both produce bit-identical results.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "dgrd/kernels.hpp"
#include "dgrd/rng.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct BenchResult {
  double serial_s = 0.0;
  double parallel_s = 0.0;
  double max_diff = 0.0;
};

template <typename SerialFn, typename ParallelFn>
BenchResult bench(SerialFn serial, ParallelFn parallel, std::vector<double>& c_serial,
                  std::vector<double>& c_parallel, int reps) {
  BenchResult r;
  auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) serial();
  r.serial_s = seconds_since(t0) / reps;
  t0 = Clock::now();
  for (int i = 0; i < reps; ++i) parallel();
  r.parallel_s = seconds_since(t0) / reps;
  for (size_t i = 0; i < c_serial.size(); ++i) {
    r.max_diff = std::max(r.max_diff, std::abs(c_serial[i] - c_parallel[i]));
  }
  return r;
}

}  // namespace

int main() {
  std::printf("openmp: %s, max threads: %d\n", dgrd::kernels::openmp_enabled() ? "on" : "off",
              dgrd::kernels::max_threads());
  std::printf("%-12s %8s %12s %12s %10s %10s\n", "kernel", "size", "serial(ms)", "parallel(ms)",
              "speedup", "max|diff|");

  dgrd::Rng rng(42);
  for (const int n : {64, 256, 1024}) {
    const size_t nn = static_cast<size_t>(n) * n;
    std::vector<double> a(nn), b(nn), cs(nn), cp(nn);
    for (auto& x : a) x = rng.uniform01() - 0.5;
    for (auto& x : b) x = rng.uniform01() - 0.5;
    const int reps = n >= 1024 ? 3 : 20;
    const double flops = 2.0 * n * static_cast<double>(n) * n;

    const auto mm = bench([&] { dgrd::kernels::serial::matmul(a.data(), b.data(), cs.data(), n, n, n); },
                          [&] { dgrd::kernels::matmul(a.data(), b.data(), cp.data(), n, n, n); }, cs,
                          cp, reps);
    std::printf("%-12s %8d %12.3f %12.3f %9.2fx %10.3g  (%.2f GFLOP/s parallel)\n", "matmul", n,
                mm.serial_s * 1e3, mm.parallel_s * 1e3, mm.serial_s / mm.parallel_s, mm.max_diff,
                flops / mm.parallel_s * 1e-9);

    const auto at = bench(
        [&] { dgrd::kernels::serial::matmul_at(a.data(), b.data(), cs.data(), n, n, n); },
        [&] { dgrd::kernels::matmul_at(a.data(), b.data(), cp.data(), n, n, n); }, cs, cp, reps);
    std::printf("%-12s %8d %12.3f %12.3f %9.2fx %10.3g\n", "matmul_at", n, at.serial_s * 1e3,
                at.parallel_s * 1e3, at.serial_s / at.parallel_s, at.max_diff);

    const auto bt = bench(
        [&] { dgrd::kernels::serial::matmul_bt(a.data(), b.data(), cs.data(), n, n, n); },
        [&] { dgrd::kernels::matmul_bt(a.data(), b.data(), cp.data(), n, n, n); }, cs, cp, reps);
    std::printf("%-12s %8d %12.3f %12.3f %9.2fx %10.3g\n", "matmul_bt", n, bt.serial_s * 1e3,
                bt.parallel_s * 1e3, bt.serial_s / bt.parallel_s, bt.max_diff);
  }
  return 0;
}
