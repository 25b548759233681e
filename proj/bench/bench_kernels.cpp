// Compares the serial reference kernels against the OpenMP variants and
// prints throughput plus speedup per shape. Row-only parallelization keeps
// the two paths bitwise identical, so the comparison is purely about speed.

#include <array>
#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "imgcot/kernels.hpp"
#include "imgcot/rng.hpp"

using namespace imgcot;
using Clock = std::chrono::steady_clock;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm-up
    const auto t0 = Clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

}  // namespace

int main() {
    Rng rng(1, 1);
    std::printf("threads available: %d\n\n", kernels::max_threads());
    std::printf("%-22s %12s %12s %9s\n", "kernel", "serial ms", "omp ms", "speedup");

    const std::vector<std::array<std::size_t, 3>> shapes = {
        {64, 64, 64}, {128, 128, 128}, {256, 256, 256}, {512, 64, 512}, {512, 512, 512}};
    for (const auto& [m, k, n] : shapes) {
        std::vector<double> a(m * k), b(k * n), c(m * n);
        for (auto& x : a) x = rng.uniform(-1.0, 1.0);
        for (auto& x : b) x = rng.uniform(-1.0, 1.0);
        const int reps = m * n * k > (1u << 24) ? 3 : 20;
        const double ts = time_ms(
            [&] { kernels::matmul_serial(a.data(), b.data(), c.data(), m, k, n); }, reps);
        const double tp = time_ms(
            [&] { kernels::matmul_omp(a.data(), b.data(), c.data(), m, k, n); }, reps);
        char label[64];
        std::snprintf(label, sizeof(label), "matmul %zux%zux%zu", m, k, n);
        std::printf("%-22s %12.3f %12.3f %8.2fx\n", label, ts, tp, ts / tp);
    }

    for (std::size_t rows : {64u, 512u, 2048u}) {
        const std::size_t cols = 512;
        std::vector<double> x(rows * cols), y(rows * cols);
        for (auto& v : x) v = rng.uniform(-4.0, 4.0);
        const double ts = time_ms(
            [&] { kernels::softmax_rows_serial(x.data(), y.data(), rows, cols); }, 20);
        const double tp = time_ms(
            [&] { kernels::softmax_rows_omp(x.data(), y.data(), rows, cols); }, 20);
        char label[64];
        std::snprintf(label, sizeof(label), "softmax %zux%zu", rows, cols);
        std::printf("%-22s %12.3f %12.3f %8.2fx\n", label, ts, tp, ts / tp);
    }

    {
        const std::size_t n = 1 << 20;
        std::vector<double> x(n), y(n);
        for (auto& v : x) v = rng.uniform(-4.0, 4.0);
        const double ts =
            time_ms([&] { kernels::gelu_serial(x.data(), y.data(), n); }, 10);
        const double tp = time_ms([&] { kernels::gelu_omp(x.data(), y.data(), n); }, 10);
        std::printf("%-22s %12.3f %12.3f %8.2fx\n", "gelu 1M", ts, tp, ts / tp);
    }
    return 0;
}
