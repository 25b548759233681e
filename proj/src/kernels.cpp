#include "imgcot/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace imgcot::kernels {

namespace {
std::atomic<bool> g_parallel{
#ifdef _OPENMP
    true
#else
    false
#endif
};

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kMatmulParallelThreshold = 64 * 1024;
constexpr std::size_t kEltwiseParallelThreshold = 16 * 1024;

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline void matmul_row(const double* a, const double* b, double* c,
                       std::size_t k, std::size_t n) {
    std::memset(c, 0, n * sizeof(double));
    for (std::size_t p = 0; p < k; ++p) {
        const double av = a[p];
        if (av == 0.0) continue;
        const double* brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) c[j] += av * brow[j];
    }
}

inline void softmax_row(const double* x, double* y, std::size_t n) {
    double mx = x[0];
    for (std::size_t j = 1; j < n; ++j) mx = x[j] > mx ? x[j] : mx;
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        y[j] = std::exp(x[j] - mx);
        sum += y[j];
    }
    const double inv = 1.0 / sum;
    for (std::size_t j = 0; j < n; ++j) y[j] *= inv;
}

inline double gelu_one(double x) {
    return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
}
}  // namespace

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }
void set_parallel_enabled(bool on) { g_parallel.store(on, std::memory_order_relaxed); }

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void matmul_serial(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) matmul_row(a + i * k, b, c + i * n, k, n);
}

void matmul_omp(const double* a, const double* b, double* c,
                std::size_t m, std::size_t k, std::size_t n) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
        matmul_row(a + static_cast<std::size_t>(i) * k, b,
                   c + static_cast<std::size_t>(i) * n, k, n);
    }
#else
    matmul_serial(a, b, c, m, k, n);
#endif
}

void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n) {
    if (parallel_enabled() && m > 1 && m * k * n >= kMatmulParallelThreshold) {
        matmul_omp(a, b, c, m, k, n);
    } else {
        matmul_serial(a, b, c, m, k, n);
    }
}

void softmax_rows_serial(const double* x, double* y, std::size_t m, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) softmax_row(x + i * n, y + i * n, n);
}

void softmax_rows_omp(const double* x, double* y, std::size_t m, std::size_t n) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
        softmax_row(x + static_cast<std::size_t>(i) * n,
                    y + static_cast<std::size_t>(i) * n, n);
    }
#else
    softmax_rows_serial(x, y, m, n);
#endif
}

void softmax_rows(const double* x, double* y, std::size_t m, std::size_t n) {
    if (parallel_enabled() && m > 1 && m * n >= kEltwiseParallelThreshold) {
        softmax_rows_omp(x, y, m, n);
    } else {
        softmax_rows_serial(x, y, m, n);
    }
}

void gelu_serial(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = gelu_one(x[i]);
}

void gelu_omp(const double* x, double* y, std::size_t n) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        y[i] = gelu_one(x[static_cast<std::size_t>(i)]);
    }
#else
    gelu_serial(x, y, n);
#endif
}

void gelu(const double* x, double* y, std::size_t n) {
    if (parallel_enabled() && n >= kEltwiseParallelThreshold) {
        gelu_omp(x, y, n);
    } else {
        gelu_serial(x, y, n);
    }
}

void gelu_grad(const double* x, const double* dy, double* dx, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = x[i];
        const double cdf = 0.5 * (1.0 + std::erf(xi * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * xi * xi);
        dx[i] += dy[i] * (cdf + xi * pdf);
    }
}

}  // namespace imgcot::kernels
