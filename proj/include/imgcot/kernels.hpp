#pragma once

#include <cstddef>
#include <vector>

namespace imgcot::kernels {

// Dense kernels behind the autodiff primitives. Every kernel has a serial
// reference and an OpenMP variant; the OpenMP variant parallelizes over output
// rows only, so each element is accumulated in the same order as the serial
// path and results are bitwise identical.

// Global switch, default on when compiled with OpenMP. Tests flip it to
// compare paths; the benchmark measures both.
bool parallel_enabled();
void set_parallel_enabled(bool on);
int max_threads();

// C[m,n] = A[m,k] * B[k,n], row-major.
void matmul_serial(const double* a, const double* b, double* c,
                   std::size_t m, std::size_t k, std::size_t n);
void matmul_omp(const double* a, const double* b, double* c,
                std::size_t m, std::size_t k, std::size_t n);
// Dispatches on the global switch and a size threshold.
void matmul(const double* a, const double* b, double* c,
            std::size_t m, std::size_t k, std::size_t n);

// Row-wise softmax over an m x n matrix (max-subtracted, in place allowed).
void softmax_rows_serial(const double* x, double* y, std::size_t m, std::size_t n);
void softmax_rows_omp(const double* x, double* y, std::size_t m, std::size_t n);
void softmax_rows(const double* x, double* y, std::size_t m, std::size_t n);

// Exact GELU (erf form) and its derivative.
void gelu_serial(const double* x, double* y, std::size_t n);
void gelu_omp(const double* x, double* y, std::size_t n);
void gelu(const double* x, double* y, std::size_t n);
void gelu_grad(const double* x, const double* dy, double* dx, std::size_t n);

}  // namespace imgcot::kernels
