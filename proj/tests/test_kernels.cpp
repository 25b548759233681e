#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "imgcot/kernels.hpp"
#include "imgcot/rng.hpp"
#include "imgcot/tensor.hpp"

using namespace imgcot;

namespace {

std::vector<double> random_matrix(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-2.0, 2.0);
    return v;
}

struct ParallelGuard {
    bool saved = kernels::parallel_enabled();
    ~ParallelGuard() { kernels::set_parallel_enabled(saved); }
};

}  // namespace

TEST_CASE("matmul: OpenMP and serial paths agree bitwise") {
    Rng rng(7, 1);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t m = 1 + rng.below(40);
        const std::size_t k = 1 + rng.below(40);
        const std::size_t n = 1 + rng.below(40);
        auto a = random_matrix(m * k, rng);
        auto b = random_matrix(k * n, rng);
        std::vector<double> c1(m * n), c2(m * n);
        kernels::matmul_serial(a.data(), b.data(), c1.data(), m, k, n);
        kernels::matmul_omp(a.data(), b.data(), c2.data(), m, k, n);
        CHECK(c1 == c2);
    }
}

TEST_CASE("softmax rows: OpenMP and serial paths agree bitwise") {
    Rng rng(8, 1);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t m = 1 + rng.below(30);
        const std::size_t n = 1 + rng.below(30);
        auto x = random_matrix(m * n, rng);
        std::vector<double> y1(m * n), y2(m * n);
        kernels::softmax_rows_serial(x.data(), y1.data(), m, n);
        kernels::softmax_rows_omp(x.data(), y2.data(), m, n);
        CHECK(y1 == y2);
        // Rows sum to 1.
        for (std::size_t i = 0; i < m; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += y1[i * n + j];
            CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("gelu: OpenMP and serial paths agree bitwise") {
    Rng rng(9, 1);
    auto x = random_matrix(1000, rng);
    std::vector<double> y1(x.size()), y2(x.size());
    kernels::gelu_serial(x.data(), y1.data(), x.size());
    kernels::gelu_omp(x.data(), y2.data(), x.size());
    CHECK(y1 == y2);
    // Known values: gelu(0) = 0, gelu is odd-symmetric around the origin in
    // the sense gelu(x) + gelu(-x) = x.
    double zero = -1.0;
    double in = 0.0;
    kernels::gelu_serial(&in, &zero, 1);
    CHECK(zero == 0.0);
}

TEST_CASE("the global parallel switch changes nothing numerically") {
    ParallelGuard guard;
    Rng rng(10, 1);
    // Big enough to clear the dispatch threshold.
    const std::size_t m = 80, k = 80, n = 80;
    auto a = random_matrix(m * k, rng);
    auto b = random_matrix(k * n, rng);
    std::vector<double> c_on(m * n), c_off(m * n);
    kernels::set_parallel_enabled(true);
    kernels::matmul(a.data(), b.data(), c_on.data(), m, k, n);
    kernels::set_parallel_enabled(false);
    kernels::matmul(a.data(), b.data(), c_off.data(), m, k, n);
    CHECK(c_on == c_off);
}

TEST_CASE("a full training graph is bitwise identical under both paths") {
    ParallelGuard guard;
    auto run = [&] {
        Rng rng(11, 2);
        Tensor w1 = Tensor::randn({32, 64}, rng, 0.5, true);
        Tensor w2 = Tensor::randn({64, 32}, rng, 0.5, true);
        Tensor x = Tensor::randn({16, 32}, rng, 1.0, false);
        Tensor h = gelu(matmul(x, w1));
        Tensor y = softmax(matmul(h, w2));
        std::vector<double> w(16, 1.0 / 16.0);
        Tensor loss = mse(y, x, w);
        backward(loss);
        std::vector<double> out = {loss.item()};
        out.insert(out.end(), w1.grad().begin(), w1.grad().end());
        return out;
    };
    kernels::set_parallel_enabled(true);
    auto with_omp = run();
    kernels::set_parallel_enabled(false);
    auto serial = run();
    CHECK(with_omp == serial);
}
