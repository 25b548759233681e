#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <functional>

#include "imgcot/checkpoint.hpp"
#include "imgcot/optim.hpp"
#include "imgcot/tensor.hpp"

using namespace imgcot;

namespace {

Tensor rand_tensor(const Shape& s, Rng& rng, bool rg = true) {
    return Tensor::randn(s, rng, 1.0, rg);
}

// Sum of all elements as a scalar, composed from matmul.
Tensor sum_all(const Tensor& t) {
    Tensor ones_l = Tensor::full({1, t.rows()}, 1.0);
    Tensor ones_r = Tensor::full({t.cols(), 1}, 1.0);
    return matmul(matmul(ones_l, t), ones_r);
}

}  // namespace

TEST_CASE("backward: f(x)=x^2 at x=3 gives grad 6") {
    Tensor x = Tensor::scalar(3.0, true);
    Tensor loss = mul(x, x);
    backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("backward: softmax-cross-entropy grad is softmax minus onehot") {
    Rng rng(7);
    Tensor logits = rand_tensor({1, 5}, rng);
    const int target = 2;
    Tensor loss = cross_entropy(logits, {target}, {1.0});
    backward(loss);
    Tensor p = softmax(Tensor::from_data({1, 5}, logits.value()));
    for (int j = 0; j < 5; ++j) {
        double expect = p.value()[j] - (j == target ? 1.0 : 0.0);
        CHECK(logits.grad()[j] == doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("backward: 2-layer perceptron matches finite differences") {
    Rng rng(11);
    Tensor x = Tensor::randn({3, 4}, rng, 1.0, false);
    Tensor w1 = rand_tensor({4, 6}, rng);
    Tensor b1 = rand_tensor({1, 6}, rng);
    Tensor w2 = rand_tensor({6, 2}, rng);
    Tensor b2 = rand_tensor({1, 2}, rng);
    Tensor target = Tensor::randn({3, 2}, rng, 1.0, false);
    auto loss_fn = [&]() {
        Tensor h = gelu(add(matmul(x, w1), b1));
        Tensor y = add(matmul(h, w2), b2);
        return mse(y, target, {1.0, 1.0, 1.0});
    };
    double err = finite_diff_check(loss_fn, {w1, b1, w2, b2}, 1e-4);
    CHECK(err < 1e-3);
}

TEST_CASE("finite_diff_check: linear map is exact") {
    Rng rng(3);
    Tensor w = rand_tensor({4, 1}, rng);
    Tensor x = Tensor::randn({1, 4}, rng, 1.0, false);
    auto loss_fn = [&]() { return matmul(x, w); };
    CHECK(finite_diff_check(loss_fn, {w}, 1e-4) < 1e-8);
}

TEST_CASE("finite_diff_check: straight-through path is exactly affine") {
    Rng rng(5);
    Tensor h = rand_tensor({2, 4}, rng);
    Tensor e = Tensor::randn({2, 4}, rng, 1.0, false);  // stands in for codebook rows
    // The sg branch is frozen at the probe point: z_hat = h + const, affine.
    Tensor sg_branch = stop_gradient(sub(e, h));
    auto loss_fn = [&]() {
        Tensor zhat = add(h, sg_branch);
        return sum_all(zhat);
    };
    CHECK(finite_diff_check(loss_fn, {h}, 1e-4) < 1e-8);
}

TEST_CASE("finite_diff_check: small attention block") {
    Rng rng(13);
    const int T = 4, d = 6;
    Tensor x = Tensor::randn({T, d}, rng, 1.0, false);
    Tensor wq = rand_tensor({d, d}, rng);
    Tensor wk = rand_tensor({d, d}, rng);
    Tensor wv = rand_tensor({d, d}, rng);
    Tensor target = Tensor::randn({T, d}, rng, 1.0, false);
    auto loss_fn = [&]() {
        Tensor q = matmul(x, wq);
        Tensor k = matmul(x, wk);
        Tensor v = matmul(x, wv);
        Tensor att = softmax(scale(matmul(q, transpose(k)), 1.0 / std::sqrt(double(d))));
        Tensor y = matmul(att, v);
        return mse(y, target, std::vector<double>(T, 1.0));
    };
    CHECK(finite_diff_check(loss_fn, {wq, wk, wv}, 1e-5) < 1e-3);
}

TEST_CASE("finite_diff_check: every primitive on random inputs") {
    Rng rng(17);
    std::vector<double> w3{1.0, 1.0, 1.0};
    for (int trial = 0; trial < 5; ++trial) {
        Tensor a = rand_tensor({3, 4}, rng);
        Tensor tgt = Tensor::randn({3, 4}, rng, 1.0, false);

        auto check = [&](const char* name, const std::function<Tensor()>& fn, double tol) {
            a.zero_grad();
            INFO(name << " trial " << trial);
            CHECK(finite_diff_check(fn, {a}, 1e-5) < tol);
        };
        check("matmul", [&] {
            Tensor b = Tensor::from_data({4, 2}, {1, 2, -1, 0.5, 3, -2, 0.1, 1});
            return mse(matmul(a, b), Tensor::zeros({3, 2}), w3);
        }, 1e-6);
        check("add-row", [&] {
            Tensor r = Tensor::from_data({1, 4}, {1, -1, 2, 0});
            return mse(add(a, r), tgt, w3);
        }, 1e-6);
        check("mul-col", [&] {
            Tensor c = Tensor::from_data({3, 1}, {2, -1, 0.5});
            return mse(mul(a, c), tgt, w3);
        }, 1e-6);
        check("reshape+transpose", [&] {
            return mse(transpose(reshape(a, {4, 3})), Tensor::zeros({3, 4}), w3);
        }, 1e-6);
        check("softmax", [&] { return mse(softmax(a), tgt, w3); }, 1e-3);
        check("layernorm", [&] { return mse(layernorm(a), tgt, w3); }, 1e-3);
        check("gelu", [&] { return mse(gelu(a), tgt, w3); }, 1e-3);
        check("gather", [&] { return mse(gather_rows(a, {2, 0, 2}), Tensor::zeros({3, 4}), w3); },
              1e-6);
        check("embedding", [&] {
            return mse(embedding(a, {1, 1, 0}), Tensor::zeros({3, 4}), w3);
        }, 1e-6);
        check("cross_entropy", [&] { return cross_entropy(a, {1, 3, 0}, w3); }, 1e-3);
        check("mse-both-sides", [&] { return mse(a, scale(a, 0.25), w3); }, 1e-3);
    }
}

TEST_CASE("backward is linear in the loss") {
    Rng rng(23);
    Tensor w = rand_tensor({3, 3}, rng);
    Tensor x = Tensor::randn({2, 3}, rng, 1.0, false);
    std::vector<double> w2{1.0, 1.0};
    auto l1 = [&] { return mse(matmul(x, w), Tensor::zeros({2, 3}), w2); };
    auto l2 = [&] { return cross_entropy(matmul(x, w), {0, 2}, w2); };
    const double ca = 0.7, cb = -1.3;

    w.zero_grad();
    backward(l1());
    std::vector<double> g1 = w.grad();
    w.zero_grad();
    backward(l2());
    std::vector<double> g2 = w.grad();
    w.zero_grad();
    backward(add(scale(l1(), ca), scale(l2(), cb)));
    for (std::size_t i = 0; i < g1.size(); ++i) {
        CHECK(w.grad()[i] == doctest::Approx(ca * g1[i] + cb * g2[i]).epsilon(1e-9));
    }
}

TEST_CASE("backward: non-scalar loss is a contract violation") {
    Rng rng(1);
    Tensor x = Tensor::randn({2, 2}, rng, 1.0, true);
    CHECK_THROWS_AS(backward(add(x, x)), ContractViolation);
}

TEST_CASE("NaN in a primitive raises NumericFailure naming the op") {
    Tensor x = Tensor::from_data({1, 2}, {1e308, 1e308}, true);
    try {
        Tensor y = mul(x, x);
        FAIL("expected NumericFailure");
    } catch (const NumericFailure& e) {
        CHECK(std::string(e.what()).find("mul") != std::string::npos);
    }
}

TEST_CASE("schedule: warmup and restart shape") {
    Schedule s;
    s.base_lr = 0.5;
    s.total_steps = 200;
    s.warmup_fraction = 0.15;
    s.restarts = 1;
    CHECK(s.rate(0) == 0.0);
    CHECK(s.warmup_steps() == 30);
    CHECK(s.rate(30) == doctest::Approx(0.5));
    // Two cycles over the remaining 170 steps: restart boundary at 30 + 85.
    CHECK(s.rate(115) == doctest::Approx(0.5));
    // Mid-cycle is strictly between 0 and base.
    double mid = s.rate(72);
    CHECK(mid > 0.0);
    CHECK(mid < 0.5);
    // Rate is non-negative everywhere.
    for (int i = 0; i <= 200; ++i) CHECK(s.rate(i) >= 0.0);
    CHECK_THROWS_AS(s.rate(201), ContractViolation);
    CHECK_THROWS_AS(s.rate(-1), ContractViolation);
}

TEST_CASE("optimizer: zero grad and zero decay leaves parameters unchanged") {
    ParamStore ps;
    Rng rng(31);
    ps.add("w", Tensor::randn({2, 2}, rng, 1.0, true));
    std::vector<double> before = ps.get("w").value();
    ps.zero_grads();
    AdamW::Config cfg;
    cfg.weight_decay = 0.0;
    AdamW opt(cfg);
    Schedule s;
    s.base_lr = 0.1;
    s.warmup_fraction = 0.0;
    s.total_steps = 10;
    opt.step(ps, s, 1);
    CHECK(ps.get("w").value() == before);
}

TEST_CASE("optimizer: one step on f(x)=x decreases x") {
    ParamStore ps;
    ps.add("x", Tensor::scalar(1.0, true));
    ps.zero_grads();
    ps.get("x").grad()[0] = 1.0;  // d/dx of f(x)=x
    AdamW::Config cfg;
    cfg.weight_decay = 0.0;
    AdamW opt(cfg);
    Schedule s;
    s.base_lr = 0.1;
    s.warmup_fraction = 0.0;
    s.total_steps = 10;
    opt.step(ps, s, 1);
    CHECK(ps.get("x").value()[0] < 1.0);
}

TEST_CASE("optimizer: 100 steps on a convex quadratic converge") {
    ParamStore ps;
    ps.add("x", Tensor::from_data({1, 2}, {3.0, -2.0}, true));
    AdamW::Config cfg;
    cfg.weight_decay = 0.0;
    AdamW opt(cfg);
    Schedule s;
    s.base_lr = 0.1;
    s.warmup_fraction = 0.0;
    s.total_steps = 100;
    s.restarts = 0;
    auto loss_at = [&] {
        Tensor x = ps.get("x");
        return mse(x, Tensor::zeros({1, 2}), {1.0});
    };
    double start = loss_at().item();
    for (int t = 1; t <= 100; ++t) {
        ps.zero_grads();
        backward(loss_at());
        opt.step(ps, s, t);
    }
    CHECK(loss_at().item() < 1e-3 * start);
}

TEST_CASE("optimizer: identical inputs and seed are bitwise reproducible") {
    auto run = [] {
        ParamStore ps;
        Rng rng(77);
        ps.add("w", Tensor::randn({4, 4}, rng, 0.5, true));
        AdamW opt;
        Schedule s;
        s.base_lr = 0.01;
        s.total_steps = 20;
        for (int t = 1; t <= 20; ++t) {
            ps.zero_grads();
            Tensor w = ps.get("w");
            backward(mse(matmul(w, w), Tensor::zeros({4, 4}),
                         std::vector<double>(4, 1.0)));
            opt.step(ps, s, t);
        }
        return ps.get("w").value();
    };
    CHECK(run() == run());
}

TEST_CASE("optimizer: shape mismatch is a contract violation") {
    AdamW opt;
    Schedule s;
    s.total_steps = 10;
    ParamStore ps1;
    ps1.add("w", Tensor::zeros({2, 2}, true));
    ps1.zero_grads();
    opt.step(ps1, s, 1);
    // Same name, different shape: the moment buffers no longer align.
    ParamStore ps2;
    ps2.add("w", Tensor::zeros({3, 3}, true));
    ps2.zero_grads();
    CHECK_THROWS_AS(opt.step(ps2, s, 2), ContractViolation);
    CHECK_THROWS_AS(opt.step(ps1, s, 0), ContractViolation);
}

TEST_CASE("checkpoint: round-trip is bitwise and versioned") {
    ParamStore ps;
    Rng rng(5);
    ps.add("a.weight", Tensor::randn({3, 5}, rng, 1.0, true));
    ps.add("b.bias", Tensor::randn({1, 5}, rng, 1.0, true));
    const std::string path = "/tmp/imgcot_test_ckpt.bin";
    save_checkpoint(path, ps, {{"kind", "test"}, {"d", "5"}});
    Checkpoint ck = load_checkpoint(path);
    CHECK(ck.meta.at("kind") == "test");
    CHECK(ck.params.size() == 2);
    CHECK(ck.params.get("a.weight").value() == ps.get("a.weight").value());
    CHECK(ck.params.get("b.bias").shape() == Shape{1, 5});

    // Corrupt the magic.
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.write("XXXX", 4);
    }
    CHECK_THROWS_AS(load_checkpoint(path), ParseError);
}
