#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>

#include "imgcot/vqtok.hpp"

using namespace imgcot;
using namespace imgcot::vqtok;

namespace {

VqConfig micro_config() {
    VqConfig cfg;
    cfg.page_h = 16;
    cfg.page_w = 16;
    cfg.patch = 8;
    cfg.dim = 8;
    cfg.latent_tokens = 2;
    cfg.codebook_size = 4;
    cfg.enc_blocks = 1;
    cfg.dec_blocks = 1;
    cfg.heads = 2;
    return cfg;
}

render::RenderedPage noise_page(int h, int w, Rng& rng) {
    render::RenderedPage p;
    p.height = h;
    p.width = w;
    p.pixels.resize(static_cast<std::size_t>(h) * w);
    for (auto& px : p.pixels) px = static_cast<uint8_t>(rng.below(256));
    return p;
}

// Independent nearest-neighbor oracle: materialize the full distance table,
// then pick per row with std::min_element (first minimum wins the tie).
std::vector<int> oracle_nearest(const std::vector<double>& h, int n,
                                const std::vector<double>& entries, int k, int d) {
    std::vector<int> out(static_cast<std::size_t>(n));
    std::vector<double> dist(static_cast<std::size_t>(k));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < k; ++j) {
            double s = 0.0;
            for (int c = 0; c < d; ++c) {
                const double diff = h[static_cast<std::size_t>(i) * d + c] -
                                    entries[static_cast<std::size_t>(j) * d + c];
                s += diff * diff;
            }
            dist[static_cast<std::size_t>(j)] = s;
        }
        out[static_cast<std::size_t>(i)] =
            static_cast<int>(std::min_element(dist.begin(), dist.end()) - dist.begin());
    }
    return out;
}

}  // namespace

TEST_CASE("nearest_indices matches an independent oracle on random pairs") {
    Rng rng(42, 1);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 1 + static_cast<int>(rng.below(6));
        const int k = 1 + static_cast<int>(rng.below(20));
        const int d = 1 + static_cast<int>(rng.below(8));
        std::vector<double> h(static_cast<std::size_t>(n) * d);
        std::vector<double> e(static_cast<std::size_t>(k) * d);
        for (auto& x : h) x = rng.uniform(-2.0, 2.0);
        for (auto& x : e) x = rng.uniform(-2.0, 2.0);
        CHECK(nearest_indices(h, n, e, k, d) == oracle_nearest(h, n, e, k, d));
    }
}

TEST_CASE("nearest_indices breaks exact ties toward the smaller index") {
    // Entries 1 and 3 are identical and closest; index 1 must win.
    std::vector<double> e = {5.0, 5.0, 1.0, 1.0, 9.0, 9.0, 1.0, 1.0};
    std::vector<double> h = {1.1, 0.9};
    auto idx = nearest_indices(h, 1, e, 4, 2);
    CHECK(idx == std::vector<int>{1});
}

TEST_CASE("quantize returns exact codebook rows and counts usage") {
    VqTokenizer tok(micro_config(), 7);
    Rng rng(9, 2);
    auto page = noise_page(16, 16, rng);
    auto h = tok.encode(page);
    auto code = tok.quantize(h);

    REQUIRE(code.indices.size() == 2);
    const auto& cb = tok.codebook_values();
    const int d = tok.config().dim;
    uint64_t counted = 0;
    for (int i = 0; i < 2; ++i) {
        const int j = code.indices[static_cast<std::size_t>(i)];
        REQUIRE(j >= 0);
        REQUIRE(j < tok.config().codebook_size);
        for (int c = 0; c < d; ++c)
            CHECK(code.embeddings[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] ==
                  cb[static_cast<std::size_t>(j) * d + c]);
    }
    for (auto u : tok.usage()) counted += u;
    CHECK(counted == 2);
}

TEST_CASE("straight-through output equals the codebook rows bitwise") {
    VqTokenizer tok(micro_config(), 11);
    Rng rng(3, 4);
    Tensor h = Tensor::randn({2, 8}, rng, 1.0, true);
    std::vector<int> idx = {3, 0};
    Tensor z = tok.straight_through(h, idx);
    const auto& cb = tok.codebook_values();
    for (int i = 0; i < 2; ++i)
        for (int c = 0; c < 8; ++c)
            CHECK(z.value()[static_cast<std::size_t>(i) * 8 + c] ==
                  cb[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]) * 8 + c]);
}

TEST_CASE("straight-through gradient w.r.t. the encoder output is the identity") {
    VqTokenizer tok(micro_config(), 11);
    Rng rng(5, 6);
    Tensor h = Tensor::randn({2, 8}, rng, 1.0, true);
    std::vector<int> idx = {1, 2};
    std::vector<double> w(8);
    for (auto& x : w) x = rng.uniform(-1.0, 1.0);
    Tensor weights = Tensor::from_data({8, 1}, w);
    std::vector<double> ones_row(2, 1.0);
    Tensor ones = Tensor::from_data({1, 2}, ones_row);

    // For the finite-difference probe the stopped branch must be pinned at
    // the probe point (graphs evaluate eagerly, so capturing it outside the
    // closure freezes it); the remaining path is affine in h with unit slope.
    Tensor sel = gather_rows(tok.params().get("codebook"), idx);
    Tensor pinned = stop_gradient(sub(sel, h));
    auto fd_fn = [&] { return matmul(ones, matmul(add(h, pinned), weights)); };
    CHECK(finite_diff_check(fd_fn, {h}, 1e-4) < 1e-8);

    h.zero_grad();
    Tensor loss = matmul(ones, matmul(tok.straight_through(h, idx), weights));
    backward(loss);
    for (int i = 0; i < 2; ++i)
        for (int c = 0; c < 8; ++c)
            CHECK(h.grad()[static_cast<std::size_t>(i) * 8 + c] ==
                  doctest::Approx(w[static_cast<std::size_t>(c)]).epsilon(1e-12));
}

TEST_CASE("encode is deterministic for a fixed seed and page") {
    Rng rng(77, 1);
    auto page = noise_page(16, 16, rng);
    VqTokenizer a(micro_config(), 123);
    VqTokenizer b(micro_config(), 123);
    CHECK(a.encode(page) == b.encode(page));

    VqTokenizer c(micro_config(), 124);
    CHECK(a.encode(page) != c.encode(page));
}

TEST_CASE("decode produces a page of the configured size") {
    VqTokenizer tok(micro_config(), 19);
    Rng rng(8, 8);
    auto page = noise_page(16, 16, rng);
    auto code = tok.quantize(tok.encode(page));
    auto out = tok.decode(code);
    CHECK(out.height == 16);
    CHECK(out.width == 16);
    CHECK(out.pixels.size() == 256);
}

TEST_CASE("decoder gradients pass a finite-difference check") {
    VqTokenizer tok(micro_config(), 31);
    Rng rng(13, 1);
    Tensor z = Tensor::randn({2, 8}, rng, 0.5, true);
    Tensor target = Tensor::randn({4, 64}, rng, 0.3, false);
    std::vector<double> w(4, 0.25);

    auto loss_fn = [&] { return mse(tok.decode_graph(z), target, w); };
    std::vector<Tensor> probes = {z, tok.params().get("dec.unembed"),
                                  tok.params().get("dec.mask")};
    CHECK(finite_diff_check(loss_fn, probes, 1e-5) < 1e-3);
}

TEST_CASE("full training loss passes a finite-difference check on the codebook") {
    VqTokenizer tok(micro_config(), 37);
    Rng rng(21, 1);
    auto page = noise_page(16, 16, rng);
    Tensor target = Tensor::from_data({4, 64}, patchify(page, 8));
    std::vector<double> wp(4, 0.25);
    std::vector<double> wn(2, 1.0);

    // Indices and every stopped branch are frozen at the probe point; the
    // finite-difference loss then agrees with the analytic gradient routing.
    std::vector<double> h0 = tok.encode(page);
    auto idx = nearest_indices(h0, 2, tok.codebook_values(), 4, 8);
    std::vector<double> sel0(static_cast<std::size_t>(2) * 8);
    for (int i = 0; i < 2; ++i)
        for (int c = 0; c < 8; ++c)
            sel0[static_cast<std::size_t>(i) * 8 + c] =
                tok.codebook_values()[static_cast<std::size_t>(
                                          idx[static_cast<std::size_t>(i)]) *
                                          8 +
                                      c];
    Tensor h_frozen = Tensor::from_data({2, 8}, h0);
    Tensor sel_frozen = Tensor::from_data({2, 8}, sel0);
    Tensor sg_frozen = sub(sel_frozen, h_frozen);

    auto loss_fn = [&] {
        Tensor h = tok.encode_graph(page);
        Tensor z = add(h, sg_frozen);  // straight-through with the branch pinned
        Tensor rec = mse(tok.decode_graph(z), target, wp);
        Tensor sel = gather_rows(tok.params().get("codebook"), idx);
        Tensor l_cb = mse(sel, h_frozen, wn);
        Tensor l_cm = mse(h, sel_frozen, wn);
        return add(rec, add(l_cb, scale(l_cm, 0.25)));
    };
    std::vector<Tensor> probes = {tok.params().get("codebook"),
                                  tok.params().get("enc.patch_embed")};
    CHECK(finite_diff_check(loss_fn, probes, 1e-5) < 1e-3);
}

TEST_CASE("train_step reports matching codebook/commitment values and updates usage") {
    VqTokenizer tok(micro_config(), 41);
    Rng rng(30, 2);
    std::vector<render::RenderedPage> batch = {noise_page(16, 16, rng),
                                               noise_page(16, 16, rng)};
    AdamW opt;
    Schedule sched;
    sched.total_steps = 10;

    auto report = tok.train_step(batch, opt, sched, 1);
    CHECK(report.rec >= 0.0);
    CHECK(report.codebook >= 0.0);
    CHECK(report.commit >= 0.0);
    // Both terms measure the same h-to-entry distance; only the gradient
    // routing differs.
    CHECK(report.codebook == doctest::Approx(report.commit).epsilon(1e-12));
    CHECK(report.total == doctest::Approx(report.rec + report.codebook +
                                          0.25 * report.commit));

    uint64_t counted = 0;
    for (auto u : tok.usage()) counted += u;
    CHECK(counted == 4);  // batch of 2 pages, 2 latents each
}

TEST_CASE("a few training steps reduce the reconstruction loss") {
    VqTokenizer tok(micro_config(), 43);
    Rng rng(50, 1);
    std::vector<render::RenderedPage> batch = {noise_page(16, 16, rng)};
    AdamW opt;
    Schedule sched;
    sched.base_lr = 3e-3;
    sched.total_steps = 60;

    double first = 0.0, last = 0.0;
    for (int s = 1; s <= 60; ++s) {
        auto rep = tok.train_step(batch, opt, sched, s);
        if (s == 1) first = rep.rec;
        last = rep.rec;
    }
    CHECK(last < first);
}

TEST_CASE("reinit_dead_codes leaves a fully used codebook alone") {
    VqTokenizer tok(micro_config(), 47);
    Rng page_rng(60, 1);
    auto page = noise_page(16, 16, page_rng);
    // Force every counter past the threshold.
    for (int i = 0; i < 8; ++i) tok.quantize(tok.encode(page));
    std::vector<uint64_t> usage = tok.usage();
    bool any_used = false;
    for (auto u : usage) any_used = any_used || u > 0;
    CHECK(any_used);

    Rng rng(1, 1);
    std::vector<std::vector<double>> donors = {tok.encode(page)};
    // Threshold 1: only never-used entries are dead.
    int replaced = tok.reinit_dead_codes(donors, 1, rng);
    int dead = 0;
    for (auto u : usage) dead += (u == 0);
    CHECK(replaced == dead);
    for (auto u : tok.usage()) CHECK(u == 0);  // counters cleared
}

TEST_CASE("reinit_dead_codes rewrites dead rows with donor rows") {
    VqTokenizer tok(micro_config(), 53);
    const int d = 8, n = 2;
    Rng rng(2, 3);
    std::vector<double> h(static_cast<std::size_t>(n) * d);
    for (auto& x : h) x = rng.uniform(-1.0, 1.0);
    std::vector<std::vector<double>> donors = {h};

    // No quantize calls: every entry is dead.
    int replaced = tok.reinit_dead_codes(donors, 1, rng);
    CHECK(replaced == tok.config().codebook_size);
    const auto& cb = tok.codebook_values();
    for (int j = 0; j < tok.config().codebook_size; ++j) {
        bool matches_some_donor = false;
        for (int i = 0; i < n; ++i) {
            matches_some_donor =
                matches_some_donor ||
                std::equal(cb.begin() + static_cast<std::size_t>(j) * d,
                           cb.begin() + static_cast<std::size_t>(j + 1) * d,
                           h.begin() + static_cast<std::size_t>(i) * d);
        }
        CHECK(matches_some_donor);
    }
}

TEST_CASE("checkpoint round-trip preserves configuration and behavior") {
    namespace fs = std::filesystem;
    const std::string path = (fs::temp_directory_path() / "vqtok_rt.ickp").string();
    VqConfig cfg = micro_config();
    VqTokenizer tok(cfg, 59);
    Rng rng(70, 1);
    auto page = noise_page(16, 16, rng);
    auto before = tok.encode(page);
    auto code_before = tok.quantize(before);
    tok.save(path);

    VqTokenizer loaded = VqTokenizer::load(path);
    CHECK(loaded.config().codebook_size == cfg.codebook_size);
    CHECK(loaded.config().dim == cfg.dim);
    CHECK(loaded.config().latent_tokens == cfg.latent_tokens);
    CHECK(loaded.encode(page) == before);
    auto code_after = loaded.quantize(before);
    CHECK(code_after.indices == code_before.indices);
    CHECK(loaded.decode(code_after).pixels == tok.decode(code_before).pixels);
    std::remove(path.c_str());
}

TEST_CASE("configuration validation rejects indivisible pages") {
    VqConfig cfg = micro_config();
    cfg.page_w = 17;
    CHECK_THROWS_AS(VqTokenizer(cfg, 1), ContractViolation);
}

TEST_CASE("encode rejects pages of the wrong size") {
    VqTokenizer tok(micro_config(), 61);
    Rng rng(80, 1);
    auto page = noise_page(32, 16, rng);
    CHECK_THROWS_AS(tok.encode(page), ContractViolation);
}
