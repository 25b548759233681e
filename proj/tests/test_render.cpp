#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>

#include "imgcot/font8x8.hpp"
#include "imgcot/render.hpp"
#include "imgcot/rng.hpp"

using namespace imgcot;
using namespace imgcot::render;

namespace {

// Independent font-size selection: exhaustive scan over all scales, closed
// form instead of the implementation's shrink/grow loops.
int oracle_chosen_scale(const SegmentGraph& g, const RenderConfig& cfg) {
    auto blank_at = [&](int s) {
        PageLayout l = layout_at_scale(g, cfg, s);
        return blank_fraction(rasterize(l, g, cfg)[0]);
    };
    int s0 = -1;
    for (int s = cfg.default_scale; s >= cfg.min_scale; --s) {
        if (fits_single_page(g, cfg, s)) {
            s0 = s;
            break;
        }
    }
    if (s0 < 0) return cfg.min_scale;  // multipage case
    int s = s0;
    while (s < cfg.max_scale && blank_at(s) > cfg.blank_ceiling &&
           fits_single_page(g, cfg, s + 1)) {
        ++s;
    }
    return s;
}

SegmentGraph random_graph(Rng& rng) {
    SegmentGraph g;
    const int n = 1 + static_cast<int>(rng.below(6));
    const char* words[] = {"STEP", "RULE", "X", "APPLY", "THEN", "SO", "A12", "B+C"};
    for (int i = 0; i < n; ++i) {
        std::string s;
        const int w = 1 + static_cast<int>(rng.below(8));
        for (int j = 0; j < w; ++j) {
            if (j) s += ' ';
            s += words[rng.below(8)];
        }
        g.segments.push_back(s);
    }
    // Chain plus occasional long-range edge.
    for (int i = 0; i + 1 < n; ++i) g.edges.emplace_back(i, i + 1);
    if (n > 2 && rng.below(2) == 0) g.edges.emplace_back(0, n - 1);
    return g;
}

void check_layout_invariants(const SegmentGraph& g, const RenderConfig& cfg,
                             const PageLayout& l) {
    // Containment.
    for (const auto& b : l.boxes) {
        CHECK(b.x >= cfg.margin);
        CHECK(b.y >= cfg.margin);
        CHECK(b.x + b.w <= cfg.page_w - cfg.margin);
        CHECK(b.y + b.h <= cfg.page_h - cfg.margin);
    }
    // Pairwise disjoint on the same page.
    for (std::size_t i = 0; i < l.boxes.size(); ++i) {
        for (std::size_t j = i + 1; j < l.boxes.size(); ++j) {
            const auto& a = l.boxes[i];
            const auto& b = l.boxes[j];
            if (a.page != b.page) continue;
            const bool overlap = a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h &&
                                 b.y < a.y + a.h;
            CHECK_FALSE(overlap);
        }
    }
    // Arrow endpoints on box perimeters, exactly one head per edge.
    REQUIRE(l.arrows.size() == g.edges.size());
    auto on_perimeter = [](const BoxPlacement& b, int x, int y) {
        const bool inside = x >= b.x && x < b.x + b.w && y >= b.y && y < b.y + b.h;
        const bool border = x == b.x || x == b.x + b.w - 1 || y == b.y || y == b.y + b.h - 1;
        return inside && border;
    };
    for (const auto& a : l.arrows) {
        int heads = 0;
        for (const auto& st : a.stubs) heads += st.head ? 1 : 0;
        CHECK(heads == 1);
        const auto& src = l.boxes[static_cast<std::size_t>(a.from)];
        const auto& dst = l.boxes[static_cast<std::size_t>(a.to)];
        const auto& first = a.stubs.front();
        const auto& last = a.stubs.back();
        CHECK(on_perimeter(src, first.x1, first.y1));
        CHECK(on_perimeter(dst, last.x2, last.y2));
        CHECK(last.head);
    }
}

}  // namespace

TEST_CASE("segment: delimiter split with chain edges") {
    RenderConfig cfg;
    SegmentGraph g = segment("A\nB", cfg);
    REQUIRE(g.segments.size() == 2);
    CHECK(g.segments[0] == "A");
    CHECK(g.segments[1] == "B");
    REQUIRE(g.edges.size() == 1);
    CHECK(g.edges[0] == std::pair<int, int>(0, 1));
}

TEST_CASE("segment: single segment has no edges") {
    RenderConfig cfg;
    SegmentGraph g = segment("A", cfg);
    CHECK(g.segments.size() == 1);
    CHECK(g.edges.empty());
}

TEST_CASE("segment: empty input is an error") {
    RenderConfig cfg;
    CHECK_THROWS_AS(segment("", cfg), ContractViolation);
    CHECK_THROWS_AS(segment("  \n \t ", cfg), ContractViolation);
}

TEST_CASE("segment: explicit #dep annotations override the chain") {
    RenderConfig cfg;
    SegmentGraph g = segment("A\nB\nC\n#dep 0->2\n#dep 1->2", cfg);
    REQUIRE(g.segments.size() == 3);
    REQUIRE(g.edges.size() == 2);
    CHECK(g.edges[0] == std::pair<int, int>(0, 2));
    CHECK(g.edges[1] == std::pair<int, int>(1, 2));
}

TEST_CASE("segment: empty fragments dropped, multiple delimiters") {
    RenderConfig cfg;
    cfg.delimiters = {"\n", "."};
    SegmentGraph g = segment("A.B\n\nC.", cfg);
    REQUIRE(g.segments.size() == 3);
    CHECK(g.segments[2] == "C");
}

TEST_CASE("layout: short segment grows past the default scale") {
    RenderConfig cfg;  // 512x512
    SegmentGraph g = segment("HELLO", cfg);
    PageLayout l = layout(g, cfg);
    CHECK(l.page_count == 1);
    CHECK(l.font_scale > cfg.default_scale);
    CHECK(l.font_scale == oracle_chosen_scale(g, cfg));
}

TEST_CASE("layout: overflow at minimum scale pages out, boxes in bounds") {
    RenderConfig cfg;
    cfg.page_h = 96;
    cfg.page_w = 96;
    cfg.default_scale = 2;
    std::string text;
    for (int i = 0; i < 12; ++i) text += "SEGMENT NUMBER " + std::to_string(i) + "\n";
    SegmentGraph g = segment(text, cfg);
    PageLayout l = layout(g, cfg);
    CHECK(l.page_count >= 2);
    CHECK(l.font_scale == cfg.min_scale);
    check_layout_invariants(g, cfg, l);
}

TEST_CASE("layout: fit is monotone in scale") {
    RenderConfig cfg;
    cfg.page_h = 160;
    cfg.page_w = 160;
    SegmentGraph g = segment("FIRST STEP HERE\nSECOND STEP\nTHIRD", cfg);
    bool seen_fit = false;
    for (int s = cfg.max_scale; s >= cfg.min_scale; --s) {
        const bool f = fits_single_page(g, cfg, s);
        if (seen_fit) CHECK(f);  // once a size fits, every smaller size fits
        seen_fit = seen_fit || f;
    }
    CHECK(seen_fit);
}

TEST_CASE("layout: infeasible when a glyph cannot fit at minimum scale") {
    RenderConfig cfg;
    cfg.page_w = 20;
    cfg.page_h = 512;
    cfg.default_scale = 1;
    SegmentGraph g;
    g.segments = {"A"};
    CHECK_THROWS_AS(layout(g, cfg), ContractViolation);
}

TEST_CASE("rasterize: blank page is uniform background") {
    RenderConfig cfg;
    cfg.page_h = 64;
    cfg.page_w = 64;
    RenderedPage p = blank_page(cfg);
    for (uint8_t v : p.pixels) CHECK(v == 255);
    CHECK(blank_fraction(p) == 1.0);
}

TEST_CASE("rasterize: byte-identical across runs") {
    RenderConfig cfg;
    SegmentGraph g = segment("COMPUTE 3+4=7\nTHEN 7*2=14\nANSWER 14", cfg);
    auto run = [&] { return rasterize(layout(g, cfg), g, cfg); };
    CHECK(run() == run());
}

TEST_CASE("rasterize: ink count of a single glyph matches the atlas") {
    RenderConfig cfg;
    cfg.page_h = 64;
    cfg.page_w = 64;
    cfg.default_scale = 1;
    cfg.max_scale = 1;  // pin the scale so the expected count is closed-form
    SegmentGraph g;
    g.segments = {"X"};
    PageLayout l = layout(g, cfg);
    REQUIRE(l.font_scale == 1);
    auto pages = rasterize(l, g, cfg);
    std::size_t ink = 0;
    for (uint8_t v : pages[0].pixels) ink += (v == 0);
    const auto& b = l.boxes[0];
    const int t = 1;
    const std::size_t border =
        static_cast<std::size_t>(b.w) * b.h -
        static_cast<std::size_t>(b.w - 2 * t) * (b.h - 2 * t);
    CHECK(ink == border + static_cast<std::size_t>(font::glyph_ink('X')));
}

TEST_CASE("rasterize: layout/graph mismatch is a contract violation") {
    RenderConfig cfg;
    SegmentGraph g = segment("A\nB", cfg);
    PageLayout l = layout(g, cfg);
    SegmentGraph other = segment("A\nB\nC", cfg);
    CHECK_THROWS_AS(rasterize(l, other, cfg), ContractViolation);
}

TEST_CASE("pgm: round-trip identity and header fields") {
    RenderConfig cfg;  // 512x512 default
    SegmentGraph g = segment("ROUND TRIP", cfg);
    auto pages = rasterize(layout(g, cfg), g, cfg);
    const std::string path = "/tmp/imgcot_test_page.pgm";
    write_page(pages[0], path);
    RenderedPage back = read_page(path);
    CHECK(back == pages[0]);
    CHECK(back.width == 512);
    CHECK(back.height == 512);

    std::ifstream in(path);
    std::string magic;
    int w, h;
    in >> magic >> w >> h;
    CHECK(magic == "P5");
    CHECK(w == 512);
    CHECK(h == 512);
}

TEST_CASE("pgm: truncated file raises a parse error with offset") {
    const std::string path = "/tmp/imgcot_test_trunc.pgm";
    {
        std::ofstream os(path, std::ios::binary);
        os << "P5\n64 64\n255\nabc";
    }
    try {
        read_page(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("randomized layouts satisfy all invariants and match the size oracle") {
    Rng rng(2024);
    RenderConfig cfg;
    cfg.page_h = 256;
    cfg.page_w = 256;
    for (int trial = 0; trial < 40; ++trial) {
        SegmentGraph g = random_graph(rng);
        PageLayout l = layout(g, cfg);
        INFO("trial " << trial);
        check_layout_invariants(g, cfg, l);
        CHECK(l.font_scale == oracle_chosen_scale(g, cfg));
        // Page count is minimal for greedy top-to-bottom packing.
        if (l.page_count > 1) {
            int pages = 1, y = cfg.margin;
            bool first = true;
            for (const auto& b : l.boxes) {
                int y_next = first ? y : y + cfg.box_gap;
                if (y_next + b.h > cfg.page_h - cfg.margin) {
                    ++pages;
                    y_next = cfg.margin;
                }
                y = y_next + b.h;
                first = false;
            }
            CHECK(l.page_count == pages);
        }
        // No ink outside the page.
        for (const auto& p : rasterize(l, g, cfg)) {
            CHECK(p.width == cfg.page_w);
            CHECK(p.height == cfg.page_h);
        }
    }
}

TEST_CASE("layout sidecar lists every box and arrow") {
    RenderConfig cfg;
    SegmentGraph g = segment("A\nB\nC", cfg);
    PageLayout l = layout(g, cfg);
    const std::string path = "/tmp/imgcot_test_sidecar.txt";
    write_layout_sidecar(l, path);
    std::ifstream in(path);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(content.find("box 0") != std::string::npos);
    CHECK(content.find("box 2") != std::string::npos);
    CHECK(content.find("arrow 0 1") != std::string::npos);
    CHECK(content.find("head") != std::string::npos);
}
