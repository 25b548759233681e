#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "imgcot/errors.hpp"

namespace imgcot::render {

// Deterministic structured-text rendering: delimiter segmentation, boxed
// layout with dependency arrows, dynamic font sizing with overflow paging,
// and a bit-exact rasterizer over the embedded 8x8 font. Everything here is
// a pure function of (input text, RenderConfig); no system fonts, no
// anti-aliasing.

struct SegmentGraph {
    std::vector<std::string> segments;            // ordered reasoning steps
    std::vector<std::pair<int, int>> edges;       // directed (from, to)

    void validate() const;  // throws ContractViolation on bad structure
};

struct RenderConfig {
    int page_h = 512;
    int page_w = 512;
    // "Font size" is the integer atlas scale (1..8); a glyph cell is
    // 8*scale pixels square. Paper-style point sizes are renderer specific,
    // so the default of 2 stands in for the usual size-9 text.
    int default_scale = 2;
    int min_scale = 1;
    int max_scale = 8;
    std::vector<std::string> delimiters = {"\n"};
    int margin = 6;        // page border kept clear of boxes
    int box_padding = 3;   // space between box border and glyphs
    int box_gap = 10;      // vertical space between consecutive boxes
    double blank_ceiling = 0.5;  // max allowed background fraction

    void validate() const;
};

struct BoxPlacement {
    int page = 0;
    int x = 0, y = 0, w = 0, h = 0;
    std::vector<std::string> lines;  // wrapped text
};

// One straight segment of an arrow. Cross-page arrows are split into two
// stubs (source box to page bottom, page top to destination box); the
// arrowhead sits at the destination end of the final stub.
struct ArrowStub {
    int page = 0;
    int x1 = 0, y1 = 0, x2 = 0, y2 = 0;
    bool head = false;
};

struct ArrowPath {
    int from = 0, to = 0;
    std::vector<ArrowStub> stubs;
};

struct PageLayout {
    int font_scale = 1;
    int page_count = 1;
    std::vector<BoxPlacement> boxes;   // one per segment, in segment order
    std::vector<ArrowPath> arrows;     // one per edge, in edge order
};

struct RenderedPage {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels;  // row-major, 255 = background, 0 = ink

    bool operator==(const RenderedPage&) const = default;
};

// Split text on the configured delimiters; empty fragments are dropped.
// Edges default to the sequential chain i -> i+1; lines of the form
// "#dep i->j" override the default with an explicit edge list.
SegmentGraph segment(const std::string& text, const RenderConfig& config);

// Font-size selection: start at the default scale, shrink until the graph
// fits one page, page out at minimum scale, then grow while the blank
// fraction exceeds the ceiling and the next size still fits.
PageLayout layout(const SegmentGraph& graph, const RenderConfig& config);

// Fixed-scale layout (pages added greedily as needed). Exposed for the
// exhaustive size-scan oracle in tests.
PageLayout layout_at_scale(const SegmentGraph& graph, const RenderConfig& config,
                           int scale);

// True when every box fits on a single page at this scale.
bool fits_single_page(const SegmentGraph& graph, const RenderConfig& config, int scale);

std::vector<RenderedPage> rasterize(const PageLayout& layout, const SegmentGraph& graph,
                                    const RenderConfig& config);

// A blank page at the configured size (background everywhere).
RenderedPage blank_page(const RenderConfig& config);

// Background pixels / total pixels. Arrows and borders count as ink.
double blank_fraction(const RenderedPage& page);

// Binary PGM (P5) round-trip; read(write(p)) == p.
void write_page(const RenderedPage& page, const std::string& path);
RenderedPage read_page(const std::string& path);

// One record per box and arrow stub, for golden tests and inspection.
void write_layout_sidecar(const PageLayout& layout, const std::string& path);

}  // namespace imgcot::render
