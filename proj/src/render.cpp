#include "imgcot/render.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

#include "imgcot/font8x8.hpp"

namespace imgcot::render {

namespace {

constexpr int kGlyphCell = 8;

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Greedy word wrap at `cpl` characters per line; words longer than a line are
// hard-broken. Returns nullopt when cpl < 1.
std::optional<std::vector<std::string>> wrap_text(const std::string& text, int cpl) {
    if (cpl < 1) return std::nullopt;
    std::vector<std::string> lines;
    std::string line;
    std::istringstream words(text);
    std::string word;
    while (words >> word) {
        while (static_cast<int>(word.size()) > cpl) {
            if (!line.empty()) {
                lines.push_back(line);
                line.clear();
            }
            lines.push_back(word.substr(0, static_cast<std::size_t>(cpl)));
            word = word.substr(static_cast<std::size_t>(cpl));
        }
        if (line.empty()) {
            line = word;
        } else if (static_cast<int>(line.size() + 1 + word.size()) <= cpl) {
            line += ' ';
            line += word;
        } else {
            lines.push_back(line);
            line = word;
        }
    }
    if (!line.empty()) lines.push_back(line);
    if (lines.empty()) lines.push_back("");  // all-whitespace segment still gets a box
    return lines;
}

struct BoxGeom {
    std::vector<std::string> lines;
    int w = 0, h = 0;
};

// Box geometry for one segment at a given scale, or nullopt if even a single
// glyph cannot fit in the usable width.
std::optional<BoxGeom> box_geometry(const std::string& text, const RenderConfig& cfg,
                                    int scale) {
    const int border = scale;
    const int usable_w = cfg.page_w - 2 * cfg.margin;
    const int inner_w = usable_w - 2 * cfg.box_padding - 2 * border;
    const int cpl = inner_w / (kGlyphCell * scale);
    auto lines = wrap_text(text, cpl);
    if (!lines) return std::nullopt;
    int max_len = 0;
    for (const auto& l : *lines) max_len = std::max(max_len, static_cast<int>(l.size()));
    max_len = std::max(max_len, 1);
    BoxGeom g;
    g.lines = std::move(*lines);
    g.w = max_len * kGlyphCell * scale + 2 * cfg.box_padding + 2 * border;
    g.h = static_cast<int>(g.lines.size()) * kGlyphCell * scale + 2 * cfg.box_padding +
          2 * border;
    return g;
}

void draw_hline_block(RenderedPage& p, int x, int y, int w, int h) {
    for (int yy = std::max(0, y); yy < std::min(p.height, y + h); ++yy)
        for (int xx = std::max(0, x); xx < std::min(p.width, x + w); ++xx)
            p.pixels[static_cast<std::size_t>(yy) * p.width + xx] = 0;
}

void draw_box_border(RenderedPage& p, const BoxPlacement& b, int t) {
    draw_hline_block(p, b.x, b.y, b.w, t);
    draw_hline_block(p, b.x, b.y + b.h - t, b.w, t);
    draw_hline_block(p, b.x, b.y, t, b.h);
    draw_hline_block(p, b.x + b.w - t, b.y, t, b.h);
}

void draw_glyph(RenderedPage& p, char c, int x, int y, int scale) {
    const font::Glyph& g = font::glyph(c);
    for (int r = 0; r < 8; ++r) {
        for (int col = 0; col < 8; ++col) {
            if (g[r] & (1u << col)) {
                draw_hline_block(p, x + col * scale, y + r * scale, scale, scale);
            }
        }
    }
}

void draw_text_lines(RenderedPage& p, const BoxPlacement& b, int scale, int padding) {
    const int x0 = b.x + scale + padding;
    const int y0 = b.y + scale + padding;
    for (std::size_t li = 0; li < b.lines.size(); ++li) {
        for (std::size_t ci = 0; ci < b.lines[li].size(); ++ci) {
            draw_glyph(p, b.lines[li][ci], x0 + static_cast<int>(ci) * kGlyphCell * scale,
                       y0 + static_cast<int>(li) * kGlyphCell * scale, scale);
        }
    }
}

// Thick line: stamp scale x scale squares along a Bresenham walk.
void draw_line(RenderedPage& p, int x1, int y1, int x2, int y2, int t) {
    int dx = std::abs(x2 - x1), dy = -std::abs(y2 - y1);
    int sx = x1 < x2 ? 1 : -1, sy = y1 < y2 ? 1 : -1;
    int err = dx + dy;
    int x = x1, y = y1;
    while (true) {
        draw_hline_block(p, x - t / 2, y - t / 2, t, t);
        if (x == x2 && y == y2) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y += sy;
        }
    }
}

// Filled triangular arrowhead with its tip at (tx, ty), pointing along the
// direction from (fx, fy) to the tip.
void draw_arrowhead(RenderedPage& p, int fx, int fy, int tx, int ty, int scale) {
    double dx = tx - fx, dy = ty - fy;
    const double len = std::sqrt(dx * dx + dy * dy);
    if (len < 1e-9) return;
    dx /= len;
    dy /= len;
    const double head_len = 4.0 * scale;
    const double head_w = 3.0 * scale;
    const double bx = tx - dx * head_len, by = ty - dy * head_len;
    const double p1x = bx - dy * head_w * 0.5, p1y = by + dx * head_w * 0.5;
    const double p2x = bx + dy * head_w * 0.5, p2y = by - dx * head_w * 0.5;
    // Half-plane fill over the bounding box.
    const int x_lo = static_cast<int>(std::floor(std::min({double(tx), p1x, p2x})));
    const int x_hi = static_cast<int>(std::ceil(std::max({double(tx), p1x, p2x})));
    const int y_lo = static_cast<int>(std::floor(std::min({double(ty), p1y, p2y})));
    const int y_hi = static_cast<int>(std::ceil(std::max({double(ty), p1y, p2y})));
    auto side = [](double ax, double ay, double bx2, double by2, double px, double py) {
        return (bx2 - ax) * (py - ay) - (by2 - ay) * (px - ax);
    };
    for (int y = std::max(0, y_lo); y <= std::min(p.height - 1, y_hi); ++y) {
        for (int x = std::max(0, x_lo); x <= std::min(p.width - 1, x_hi); ++x) {
            const double s1 = side(tx, ty, p1x, p1y, x, y);
            const double s2 = side(p1x, p1y, p2x, p2y, x, y);
            const double s3 = side(p2x, p2y, tx, ty, x, y);
            const bool neg = s1 < 0 || s2 < 0 || s3 < 0;
            const bool pos = s1 > 0 || s2 > 0 || s3 > 0;
            if (!(neg && pos)) p.pixels[static_cast<std::size_t>(y) * p.width + x] = 0;
        }
    }
}

ArrowPath route_edge(int from, int to, const std::vector<BoxPlacement>& boxes,
                     const RenderConfig& cfg) {
    const BoxPlacement& s = boxes[static_cast<std::size_t>(from)];
    const BoxPlacement& d = boxes[static_cast<std::size_t>(to)];
    ArrowPath a;
    a.from = from;
    a.to = to;
    if (s.page == d.page) {
        ArrowStub st;
        st.page = s.page;
        if (to == from + 1) {
            // Next box down: bottom-center to top-center.
            st.x1 = s.x + s.w / 2;
            st.y1 = s.y + s.h - 1;
            st.x2 = d.x + d.w / 2;
            st.y2 = d.y;
        } else if (from == to + 1) {
            // Previous box: top-center up to bottom-center.
            st.x1 = s.x + s.w / 2;
            st.y1 = s.y;
            st.x2 = d.x + d.w / 2;
            st.y2 = d.y + d.h - 1;
        } else {
            // Long-range dependency: right-edge midpoints.
            st.x1 = s.x + s.w - 1;
            st.y1 = s.y + s.h / 2;
            st.x2 = d.x + d.w - 1;
            st.y2 = d.y + d.h / 2;
        }
        st.head = true;
        a.stubs.push_back(st);
    } else {
        // Page break: stub down to the page edge, then in from the top.
        ArrowStub out;
        out.page = s.page;
        out.x1 = s.x + s.w / 2;
        out.y1 = s.y + s.h - 1;
        out.x2 = out.x1;
        out.y2 = cfg.page_h - 1 - cfg.margin;
        out.head = false;
        ArrowStub in;
        in.page = d.page;
        in.x1 = d.x + d.w / 2;
        in.y1 = cfg.margin;
        in.x2 = in.x1;
        in.y2 = d.y;
        in.head = true;
        a.stubs.push_back(out);
        a.stubs.push_back(in);
    }
    return a;
}

}  // namespace

void SegmentGraph::validate() const {
    require(!segments.empty(), "SegmentGraph: at least one segment required");
    const int n = static_cast<int>(segments.size());
    std::vector<std::pair<int, int>> seen;
    for (const auto& [f, t] : edges) {
        require(f >= 0 && f < n && t >= 0 && t < n, "SegmentGraph: edge index out of range");
        require(f != t, "SegmentGraph: self-edges not allowed");
        require(std::find(seen.begin(), seen.end(), std::make_pair(f, t)) == seen.end(),
                "SegmentGraph: duplicate edge");
        seen.emplace_back(f, t);
    }
}

void RenderConfig::validate() const {
    require(page_h > 0 && page_w > 0, "RenderConfig: page dimensions must be positive");
    require(min_scale >= 1 && min_scale <= default_scale && default_scale <= max_scale,
            "RenderConfig: need min <= default <= max font scale");
    require(blank_ceiling > 0.0 && blank_ceiling <= 1.0,
            "RenderConfig: blank ceiling must be in (0,1]");
    require(!delimiters.empty(), "RenderConfig: delimiter set must be non-empty");
    require(margin >= 0 && box_padding >= 0 && box_gap >= 0,
            "RenderConfig: negative spacing");
}

SegmentGraph segment(const std::string& text, const RenderConfig& config) {
    config.validate();
    if (trim(text).empty()) throw ContractViolation("segment: empty input text");

    // Pull out explicit dependency annotations ("#dep i->j" lines) first.
    std::vector<std::pair<int, int>> explicit_edges;
    std::string body;
    {
        std::istringstream in(text);
        std::string line;
        bool first = true;
        while (std::getline(in, line)) {
            const std::string t = trim(line);
            if (t.rfind("#dep ", 0) == 0) {
                int f = -1, to = -1;
                if (std::sscanf(t.c_str(), "#dep %d->%d", &f, &to) != 2)
                    throw ParseError("segment: malformed dependency annotation: " + t);
                explicit_edges.emplace_back(f, to);
            } else {
                if (!first) body += '\n';
                body += line;
                first = false;
            }
        }
    }

    // Split on every configured delimiter.
    std::vector<std::string> fragments{body};
    for (const auto& delim : config.delimiters) {
        if (delim.empty()) continue;
        std::vector<std::string> next;
        for (const auto& frag : fragments) {
            std::size_t pos = 0;
            while (true) {
                std::size_t hit = frag.find(delim, pos);
                if (hit == std::string::npos) {
                    next.push_back(frag.substr(pos));
                    break;
                }
                next.push_back(frag.substr(pos, hit - pos));
                pos = hit + delim.size();
            }
        }
        fragments = std::move(next);
    }

    SegmentGraph g;
    for (auto& f : fragments) {
        std::string t = trim(f);
        if (!t.empty()) g.segments.push_back(std::move(t));
    }
    if (g.segments.empty()) throw ContractViolation("segment: no non-empty segments");

    if (!explicit_edges.empty()) {
        g.edges = std::move(explicit_edges);
    } else {
        for (int i = 0; i + 1 < static_cast<int>(g.segments.size()); ++i)
            g.edges.emplace_back(i, i + 1);
    }
    g.validate();
    return g;
}

PageLayout layout_at_scale(const SegmentGraph& graph, const RenderConfig& config,
                           int scale) {
    graph.validate();
    config.validate();
    require(scale >= 1, "layout: scale must be >= 1");

    PageLayout out;
    out.font_scale = scale;
    const int y_limit = config.page_h - config.margin;
    int page = 0;
    int y = config.margin;
    bool first_on_page = true;
    for (const auto& seg : graph.segments) {
        auto geom = box_geometry(seg, config, scale);
        if (!geom || geom->h > config.page_h - 2 * config.margin) {
            throw ContractViolation(
                "layout: segment does not fit a page even alone at scale " +
                std::to_string(scale));
        }
        int y_next = first_on_page ? y : y + config.box_gap;
        if (y_next + geom->h > y_limit) {
            ++page;
            y = config.margin;
            y_next = y;
        }
        BoxPlacement b;
        b.page = page;
        b.x = config.margin;
        b.y = y_next;
        b.w = geom->w;
        b.h = geom->h;
        b.lines = std::move(geom->lines);
        out.boxes.push_back(std::move(b));
        y = y_next + out.boxes.back().h;
        first_on_page = false;
    }
    out.page_count = page + 1;
    for (const auto& [f, t] : graph.edges)
        out.arrows.push_back(route_edge(f, t, out.boxes, config));
    return out;
}

bool fits_single_page(const SegmentGraph& graph, const RenderConfig& config, int scale) {
    try {
        return layout_at_scale(graph, config, scale).page_count == 1;
    } catch (const ContractViolation&) {
        return false;
    }
}

PageLayout layout(const SegmentGraph& graph, const RenderConfig& config) {
    graph.validate();
    config.validate();

    int scale = config.default_scale;
    while (scale > config.min_scale && !fits_single_page(graph, config, scale)) --scale;

    if (!fits_single_page(graph, config, scale)) {
        // Minimum size and still overflowing: page out. Throws if a single
        // segment cannot be placed at all.
        return layout_at_scale(graph, config, scale);
    }

    // Blank-area rule: grow while more than blank_ceiling of the page is
    // background and the next size still fits on one page.
    while (scale < config.max_scale) {
        PageLayout cur = layout_at_scale(graph, config, scale);
        const auto pages = rasterize(cur, graph, config);
        if (blank_fraction(pages[0]) <= config.blank_ceiling) break;
        if (!fits_single_page(graph, config, scale + 1)) break;
        ++scale;
    }
    return layout_at_scale(graph, config, scale);
}

std::vector<RenderedPage> rasterize(const PageLayout& layout, const SegmentGraph& graph,
                                    const RenderConfig& config) {
    graph.validate();
    config.validate();
    require(layout.boxes.size() == graph.segments.size(),
            "rasterize: layout/graph box count mismatch");
    require(layout.arrows.size() == graph.edges.size(),
            "rasterize: layout/graph arrow count mismatch");
    for (std::size_t i = 0; i < layout.arrows.size(); ++i) {
        require(layout.arrows[i].from == graph.edges[i].first &&
                    layout.arrows[i].to == graph.edges[i].second,
                "rasterize: layout/graph edge mismatch");
    }

    std::vector<RenderedPage> pages(static_cast<std::size_t>(layout.page_count),
                                    blank_page(config));
    const int t = layout.font_scale;
    for (const auto& b : layout.boxes) {
        require(b.page >= 0 && b.page < layout.page_count, "rasterize: box page out of range");
        RenderedPage& p = pages[static_cast<std::size_t>(b.page)];
        draw_box_border(p, b, t);
        draw_text_lines(p, b, t, config.box_padding);
    }
    for (const auto& a : layout.arrows) {
        for (const auto& st : a.stubs) {
            RenderedPage& p = pages[static_cast<std::size_t>(st.page)];
            draw_line(p, st.x1, st.y1, st.x2, st.y2, t);
            if (st.head) draw_arrowhead(p, st.x1, st.y1, st.x2, st.y2, t);
        }
    }
    return pages;
}

RenderedPage blank_page(const RenderConfig& config) {
    RenderedPage p;
    p.width = config.page_w;
    p.height = config.page_h;
    p.pixels.assign(static_cast<std::size_t>(p.width) * p.height, 255);
    return p;
}

double blank_fraction(const RenderedPage& page) {
    std::size_t bg = 0;
    for (uint8_t v : page.pixels) bg += (v == 255);
    return static_cast<double>(bg) / static_cast<double>(page.pixels.size());
}

void write_page(const RenderedPage& page, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(os), "write_page: cannot open " + path);
    os << "P5\n" << page.width << " " << page.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(page.pixels.data()),
             static_cast<std::streamsize>(page.pixels.size()));
    require(static_cast<bool>(os), "write_page: write failed for " + path);
}

RenderedPage read_page(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("read_page: cannot open " + path);
    std::string content((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    auto fail = [&](const std::string& what) {
        throw ParseError("read_page: " + what + " at byte offset " + std::to_string(pos));
    };
    auto token = [&]() -> std::string {
        while (pos < content.size() && std::isspace(static_cast<unsigned char>(content[pos])))
            ++pos;
        std::size_t start = pos;
        while (pos < content.size() && !std::isspace(static_cast<unsigned char>(content[pos])))
            ++pos;
        if (start == pos) fail("unexpected end of header");
        return content.substr(start, pos - start);
    };
    if (token() != "P5") fail("not a binary PGM (P5) file");
    RenderedPage p;
    try {
        p.width = std::stoi(token());
        p.height = std::stoi(token());
        if (std::stoi(token()) != 255) fail("unsupported max value");
    } catch (const std::invalid_argument&) {
        fail("malformed header field");
    }
    if (p.width <= 0 || p.height <= 0) fail("non-positive dimensions");
    ++pos;  // single whitespace after maxval
    const std::size_t need = static_cast<std::size_t>(p.width) * p.height;
    if (content.size() - pos < need) {
        pos = content.size();
        fail("truncated pixel data");
    }
    p.pixels.assign(content.begin() + static_cast<std::ptrdiff_t>(pos),
                    content.begin() + static_cast<std::ptrdiff_t>(pos + need));
    return p;
}

void write_layout_sidecar(const PageLayout& layout, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    require(static_cast<bool>(os), "write_layout_sidecar: cannot open " + path);
    os << "fontscale " << layout.font_scale << "\n";
    os << "pages " << layout.page_count << "\n";
    for (std::size_t i = 0; i < layout.boxes.size(); ++i) {
        const auto& b = layout.boxes[i];
        os << "box " << i << " page " << b.page << " rect " << b.x << " " << b.y << " "
           << b.w << " " << b.h << " lines " << b.lines.size() << "\n";
    }
    for (const auto& a : layout.arrows) {
        for (const auto& st : a.stubs) {
            os << "arrow " << a.from << " " << a.to << " page " << st.page << " seg "
               << st.x1 << " " << st.y1 << " " << st.x2 << " " << st.y2
               << (st.head ? " head\n" : "\n");
        }
    }
}

}  // namespace imgcot::render
