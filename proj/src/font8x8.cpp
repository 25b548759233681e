#include "imgcot/font8x8.hpp"

#include <bit>
#include <map>

namespace imgcot::font {

namespace {

struct GlyphDef {
    char c;
    const char* rows[8];
};

// 5x7 designs; '#' is ink. Row 7 is left blank for line spacing.
const GlyphDef kDefs[] = {
    {' ', {"........", "........", "........", "........", "........", "........", "........", "........"}},
    {'A', {".###....", "#...#...", "#...#...", "#####...", "#...#...", "#...#...", "#...#...", "........"}},
    {'B', {"####....", "#...#...", "#...#...", "####....", "#...#...", "#...#...", "####....", "........"}},
    {'C', {".###....", "#...#...", "#.......", "#.......", "#.......", "#...#...", ".###....", "........"}},
    {'D', {"####....", "#...#...", "#...#...", "#...#...", "#...#...", "#...#...", "####....", "........"}},
    {'E', {"#####...", "#.......", "#.......", "####....", "#.......", "#.......", "#####...", "........"}},
    {'F', {"#####...", "#.......", "#.......", "####....", "#.......", "#.......", "#.......", "........"}},
    {'G', {".###....", "#...#...", "#.......", "#.###...", "#...#...", "#...#...", ".###....", "........"}},
    {'H', {"#...#...", "#...#...", "#...#...", "#####...", "#...#...", "#...#...", "#...#...", "........"}},
    {'I', {".###....", "..#.....", "..#.....", "..#.....", "..#.....", "..#.....", ".###....", "........"}},
    {'J', {"..###...", "...#....", "...#....", "...#....", "...#....", "#..#....", ".##.....", "........"}},
    {'K', {"#...#...", "#..#....", "#.#.....", "##......", "#.#.....", "#..#....", "#...#...", "........"}},
    {'L', {"#.......", "#.......", "#.......", "#.......", "#.......", "#.......", "#####...", "........"}},
    {'M', {"#...#...", "##.##...", "#.#.#...", "#.#.#...", "#...#...", "#...#...", "#...#...", "........"}},
    {'N', {"#...#...", "##..#...", "#.#.#...", "#..##...", "#...#...", "#...#...", "#...#...", "........"}},
    {'O', {".###....", "#...#...", "#...#...", "#...#...", "#...#...", "#...#...", ".###....", "........"}},
    {'P', {"####....", "#...#...", "#...#...", "####....", "#.......", "#.......", "#.......", "........"}},
    {'Q', {".###....", "#...#...", "#...#...", "#...#...", "#.#.#...", "#..#....", ".##.#...", "........"}},
    {'R', {"####....", "#...#...", "#...#...", "####....", "#.#.....", "#..#....", "#...#...", "........"}},
    {'S', {".####...", "#.......", ".###....", "....#...", "....#...", "#...#...", ".###....", "........"}},
    {'T', {"#####...", "..#.....", "..#.....", "..#.....", "..#.....", "..#.....", "..#.....", "........"}},
    {'U', {"#...#...", "#...#...", "#...#...", "#...#...", "#...#...", "#...#...", ".###....", "........"}},
    {'V', {"#...#...", "#...#...", "#...#...", "#...#...", "#...#...", ".#.#....", "..#.....", "........"}},
    {'W', {"#...#...", "#...#...", "#...#...", "#.#.#...", "#.#.#...", "##.##...", "#...#...", "........"}},
    {'X', {"#...#...", "#...#...", ".#.#....", "..#.....", ".#.#....", "#...#...", "#...#...", "........"}},
    {'Y', {"#...#...", "#...#...", ".#.#....", "..#.....", "..#.....", "..#.....", "..#.....", "........"}},
    {'Z', {"#####...", "....#...", "...#....", "..#.....", ".#......", "#.......", "#####...", "........"}},
    {'0', {".###....", "#...#...", "#..##...", "#.#.#...", "##..#...", "#...#...", ".###....", "........"}},
    {'1', {"..#.....", ".##.....", "..#.....", "..#.....", "..#.....", "..#.....", ".###....", "........"}},
    {'2', {".###....", "#...#...", "....#...", "..##....", ".#......", "#.......", "#####...", "........"}},
    {'3', {".###....", "#...#...", "....#...", "..##....", "....#...", "#...#...", ".###....", "........"}},
    {'4', {"...#....", "..##....", ".#.#....", "#..#....", "#####...", "...#....", "...#....", "........"}},
    {'5', {"#####...", "#.......", "####....", "....#...", "....#...", "#...#...", ".###....", "........"}},
    {'6', {".###....", "#.......", "#.......", "####....", "#...#...", "#...#...", ".###....", "........"}},
    {'7', {"#####...", "....#...", "...#....", "..#.....", ".#......", ".#......", ".#......", "........"}},
    {'8', {".###....", "#...#...", "#...#...", ".###....", "#...#...", "#...#...", ".###....", "........"}},
    {'9', {".###....", "#...#...", "#...#...", ".####...", "....#...", "....#...", ".###....", "........"}},
    {'.', {"........", "........", "........", "........", "........", ".##.....", ".##.....", "........"}},
    {',', {"........", "........", "........", "........", "........", "..#.....", ".#......", "........"}},
    {':', {"........", ".##.....", ".##.....", "........", ".##.....", ".##.....", "........", "........"}},
    {';', {"........", ".##.....", ".##.....", "........", ".##.....", "..#.....", ".#......", "........"}},
    {'!', {"..#.....", "..#.....", "..#.....", "..#.....", "..#.....", "........", "..#.....", "........"}},
    {'?', {".###....", "#...#...", "....#...", "..##....", "..#.....", "........", "..#.....", "........"}},
    {'+', {"........", "..#.....", "..#.....", "#####...", "..#.....", "..#.....", "........", "........"}},
    {'-', {"........", "........", "........", "#####...", "........", "........", "........", "........"}},
    {'*', {"........", "..#.....", "#.#.#...", ".###....", "#.#.#...", "..#.....", "........", "........"}},
    {'/', {"....#...", "....#...", "...#....", "..#.....", ".#......", "#.......", "#.......", "........"}},
    {'=', {"........", "........", "#####...", "........", "#####...", "........", "........", "........"}},
    {'(', {"...#....", "..#.....", ".#......", ".#......", ".#......", "..#.....", "...#....", "........"}},
    {')', {".#......", "..#.....", "...#....", "...#....", "...#....", "..#.....", ".#......", "........"}},
    {'<', {"...#....", "..#.....", ".#......", "#.......", ".#......", "..#.....", "...#....", "........"}},
    {'>', {"#.......", ".#......", "..#.....", "...#....", "..#.....", ".#......", "#.......", "........"}},
    {'#', {".#.#....", ".#.#....", "#####...", ".#.#....", "#####...", ".#.#....", ".#.#....", "........"}},
    {'\'', {"..#.....", "..#.....", "........", "........", "........", "........", "........", "........"}},
    {'"', {".#.#....", ".#.#....", "........", "........", "........", "........", "........", "........"}},
    {'%', {"##..#...", "##..#...", "...#....", "..#.....", ".#......", "#..##...", "#..##...", "........"}},
    {'&', {".##.....", "#..#....", "#..#....", ".##.....", "#.#.#...", "#..#....", ".##.#...", "........"}},
    {'[', {"..##....", "..#.....", "..#.....", "..#.....", "..#.....", "..#.....", "..##....", "........"}},
    {']', {".##.....", "..#.....", "..#.....", "..#.....", "..#.....", "..#.....", ".##.....", "........"}},
    {'_', {"........", "........", "........", "........", "........", "........", "#####...", "........"}},
    {'|', {"..#.....", "..#.....", "..#.....", "..#.....", "..#.....", "..#.....", "..#.....", "........"}},
};

// Unknown characters render as a hollow box.
const GlyphDef kFallback =
    {'\0', {"#####...", "#...#...", "#...#...", "#...#...", "#...#...", "#...#...", "#####...", "........"}};

Glyph parse(const GlyphDef& def) {
    Glyph g{};
    for (int r = 0; r < 8; ++r) {
        uint8_t row = 0;
        for (int c = 0; c < 8; ++c) {
            if (def.rows[r][c] == '#') row |= static_cast<uint8_t>(1u << c);
        }
        g[r] = row;
    }
    return g;
}

const std::map<char, Glyph>& atlas() {
    static const std::map<char, Glyph> m = [] {
        std::map<char, Glyph> a;
        for (const auto& d : kDefs) a[d.c] = parse(d);
        return a;
    }();
    return m;
}

char normalize(char c) {
    if (c >= 'a' && c <= 'z') return static_cast<char>(c - 'a' + 'A');
    return c;
}

}  // namespace

const Glyph& glyph(char c) {
    static const Glyph fallback = parse(kFallback);
    auto it = atlas().find(normalize(c));
    return it == atlas().end() ? fallback : it->second;
}

int glyph_ink(char c) {
    const Glyph& g = glyph(c);
    int n = 0;
    for (uint8_t row : g) n += std::popcount(row);
    return n;
}

bool covered(char c) { return atlas().count(normalize(c)) > 0; }

}  // namespace imgcot::font
