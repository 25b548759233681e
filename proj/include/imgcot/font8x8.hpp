#pragma once

#include <array>
#include <cstdint>

namespace imgcot::font {

// Embedded 8x8 monospace bitmap font covering the character set the pipeline
// emits. Glyphs are 5x7 designs in an 8x8 cell; lowercase letters reuse the
// uppercase shapes. Row bytes are top-to-bottom, bit i (1<<i) is column i from
// the left. The atlas is the single source of truth for ink-count oracles.

using Glyph = std::array<uint8_t, 8>;

// Returns the glyph for c; unknown characters map to a hollow box.
const Glyph& glyph(char c);

// Number of set bits in the glyph (ink pixels at scale 1).
int glyph_ink(char c);

// True when c has a dedicated glyph (space counts as covered).
bool covered(char c);

}  // namespace imgcot::font
