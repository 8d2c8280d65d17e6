#include <cstdlib>

#include "cplab/image.hpp"

namespace cplab::img {

namespace {

// Fixture pixel levels sit on the 8-bit grid so PNG round-trips are exact.
constexpr float kDark = 38.0f / 255.0f;     // ~0.149
constexpr float kBright = 217.0f / 255.0f;  // ~0.851

// Blocky "DK" monogram, strokes kept >= 2 px wide so they survive the
// nearest-neighbor resize down to the default 10x10 patch.
const char* const kGlyphRows[16] = {
    "................",
    ".########.......",
    ".#########......",
    ".###....###.....",
    ".###.....###....",
    ".###.....###....",
    ".###.....###....",
    ".###....###.....",
    ".#########......",
    ".########.......",
    "................",
    ".###...####.....",
    ".###..####......",
    ".########.......",
    ".###..####......",
    ".###...####.....",
};

}  // namespace

Image default_trigger_glyph() {
    Image g(16, 16, 1, kDark);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            if (kGlyphRows[y][x] == '#') g.at(y, x) = kBright;
    return g;
}

Image default_attack_target() {
    // 8-px checkerboard with contrast-inverted diagonal X strokes
    constexpr float kLo = 26.0f / 255.0f;
    constexpr float kHi = 230.0f / 255.0f;
    Image t(32, 32, 1);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            const bool board = ((y / 8) + (x / 8)) % 2 == 0;
            const bool on_x = std::abs(y - x) <= 2 || std::abs(y + x - 31) <= 2;
            float v = board ? kHi : kLo;
            if (on_x) v = board ? 0.0f : 1.0f;
            t.at(y, x) = v;
        }
    return t;
}

}  // namespace cplab::img
