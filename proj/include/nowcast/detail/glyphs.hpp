#pragma once

// 10x12 bitmap glyphs for printable ASCII (32..126): advance width, then one row per
// entry with bit 9 as the leftmost column.

#include <array>
#include <cstdint>

namespace nowcast::detail {

inline constexpr int kGlyphWidth = 10;
inline constexpr int kGlyphHeight = 12;

struct Glyph {
  int advance;
  std::array<std::uint16_t, kGlyphHeight> rows;
};

inline constexpr std::array<Glyph, 95> kGlyphs{{
    {3, {0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000}},
    {3, {0x000, 0x080, 0x080, 0x080, 0x080, 0x080, 0x000, 0x000, 0x080, 0x000, 0x000, 0x000}},
    {3, {0x000, 0x0c0, 0x0c0, 0x0c0, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x050, 0x060, 0x060, 0x0f0, 0x0a0, 0x0f0, 0x0a0, 0x0c0, 0x000, 0x000, 0x000}},
    {7, {0x020, 0x070, 0x0a8, 0x0a8, 0x0e0, 0x030, 0x028, 0x0a8, 0x070, 0x020, 0x000, 0x000}},
    {7, {0x000, 0x0e4, 0x0a8, 0x0a8, 0x0f0, 0x01e, 0x02a, 0x04a, 0x04e, 0x000, 0x000, 0x000}},
    {7, {0x000, 0x070, 0x080, 0x088, 0x07c, 0x088, 0x088, 0x088, 0x078, 0x000, 0x000, 0x000}},
    {3, {0x000, 0x080, 0x080, 0x080, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000}},
    {4, {0x000, 0x040, 0x080, 0x080, 0x080, 0x080, 0x080, 0x080, 0x040, 0x040, 0x000, 0x000}},
    {3, {0x000, 0x200, 0x100, 0x100, 0x100, 0x100, 0x100, 0x100, 0x200, 0x200, 0x000, 0x000}},
    {7, {0x000, 0x000, 0x000, 0x000, 0x020, 0x0a8, 0x070, 0x050, 0x000, 0x000, 0x000, 0x000}},
    {7, {0x000, 0x000, 0x000, 0x020, 0x020, 0x0f8, 0x020, 0x020, 0x000, 0x000, 0x000, 0x000}},
    {3, {0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x100, 0x200, 0x000, 0x000}},
    {3, {0x000, 0x000, 0x000, 0x000, 0x000, 0x180, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000}},
    {3, {0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x080, 0x000, 0x000, 0x000}},
    {3, {0x000, 0x080, 0x080, 0x100, 0x100, 0x100, 0x200, 0x200, 0x200, 0x200, 0x000, 0x000}},
    {6, {0x000, 0x070, 0x0d8, 0x088, 0x088, 0x088, 0x088, 0x0d8, 0x070, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x060, 0x0a0, 0x020, 0x020, 0x020, 0x020, 0x020, 0x020, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x060, 0x090, 0x010, 0x010, 0x020, 0x040, 0x080, 0x1f0, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x0e0, 0x110, 0x010, 0x060, 0x010, 0x110, 0x110, 0x0e0, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x010, 0x030, 0x050, 0x050, 0x090, 0x1f8, 0x010, 0x010, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x0f0, 0x100, 0x100, 0x160, 0x190, 0x010, 0x110, 0x0e0, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x070, 0x048, 0x088, 0x0f0, 0x088, 0x088, 0x088, 0x070, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x1f0, 0x010, 0x020, 0x020, 0x040, 0x040, 0x080, 0x080, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x070, 0x088, 0x088, 0x070, 0x088, 0x088, 0x088, 0x070, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x070, 0x088, 0x088, 0x088, 0x078, 0x088, 0x090, 0x070, 0x000, 0x000, 0x000}},
    {3, {0x000, 0x000, 0x000, 0x080, 0x000, 0x000, 0x000, 0x000, 0x080, 0x000, 0x000, 0x000}},
    {3, {0x000, 0x000, 0x000, 0x080, 0x000, 0x000, 0x000, 0x000, 0x080, 0x100, 0x000, 0x000}},
    {6, {0x000, 0x000, 0x000, 0x000, 0x030, 0x0c0, 0x080, 0x060, 0x010, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x000, 0x000, 0x000, 0x0f0, 0x000, 0x0f0, 0x000, 0x000, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x000, 0x000, 0x000, 0x0c0, 0x030, 0x010, 0x060, 0x080, 0x000, 0x000, 0x000}},
    {4, {0x000, 0x060, 0x090, 0x090, 0x010, 0x020, 0x020, 0x000, 0x020, 0x000, 0x000, 0x000}},
    {10, {0x000, 0x01c, 0x062, 0x05d, 0x0a5, 0x0a5, 0x0a9, 0x0b6, 0x040, 0x03c, 0x000, 0x000}},
    {6, {0x000, 0x020, 0x060, 0x050, 0x090, 0x0f0, 0x088, 0x088, 0x108, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x0f0, 0x088, 0x088, 0x090, 0x0f8, 0x088, 0x088, 0x0f0, 0x000, 0x000, 0x000}},
    {7, {0x000, 0x038, 0x044, 0x084, 0x080, 0x080, 0x084, 0x044, 0x078, 0x000, 0x000, 0x000}},
    {7, {0x000, 0x0f0, 0x088, 0x084, 0x084, 0x084, 0x084, 0x088, 0x0f0, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x0f8, 0x080, 0x080, 0x080, 0x0f0, 0x080, 0x080, 0x0f8, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x0f8, 0x080, 0x080, 0x080, 0x0f0, 0x080, 0x080, 0x080, 0x000, 0x000, 0x000}},
    {7, {0x000, 0x038, 0x04c, 0x084, 0x080, 0x09c, 0x084, 0x04c, 0x074, 0x000, 0x000, 0x000}},
    {8, {0x000, 0x084, 0x084, 0x084, 0x084, 0x0fc, 0x084, 0x084, 0x084, 0x000, 0x000, 0x000}},
    {3, {0x000, 0x080, 0x080, 0x080, 0x080, 0x080, 0x080, 0x080, 0x080, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x010, 0x010, 0x010, 0x010, 0x010, 0x090, 0x090, 0x060, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x088, 0x090, 0x0a0, 0x0a0, 0x0e0, 0x0a0, 0x090, 0x088, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x080, 0x080, 0x080, 0x080, 0x080, 0x080, 0x080, 0x0f8, 0x000, 0x000, 0x000}},
    {9, {0x000, 0x0c6, 0x0c6, 0x0c6, 0x0aa, 0x0aa, 0x0aa, 0x0b2, 0x092, 0x000, 0x000, 0x000}},
    {8, {0x000, 0x0c8, 0x0c8, 0x0c8, 0x0a8, 0x0a8, 0x0a8, 0x098, 0x098, 0x000, 0x000, 0x000}},
    {7, {0x000, 0x038, 0x044, 0x082, 0x082, 0x082, 0x082, 0x044, 0x038, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x0f0, 0x088, 0x088, 0x088, 0x0f0, 0x080, 0x080, 0x080, 0x000, 0x000, 0x000}},
    {7, {0x000, 0x038, 0x044, 0x082, 0x082, 0x082, 0x082, 0x044, 0x03e, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x0f0, 0x088, 0x088, 0x088, 0x0f0, 0x098, 0x088, 0x088, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x070, 0x088, 0x080, 0x040, 0x038, 0x008, 0x088, 0x070, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x0f8, 0x020, 0x020, 0x020, 0x020, 0x020, 0x020, 0x020, 0x000, 0x000, 0x000}},
    {7, {0x000, 0x088, 0x088, 0x088, 0x088, 0x088, 0x088, 0x088, 0x070, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x108, 0x088, 0x088, 0x090, 0x050, 0x050, 0x060, 0x020, 0x000, 0x000, 0x000}},
    {10, {0x000, 0x119, 0x099, 0x099, 0x0a9, 0x0aa, 0x0a6, 0x066, 0x046, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x088, 0x090, 0x050, 0x060, 0x060, 0x050, 0x090, 0x088, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x088, 0x088, 0x050, 0x050, 0x020, 0x020, 0x020, 0x020, 0x000, 0x000, 0x000}},
    {7, {0x000, 0x0f8, 0x008, 0x010, 0x020, 0x020, 0x040, 0x080, 0x0f8, 0x000, 0x000, 0x000}},
    {3, {0x0c0, 0x080, 0x080, 0x080, 0x080, 0x080, 0x080, 0x080, 0x080, 0x0c0, 0x000, 0x000}},
    {3, {0x000, 0x200, 0x200, 0x200, 0x100, 0x100, 0x100, 0x100, 0x080, 0x080, 0x000, 0x000}},
    {3, {0x300, 0x100, 0x100, 0x100, 0x100, 0x100, 0x100, 0x100, 0x100, 0x300, 0x000, 0x000}},
    {6, {0x000, 0x000, 0x000, 0x060, 0x0a0, 0x0a0, 0x090, 0x000, 0x000, 0x000, 0x000, 0x000}},
    {5, {0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x1f0, 0x000, 0x000}},
    {3, {0x000, 0x000, 0x080, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000, 0x000}},
    {5, {0x000, 0x000, 0x000, 0x070, 0x090, 0x030, 0x0d0, 0x090, 0x0f0, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x080, 0x080, 0x0f0, 0x088, 0x088, 0x088, 0x088, 0x0f0, 0x000, 0x000, 0x000}},
    {5, {0x000, 0x000, 0x000, 0x070, 0x088, 0x080, 0x080, 0x088, 0x070, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x008, 0x008, 0x078, 0x088, 0x088, 0x088, 0x088, 0x078, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x000, 0x000, 0x070, 0x088, 0x0f8, 0x080, 0x088, 0x070, 0x000, 0x000, 0x000}},
    {3, {0x040, 0x080, 0x080, 0x1c0, 0x080, 0x080, 0x080, 0x080, 0x080, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x000, 0x000, 0x078, 0x088, 0x088, 0x088, 0x088, 0x078, 0x088, 0x070, 0x000}},
    {7, {0x000, 0x080, 0x080, 0x0f0, 0x0c8, 0x088, 0x088, 0x088, 0x088, 0x000, 0x000, 0x000}},
    {3, {0x000, 0x080, 0x000, 0x080, 0x080, 0x080, 0x080, 0x080, 0x080, 0x000, 0x000, 0x000}},
    {3, {0x000, 0x080, 0x000, 0x080, 0x080, 0x080, 0x080, 0x080, 0x080, 0x080, 0x180, 0x000}},
    {6, {0x000, 0x080, 0x080, 0x090, 0x0a0, 0x0c0, 0x0a0, 0x0a0, 0x090, 0x000, 0x000, 0x000}},
    {3, {0x000, 0x080, 0x080, 0x080, 0x080, 0x080, 0x080, 0x080, 0x0c0, 0x000, 0x000, 0x000}},
    {9, {0x000, 0x000, 0x000, 0x0ee, 0x092, 0x092, 0x092, 0x092, 0x092, 0x000, 0x000, 0x000}},
    {7, {0x000, 0x000, 0x000, 0x0f0, 0x0c8, 0x088, 0x088, 0x088, 0x088, 0x000, 0x000, 0x000}},
    {5, {0x000, 0x000, 0x000, 0x070, 0x088, 0x088, 0x088, 0x088, 0x070, 0x000, 0x000, 0x000}},
    {6, {0x000, 0x000, 0x000, 0x0f0, 0x088, 0x088, 0x088, 0x088, 0x0f0, 0x080, 0x080, 0x000}},
    {6, {0x000, 0x000, 0x000, 0x078, 0x088, 0x088, 0x088, 0x088, 0x078, 0x008, 0x008, 0x000}},
    {4, {0x000, 0x000, 0x000, 0x0e0, 0x080, 0x080, 0x080, 0x080, 0x080, 0x000, 0x000, 0x000}},
    {4, {0x000, 0x000, 0x000, 0x0e0, 0x090, 0x0c0, 0x030, 0x090, 0x0f0, 0x000, 0x000, 0x000}},
    {3, {0x000, 0x080, 0x080, 0x1c0, 0x080, 0x080, 0x080, 0x080, 0x0c0, 0x000, 0x000, 0x000}},
    {7, {0x000, 0x000, 0x000, 0x088, 0x088, 0x088, 0x088, 0x098, 0x078, 0x000, 0x000, 0x000}},
    {5, {0x000, 0x000, 0x000, 0x110, 0x110, 0x0a0, 0x0a0, 0x0a0, 0x040, 0x000, 0x000, 0x000}},
    {8, {0x000, 0x000, 0x000, 0x132, 0x134, 0x0b4, 0x0d4, 0x0cc, 0x048, 0x000, 0x000, 0x000}},
    {5, {0x000, 0x000, 0x000, 0x240, 0x140, 0x080, 0x180, 0x140, 0x240, 0x000, 0x000, 0x000}},
    {5, {0x000, 0x000, 0x000, 0x110, 0x110, 0x0a0, 0x0a0, 0x0a0, 0x040, 0x040, 0x080, 0x000}},
    {6, {0x000, 0x000, 0x000, 0x0f0, 0x010, 0x020, 0x040, 0x080, 0x0f0, 0x000, 0x000, 0x000}},
    {3, {0x0c0, 0x080, 0x080, 0x080, 0x080, 0x080, 0x080, 0x080, 0x080, 0x0c0, 0x000, 0x000}},
    {3, {0x080, 0x080, 0x080, 0x080, 0x080, 0x080, 0x080, 0x080, 0x080, 0x080, 0x080, 0x000}},
    {3, {0x180, 0x080, 0x080, 0x080, 0x080, 0x080, 0x080, 0x080, 0x080, 0x180, 0x000, 0x000}},
    {6, {0x000, 0x000, 0x000, 0x000, 0x000, 0x0d0, 0x0b0, 0x000, 0x000, 0x000, 0x000, 0x000}},
}};

}  // namespace nowcast::detail
