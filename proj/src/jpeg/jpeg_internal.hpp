#pragma once

#include <array>
#include <cstdint>

// Shared tables and block transforms for the baseline codec.

namespace splice::jpeg::detail {

// ITU-T T.81 Annex K.1 base quantization tables, natural order.
extern const std::array<uint16_t, 64> kBaseLumaQuant;
extern const std::array<uint16_t, 64> kBaseChromaQuant;

// Annex K.3 typical Huffman tables: BITS (index 1..16) and HUFFVAL.
struct HuffSpec {
    const uint8_t* bits;   // bits[0] unused, bits[1..16] = code count per length
    const uint8_t* values; // symbols in code order
    int value_count;
};
const HuffSpec& std_dc_luma();
const HuffSpec& std_ac_luma();
const HuffSpec& std_dc_chroma();
const HuffSpec& std_ac_chroma();

// zigzag position -> natural index and its inverse.
extern const std::array<uint8_t, 64> kZigzagToNatural;
extern const std::array<uint8_t, 64> kNaturalToZigzag;

// Forward DCT of a level-shifted 8x8 block (JPEG normalization).
void fdct_8x8(const double* in, double* out);
// Inverse DCT; output still needs +128 level shift and clamping.
void idct_8x8(const double* in, double* out);

// Number of magnitude bits needed for v (JPEG "category"/SSSS).
inline int bit_category(int v) {
    int a = v < 0 ? -v : v;
    int s = 0;
    while (a) {
        ++s;
        a >>= 1;
    }
    return s;
}

} // namespace splice::jpeg::detail
