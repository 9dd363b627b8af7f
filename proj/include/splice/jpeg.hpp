#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

// Baseline-sequential JPEG parser and encoder working at the quantized
// DCT coefficient level. The parser stops after entropy decoding, so every
// coefficient seen downstream is exactly the integer coded in the stream.
// Progressive and arithmetic-coded streams are rejected (UnsupportedFormat).

namespace splice::jpeg {

struct QuantTable {
    std::array<uint16_t, 64> entries{}; // natural (row-major) order, each in [1,255]
    uint8_t table_id = 0;
};

struct ComponentSpec {
    uint8_t component_id = 0;
    int h_sampling = 1; // 1..4
    int v_sampling = 1;
    uint8_t quant_table_id = 0;
};

// Coefficients of one component over its coded (MCU-padded) block grid.
// Each block is 64 int16 values in natural order; block[0] is the absolute
// (DC-prediction resolved) quantized DC value.
struct ComponentCoefficients {
    int blocks_w = 0;
    int blocks_h = 0;
    std::vector<int16_t> coeffs; // blocks_h * blocks_w * 64

    const int16_t* block(int bx, int by) const {
        return coeffs.data() + (static_cast<size_t>(by) * blocks_w + bx) * 64;
    }
    int16_t* block(int bx, int by) {
        return coeffs.data() + (static_cast<size_t>(by) * blocks_w + bx) * 64;
    }
    size_t block_count() const {
        return static_cast<size_t>(blocks_w) * blocks_h;
    }
};

struct CoefficientImage {
    int width = 0;  // pixels
    int height = 0;
    std::vector<ComponentSpec> components;       // index 0 = luma
    std::vector<ComponentCoefficients> planes;   // parallel to components
    std::array<std::optional<QuantTable>, 4> quant_tables;
    int restart_interval = 0;
};

struct PixelImage {
    int width = 0;
    int height = 0;
    int channels = 0; // 1 (gray) or 3 (RGB interleaved)
    std::vector<uint8_t> data;

    uint8_t at(int x, int y, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    uint8_t& at(int x, int y, int c) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    size_t sample_count() const { return data.size(); }
};

enum class Subsampling { s444, s420 };

// Zig-zag position -> natural 8x8 index (bijection; 0 -> 0, 1 -> 1, 2 -> 8).
const std::array<uint8_t, 64>& zigzag_to_natural();

// IJG quality scaling of the Annex K base tables. qf in [1,100].
std::pair<QuantTable, QuantTable> quality_to_tables(int qf);

// Entropy-decode a baseline JPEG stream down to quantized coefficients.
CoefficientImage parse_coefficients(std::span<const uint8_t> bytes);

// Dequantize + IDCT + upsample + BT.601 color conversion.
PixelImage decode_pixels(const CoefficientImage& coef);

// Encode with quality_to_tables(qf) and the Annex K standard Huffman tables.
// When coeffs_out is non-null it receives the quantized coefficients exactly
// as written to the stream (round-trip oracle hook).
std::vector<uint8_t> encode(const PixelImage& img, int qf,
                            Subsampling subsampling = Subsampling::s420,
                            CoefficientImage* coeffs_out = nullptr);

// decode_pixels(parse_coefficients(bytes)) re-encoded at qf2; the input's
// subsampling layout (and grayscale-ness) is preserved.
std::vector<uint8_t> recompress(std::span<const uint8_t> bytes, int qf2);

// File helpers.
std::vector<uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const uint8_t> bytes);

} // namespace splice::jpeg
