#include "splice/jpeg.hpp"
#include "jpeg_internal.hpp"

#include "splice/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

namespace splice::jpeg {
namespace detail {

const std::array<uint16_t, 64> kBaseLumaQuant = {
    16,  11,  10,  16,  24,  40,  51,  61,
    12,  12,  14,  19,  26,  58,  60,  55,
    14,  13,  16,  24,  40,  57,  69,  56,
    14,  17,  22,  29,  51,  87,  80,  62,
    18,  22,  37,  56,  68,  109, 103, 77,
    24,  35,  55,  64,  81,  104, 113, 92,
    49,  64,  78,  87,  103, 121, 120, 101,
    72,  92,  95,  98,  112, 100, 103, 99,
};

const std::array<uint16_t, 64> kBaseChromaQuant = {
    17, 18, 24, 47, 99, 99, 99, 99,
    18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99,
    47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99,
};

const std::array<uint8_t, 64> kZigzagToNatural = {
    0,  1,  8,  16, 9,  2,  3,  10,
    17, 24, 32, 25, 18, 11, 4,  5,
    12, 19, 26, 33, 40, 48, 41, 34,
    27, 20, 13, 6,  7,  14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36,
    29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46,
    53, 60, 61, 54, 47, 55, 62, 63,
};

const std::array<uint8_t, 64> kNaturalToZigzag = [] {
    std::array<uint8_t, 64> inv{};
    for (int z = 0; z < 64; ++z) inv[kZigzagToNatural[z]] = static_cast<uint8_t>(z);
    return inv;
}();

namespace {

const uint8_t kDcLumaBits[17] = {0, 0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
const uint8_t kDcLumaVals[12] = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};

const uint8_t kDcChromaBits[17] = {0, 0, 3, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
const uint8_t kDcChromaVals[12] = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};

const uint8_t kAcLumaBits[17] = {0, 0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7d};
const uint8_t kAcLumaVals[162] = {
    0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12, 0x21, 0x31, 0x41, 0x06,
    0x13, 0x51, 0x61, 0x07, 0x22, 0x71, 0x14, 0x32, 0x81, 0x91, 0xa1, 0x08,
    0x23, 0x42, 0xb1, 0xc1, 0x15, 0x52, 0xd1, 0xf0, 0x24, 0x33, 0x62, 0x72,
    0x82, 0x09, 0x0a, 0x16, 0x17, 0x18, 0x19, 0x1a, 0x25, 0x26, 0x27, 0x28,
    0x29, 0x2a, 0x34, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3a, 0x43, 0x44, 0x45,
    0x46, 0x47, 0x48, 0x49, 0x4a, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59,
    0x5a, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6a, 0x73, 0x74, 0x75,
    0x76, 0x77, 0x78, 0x79, 0x7a, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89,
    0x8a, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9a, 0xa2, 0xa3,
    0xa4, 0xa5, 0xa6, 0xa7, 0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4, 0xb5, 0xb6,
    0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3, 0xc4, 0xc5, 0xc6, 0xc7, 0xc8, 0xc9,
    0xca, 0xd2, 0xd3, 0xd4, 0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda, 0xe1, 0xe2,
    0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8, 0xe9, 0xea, 0xf1, 0xf2, 0xf3, 0xf4,
    0xf5, 0xf6, 0xf7, 0xf8, 0xf9, 0xfa,
};

const uint8_t kAcChromaBits[17] = {0, 0, 2, 1, 2, 4, 4, 3, 4, 7, 5, 4, 4, 0, 1, 2, 0x77};
const uint8_t kAcChromaVals[162] = {
    0x00, 0x01, 0x02, 0x03, 0x11, 0x04, 0x05, 0x21, 0x31, 0x06, 0x12, 0x41,
    0x51, 0x07, 0x61, 0x71, 0x13, 0x22, 0x32, 0x81, 0x08, 0x14, 0x42, 0x91,
    0xa1, 0xb1, 0xc1, 0x09, 0x23, 0x33, 0x52, 0xf0, 0x15, 0x62, 0x72, 0xd1,
    0x0a, 0x16, 0x24, 0x34, 0xe1, 0x25, 0xf1, 0x17, 0x18, 0x19, 0x1a, 0x26,
    0x27, 0x28, 0x29, 0x2a, 0x35, 0x36, 0x37, 0x38, 0x39, 0x3a, 0x43, 0x44,
    0x45, 0x46, 0x47, 0x48, 0x49, 0x4a, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58,
    0x59, 0x5a, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69, 0x6a, 0x73, 0x74,
    0x75, 0x76, 0x77, 0x78, 0x79, 0x7a, 0x82, 0x83, 0x84, 0x85, 0x86, 0x87,
    0x88, 0x89, 0x8a, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98, 0x99, 0x9a,
    0xa2, 0xa3, 0xa4, 0xa5, 0xa6, 0xa7, 0xa8, 0xa9, 0xaa, 0xb2, 0xb3, 0xb4,
    0xb5, 0xb6, 0xb7, 0xb8, 0xb9, 0xba, 0xc2, 0xc3, 0xc4, 0xc5, 0xc6, 0xc7,
    0xc8, 0xc9, 0xca, 0xd2, 0xd3, 0xd4, 0xd5, 0xd6, 0xd7, 0xd8, 0xd9, 0xda,
    0xe2, 0xe3, 0xe4, 0xe5, 0xe6, 0xe7, 0xe8, 0xe9, 0xea, 0xf2, 0xf3, 0xf4,
    0xf5, 0xf6, 0xf7, 0xf8, 0xf9, 0xfa,
};

// 8x8 DCT basis, basis[u][x] = 0.5 * C(u) * cos((2x + 1) * u * pi / 16).
struct DctBasis {
    double m[8][8];
    DctBasis() {
        const double pi = 3.14159265358979323846;
        for (int u = 0; u < 8; ++u) {
            double cu = u == 0 ? 1.0 / std::sqrt(2.0) : 1.0;
            for (int x = 0; x < 8; ++x)
                m[u][x] = 0.5 * cu * std::cos((2 * x + 1) * u * pi / 16.0);
        }
    }
};
const DctBasis kBasis;

} // namespace

const HuffSpec& std_dc_luma() {
    static const HuffSpec s{kDcLumaBits, kDcLumaVals, 12};
    return s;
}
const HuffSpec& std_ac_luma() {
    static const HuffSpec s{kAcLumaBits, kAcLumaVals, 162};
    return s;
}
const HuffSpec& std_dc_chroma() {
    static const HuffSpec s{kDcChromaBits, kDcChromaVals, 12};
    return s;
}
const HuffSpec& std_ac_chroma() {
    static const HuffSpec s{kAcChromaBits, kAcChromaVals, 162};
    return s;
}

void fdct_8x8(const double* in, double* out) {
    // F = M * f * M^T, computed as two separable passes.
    double tmp[64];
    for (int u = 0; u < 8; ++u)
        for (int y = 0; y < 8; ++y) {
            double acc = 0.0;
            for (int x = 0; x < 8; ++x) acc += kBasis.m[u][x] * in[x * 8 + y];
            tmp[u * 8 + y] = acc;
        }
    for (int u = 0; u < 8; ++u)
        for (int v = 0; v < 8; ++v) {
            double acc = 0.0;
            for (int y = 0; y < 8; ++y) acc += tmp[u * 8 + y] * kBasis.m[v][y];
            out[u * 8 + v] = acc;
        }
}

void idct_8x8(const double* in, double* out) {
    // f = M^T * F * M.
    double tmp[64];
    for (int x = 0; x < 8; ++x)
        for (int v = 0; v < 8; ++v) {
            double acc = 0.0;
            for (int u = 0; u < 8; ++u) acc += kBasis.m[u][x] * in[u * 8 + v];
            tmp[x * 8 + v] = acc;
        }
    for (int x = 0; x < 8; ++x)
        for (int y = 0; y < 8; ++y) {
            double acc = 0.0;
            for (int v = 0; v < 8; ++v) acc += tmp[x * 8 + v] * kBasis.m[v][y];
            out[x * 8 + y] = acc;
        }
}

} // namespace detail

const std::array<uint8_t, 64>& zigzag_to_natural() {
    return detail::kZigzagToNatural;
}

std::pair<QuantTable, QuantTable> quality_to_tables(int qf) {
    if (qf < 1 || qf > 100)
        throw RangeError("quality factor out of range: " + std::to_string(qf));
    int scale = qf < 50 ? 5000 / qf : 200 - 2 * qf;
    QuantTable luma, chroma;
    luma.table_id = 0;
    chroma.table_id = 1;
    for (size_t i = 0; i < 64; ++i) {
        int l = (detail::kBaseLumaQuant[i] * scale + 50) / 100;
        int c = (detail::kBaseChromaQuant[i] * scale + 50) / 100;
        luma.entries[i] = static_cast<uint16_t>(std::clamp(l, 1, 255));
        chroma.entries[i] = static_cast<uint16_t>(std::clamp(c, 1, 255));
    }
    return {luma, chroma};
}

std::vector<uint8_t> read_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open for reading: " + path);
    std::fseek(f, 0, SEEK_END);
    long size = std::ftell(f);
    if (size < 0) {
        std::fclose(f);
        throw IoError("cannot determine size of: " + path);
    }
    std::fseek(f, 0, SEEK_SET);
    std::vector<uint8_t> data(static_cast<size_t>(size));
    size_t got = size > 0 ? std::fread(data.data(), 1, data.size(), f) : 0;
    std::fclose(f);
    if (got != data.size()) throw IoError("short read on: " + path);
    return data;
}

void write_file(const std::string& path, std::span<const uint8_t> bytes) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot open for writing: " + path);
    size_t put = bytes.empty() ? 0 : std::fwrite(bytes.data(), 1, bytes.size(), f);
    int rc = std::fclose(f);
    if (put != bytes.size() || rc != 0) throw IoError("short write on: " + path);
}

} // namespace splice::jpeg
