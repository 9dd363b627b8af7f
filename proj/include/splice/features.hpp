#pragma once

#include "splice/jpeg.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

// Compression-domain features: per-coefficient value histograms taken
// directly from the quantized luma DCT coefficients, at the resolution the
// image was actually coded at.

namespace splice::feat {

constexpr int kNumCoeffs = 16; // zig-zag AC positions 1..16
constexpr int kNumBins = 128;  // coefficient values -63..64, clamped
constexpr int kFeatureSize = kNumCoeffs * kNumBins;

// Row r counts the zig-zag position r+1 coefficient over every coded luma
// block (padding blocks included); column b holds value b - 63 after
// clamping to [-63, 64]. Every row therefore sums to block_count.
struct Histogram {
    std::array<uint32_t, kFeatureSize> counts{};
    uint32_t block_count = 0;

    uint32_t at(int coeff_row, int bin) const {
        return counts[static_cast<size_t>(coeff_row) * kNumBins + bin];
    }
};

Histogram ac_histograms(const jpeg::CoefficientImage& img);

// (x - mean) / max(stddev, 1e-8) over all 2048 entries, computed in double
// precision (population standard deviation), emitted as float32.
std::vector<float> standardize(const Histogram& h);

std::vector<float> extract_features(const jpeg::CoefficientImage& img);

// standardize(ac_histograms(parse_coefficients(bytes))): works on the coded
// stream alone, no pixel decode involved.
std::vector<float> extract_features(std::span<const uint8_t> jpeg_bytes);

// Feature cache ("DCTF" container): label + standardized features + source
// path per sample.
struct Sample {
    uint8_t label = 0; // 0 original, 1 spliced
    std::vector<float> features;
    std::string path;
};

void save_cache(const std::string& path, const std::vector<Sample>& samples);
std::vector<Sample> load_cache(const std::string& path);

} // namespace splice::feat
