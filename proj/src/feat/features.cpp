#include "splice/features.hpp"

#include "splice/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace splice::feat {
namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

void put_f32(std::vector<uint8_t>& out, float f) {
    uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(out, v);
}

struct Cursor {
    const std::vector<uint8_t>& bytes;
    size_t pos = 0;

    uint8_t u8() {
        if (pos >= bytes.size()) throw LoadError("feature cache truncated");
        return bytes[pos++];
    }
    uint32_t u32() {
        if (pos + 4 > bytes.size()) throw LoadError("feature cache truncated");
        uint32_t v = static_cast<uint32_t>(bytes[pos]) |
                     (static_cast<uint32_t>(bytes[pos + 1]) << 8) |
                     (static_cast<uint32_t>(bytes[pos + 2]) << 16) |
                     (static_cast<uint32_t>(bytes[pos + 3]) << 24);
        pos += 4;
        return v;
    }
    float f32() {
        uint32_t v = u32();
        float f;
        std::memcpy(&f, &v, 4);
        return f;
    }
};

constexpr uint32_t kCacheVersion = 1;

} // namespace

Histogram ac_histograms(const jpeg::CoefficientImage& img) {
    if (img.components.empty() || img.planes.empty())
        throw EmptyImage("ac_histograms: no components");
    const auto& luma = img.planes[0];
    if (luma.block_count() == 0) throw EmptyImage("ac_histograms: no coded luma blocks");

    const auto& zig = jpeg::zigzag_to_natural();
    Histogram h;
    const size_t nblocks = luma.block_count();
    h.block_count = static_cast<uint32_t>(nblocks);
    for (size_t b = 0; b < nblocks; ++b) {
        const int16_t* blk = luma.coeffs.data() + b * 64;
        for (int r = 0; r < kNumCoeffs; ++r) {
            int v = blk[zig[static_cast<size_t>(r + 1)]];
            int bin = std::clamp(v, -63, 64) + 63;
            ++h.counts[static_cast<size_t>(r) * kNumBins + bin];
        }
    }
    return h;
}

std::vector<float> standardize(const Histogram& h) {
    double mean = 0.0;
    for (uint32_t c : h.counts) mean += c;
    mean /= kFeatureSize;
    double var = 0.0;
    for (uint32_t c : h.counts) {
        double d = c - mean;
        var += d * d;
    }
    var /= kFeatureSize;
    double sd = std::max(std::sqrt(var), 1e-8);

    std::vector<float> out(kFeatureSize);
    for (int i = 0; i < kFeatureSize; ++i)
        out[static_cast<size_t>(i)] =
            static_cast<float>((h.counts[static_cast<size_t>(i)] - mean) / sd);
    return out;
}

std::vector<float> extract_features(const jpeg::CoefficientImage& img) {
    return standardize(ac_histograms(img));
}

std::vector<float> extract_features(std::span<const uint8_t> jpeg_bytes) {
    return extract_features(jpeg::parse_coefficients(jpeg_bytes));
}

void save_cache(const std::string& path, const std::vector<Sample>& samples) {
    std::vector<uint8_t> out;
    out.push_back('D');
    out.push_back('C');
    out.push_back('T');
    out.push_back('F');
    put_u32(out, kCacheVersion);
    put_u32(out, static_cast<uint32_t>(samples.size()));
    for (const auto& s : samples) {
        if (s.features.size() != kFeatureSize)
            throw ShapeMismatch("save_cache: sample feature size must be " +
                                std::to_string(kFeatureSize));
        out.push_back(s.label);
        for (float f : s.features) put_f32(out, f);
        put_u32(out, static_cast<uint32_t>(s.path.size()));
        out.insert(out.end(), s.path.begin(), s.path.end());
    }
    jpeg::write_file(path, {out.data(), out.size()});
}

std::vector<Sample> load_cache(const std::string& path) {
    auto bytes = jpeg::read_file(path);
    Cursor c{bytes};
    if (bytes.size() < 4 || bytes[0] != 'D' || bytes[1] != 'C' || bytes[2] != 'T' ||
        bytes[3] != 'F')
        throw LoadError("feature cache has wrong magic: " + path);
    c.pos = 4;
    if (c.u32() != kCacheVersion)
        throw LoadError("feature cache has unsupported version: " + path);
    uint32_t count = c.u32();
    std::vector<Sample> samples;
    samples.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        Sample s;
        s.label = c.u8();
        if (s.label > 1) throw LoadError("feature cache has invalid label: " + path);
        s.features.resize(kFeatureSize);
        for (auto& f : s.features) f = c.f32();
        uint32_t len = c.u32();
        if (c.pos + len > bytes.size()) throw LoadError("feature cache truncated");
        s.path.assign(bytes.begin() + static_cast<long>(c.pos),
                      bytes.begin() + static_cast<long>(c.pos + len));
        c.pos += len;
        samples.push_back(std::move(s));
    }
    if (c.pos != bytes.size())
        throw LoadError("feature cache has trailing bytes: " + path);
    return samples;
}

} // namespace splice::feat
