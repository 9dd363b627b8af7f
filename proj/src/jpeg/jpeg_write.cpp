#include "splice/jpeg.hpp"
#include "jpeg_internal.hpp"

#include "splice/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace splice::jpeg {
namespace {

using detail::bit_category;
using detail::HuffSpec;

struct HuffEncTable {
    uint16_t code[256] = {};
    uint8_t size[256] = {};
};

// Canonical code assignment per T.81 Annex C.
HuffEncTable build_enc_table(const HuffSpec& spec) {
    HuffEncTable t;
    uint16_t code = 0;
    int k = 0;
    for (int len = 1; len <= 16; ++len) {
        for (int i = 0; i < spec.bits[len]; ++i) {
            uint8_t sym = spec.values[k++];
            t.code[sym] = code++;
            t.size[sym] = static_cast<uint8_t>(len);
        }
        code = static_cast<uint16_t>(code << 1);
    }
    return t;
}

class BitWriter {
public:
    explicit BitWriter(std::vector<uint8_t>& out) : out_(out) {}

    void put(uint32_t value, int nbits) {
        acc_ = (acc_ << nbits) | (value & ((1u << nbits) - 1));
        count_ += nbits;
        while (count_ >= 8) {
            uint8_t byte = static_cast<uint8_t>((acc_ >> (count_ - 8)) & 0xff);
            out_.push_back(byte);
            if (byte == 0xff) out_.push_back(0x00); // byte stuffing
            count_ -= 8;
        }
    }

    void flush() {
        if (count_ > 0) put(0xff, 8 - count_); // pad with 1 bits
    }

private:
    std::vector<uint8_t>& out_;
    uint32_t acc_ = 0;
    int count_ = 0;
};

uint8_t clamp_u8(double v) {
    long r = std::lround(v);
    return static_cast<uint8_t>(std::clamp(r, 0l, 255l));
}

// Magnitude bits for a value of the given category (T.81 F.1.2.1).
uint32_t magnitude_bits(int v, int category) {
    return static_cast<uint32_t>(v >= 0 ? v : v + (1 << category) - 1);
}

void encode_block(const int16_t* blk, int& pred, const HuffEncTable& dc,
                  const HuffEncTable& ac, BitWriter& bw) {
    int diff = blk[0] - pred;
    pred = blk[0];
    int s = bit_category(diff);
    bw.put(dc.code[s], dc.size[s]);
    if (s) bw.put(magnitude_bits(diff, s), s);

    const auto& zig = detail::kZigzagToNatural;
    int run = 0;
    for (int z = 1; z < 64; ++z) {
        int v = blk[zig[static_cast<size_t>(z)]];
        if (v == 0) {
            ++run;
            continue;
        }
        while (run > 15) {
            bw.put(ac.code[0xf0], ac.size[0xf0]); // ZRL
            run -= 16;
        }
        s = bit_category(v);
        int sym = (run << 4) | s;
        bw.put(ac.code[sym], ac.size[sym]);
        bw.put(magnitude_bits(v, s), s);
        run = 0;
    }
    if (run) bw.put(ac.code[0x00], ac.size[0x00]); // EOB
}

void put16(std::vector<uint8_t>& out, int v) {
    out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<uint8_t>(v & 0xff));
}

void put_marker(std::vector<uint8_t>& out, uint8_t m) {
    out.push_back(0xff);
    out.push_back(m);
}

void put_dqt(std::vector<uint8_t>& out, const QuantTable& qt) {
    put_marker(out, 0xdb);
    put16(out, 2 + 1 + 64);
    out.push_back(qt.table_id); // Pq = 0 (8-bit), Tq
    const auto& zig = detail::kZigzagToNatural;
    for (int z = 0; z < 64; ++z)
        out.push_back(static_cast<uint8_t>(qt.entries[zig[static_cast<size_t>(z)]]));
}

void put_dht(std::vector<uint8_t>& out, int table_class, int table_id, const HuffSpec& spec) {
    put_marker(out, 0xc4);
    put16(out, 2 + 1 + 16 + spec.value_count);
    out.push_back(static_cast<uint8_t>((table_class << 4) | table_id));
    for (int len = 1; len <= 16; ++len) out.push_back(spec.bits[len]);
    for (int i = 0; i < spec.value_count; ++i) out.push_back(spec.values[i]);
}

} // namespace

std::vector<uint8_t> encode(const PixelImage& img, int qf, Subsampling subsampling,
                            CoefficientImage* coeffs_out) {
    if (img.width <= 0 || img.height <= 0 || img.data.empty())
        throw EmptyImage("encode: empty image");
    if (img.channels != 1 && img.channels != 3)
        throw ShapeMismatch("encode: expected 1 or 3 channels, got " +
                            std::to_string(img.channels));
    if (img.data.size() !=
        static_cast<size_t>(img.width) * img.height * img.channels)
        throw ShapeMismatch("encode: pixel buffer size does not match dimensions");
    if (img.width > 65535 || img.height > 65535)
        throw RangeError("encode: dimensions exceed 65535");

    auto [lq, cq] = quality_to_tables(qf);
    const bool gray = img.channels == 1;
    const int hs = (!gray && subsampling == Subsampling::s420) ? 2 : 1;
    const int vs = hs;

    CoefficientImage ci;
    ci.width = img.width;
    ci.height = img.height;
    ci.quant_tables[0] = lq;
    ci.components.push_back({1, hs, vs, 0});
    if (!gray) {
        ci.quant_tables[1] = cq;
        ci.components.push_back({2, 1, 1, 1});
        ci.components.push_back({3, 1, 1, 1});
    }

    const int mcu_w = 8 * hs;
    const int mcu_h = 8 * vs;
    const int mcus_x = (img.width + mcu_w - 1) / mcu_w;
    const int mcus_y = (img.height + mcu_h - 1) / mcu_h;
    const int pw = mcus_x * mcu_w;
    const int ph = mcus_y * mcu_h;

    // Full-resolution planes, padded by edge replication to the MCU grid.
    std::vector<std::vector<uint8_t>> planes(gray ? 1 : 3);
    for (auto& p : planes) p.resize(static_cast<size_t>(pw) * ph);
    for (int py = 0; py < ph; ++py) {
        int sy = std::min(py, img.height - 1);
        for (int px = 0; px < pw; ++px) {
            int sx = std::min(px, img.width - 1);
            size_t o = static_cast<size_t>(py) * pw + px;
            if (gray) {
                planes[0][o] = img.at(sx, sy, 0);
            } else {
                double r = img.at(sx, sy, 0);
                double g = img.at(sx, sy, 1);
                double b = img.at(sx, sy, 2);
                planes[0][o] = clamp_u8(0.299 * r + 0.587 * g + 0.114 * b);
                planes[1][o] = clamp_u8(128.0 - 0.168735892 * r - 0.331264108 * g + 0.5 * b);
                planes[2][o] = clamp_u8(128.0 + 0.5 * r - 0.418687589 * g - 0.081312411 * b);
            }
        }
    }

    // 2x2 box average for 4:2:0 chroma.
    if (!gray && hs == 2) {
        int cw = pw / 2, ch = ph / 2;
        for (int c = 1; c < 3; ++c) {
            std::vector<uint8_t> sub(static_cast<size_t>(cw) * ch);
            for (int y = 0; y < ch; ++y)
                for (int x = 0; x < cw; ++x) {
                    const uint8_t* row0 = planes[static_cast<size_t>(c)].data() +
                                          static_cast<size_t>(2 * y) * pw + 2 * x;
                    const uint8_t* row1 = row0 + pw;
                    int v = row0[0] + row0[1] + row1[0] + row1[1];
                    sub[static_cast<size_t>(y) * cw + x] = static_cast<uint8_t>((v + 2) >> 2);
                }
            planes[static_cast<size_t>(c)] = std::move(sub);
        }
    }

    // FDCT + quantization into the coded block grids.
    for (size_t c = 0; c < ci.components.size(); ++c) {
        const auto& spec = ci.components[c];
        const QuantTable& qt = *ci.quant_tables[spec.quant_table_id];
        int plane_w = (c == 0) ? pw : pw / (hs == 2 ? 2 : 1);
        int plane_h = (c == 0) ? ph : ph / (vs == 2 ? 2 : 1);
        ComponentCoefficients cc;
        cc.blocks_w = plane_w / 8;
        cc.blocks_h = plane_h / 8;
        cc.coeffs.assign(cc.block_count() * 64, 0);
        const auto& plane = planes[c];
        double block[64], freq[64];
        for (int by = 0; by < cc.blocks_h; ++by)
            for (int bx = 0; bx < cc.blocks_w; ++bx) {
                for (int y = 0; y < 8; ++y)
                    for (int x = 0; x < 8; ++x)
                        block[y * 8 + x] =
                            plane[static_cast<size_t>(by * 8 + y) * plane_w + bx * 8 + x] - 128.0;
                detail::fdct_8x8(block, freq);
                int16_t* out = cc.block(bx, by);
                for (int i = 0; i < 64; ++i)
                    out[i] = static_cast<int16_t>(std::llround(freq[i] / qt.entries[static_cast<size_t>(i)]));
            }
        ci.planes.push_back(std::move(cc));
    }

    // Entropy-coded scan.
    HuffEncTable dc_l = build_enc_table(detail::std_dc_luma());
    HuffEncTable ac_l = build_enc_table(detail::std_ac_luma());
    HuffEncTable dc_c = build_enc_table(detail::std_dc_chroma());
    HuffEncTable ac_c = build_enc_table(detail::std_ac_chroma());

    std::vector<uint8_t> scan;
    {
        BitWriter bw(scan);
        int pred[3] = {0, 0, 0};
        for (int my = 0; my < mcus_y; ++my)
            for (int mx = 0; mx < mcus_x; ++mx)
                for (size_t c = 0; c < ci.components.size(); ++c) {
                    const auto& spec = ci.components[c];
                    const auto& dc = (c == 0) ? dc_l : dc_c;
                    const auto& ac = (c == 0) ? ac_l : ac_c;
                    for (int v = 0; v < spec.v_sampling; ++v)
                        for (int h = 0; h < spec.h_sampling; ++h)
                            encode_block(ci.planes[c].block(mx * spec.h_sampling + h,
                                                            my * spec.v_sampling + v),
                                         pred[c], dc, ac, bw);
                }
        bw.flush();
    }

    std::vector<uint8_t> out;
    out.reserve(scan.size() + 1024);
    put_marker(out, 0xd8); // SOI

    put_marker(out, 0xe0); // APP0 / JFIF
    put16(out, 16);
    const uint8_t jfif[] = {'J', 'F', 'I', 'F', 0, 1, 1, 0, 0, 1, 0, 1, 0, 0};
    out.insert(out.end(), jfif, jfif + sizeof(jfif));

    put_dqt(out, lq);
    if (!gray) put_dqt(out, cq);

    put_marker(out, 0xc0); // SOF0
    put16(out, 8 + 3 * static_cast<int>(ci.components.size()));
    out.push_back(8); // sample precision
    put16(out, img.height);
    put16(out, img.width);
    out.push_back(static_cast<uint8_t>(ci.components.size()));
    for (const auto& spec : ci.components) {
        out.push_back(spec.component_id);
        out.push_back(static_cast<uint8_t>((spec.h_sampling << 4) | spec.v_sampling));
        out.push_back(spec.quant_table_id);
    }

    put_dht(out, 0, 0, detail::std_dc_luma());
    put_dht(out, 1, 0, detail::std_ac_luma());
    if (!gray) {
        put_dht(out, 0, 1, detail::std_dc_chroma());
        put_dht(out, 1, 1, detail::std_ac_chroma());
    }

    put_marker(out, 0xda); // SOS
    put16(out, 6 + 2 * static_cast<int>(ci.components.size()));
    out.push_back(static_cast<uint8_t>(ci.components.size()));
    for (size_t c = 0; c < ci.components.size(); ++c) {
        out.push_back(ci.components[c].component_id);
        out.push_back(c == 0 ? 0x00 : 0x11);
    }
    out.push_back(0);  // spectral start
    out.push_back(63); // spectral end
    out.push_back(0);  // successive approximation

    out.insert(out.end(), scan.begin(), scan.end());
    put_marker(out, 0xd9); // EOI

    if (coeffs_out) *coeffs_out = std::move(ci);
    return out;
}

std::vector<uint8_t> recompress(std::span<const uint8_t> bytes, int qf2) {
    CoefficientImage ci = parse_coefficients(bytes);
    PixelImage px = decode_pixels(ci);
    Subsampling ss = Subsampling::s444;
    if (px.channels == 3 && ci.components[0].h_sampling == 2 &&
        ci.components[0].v_sampling == 2)
        ss = Subsampling::s420;
    return encode(px, qf2, ss);
}

} // namespace splice::jpeg
