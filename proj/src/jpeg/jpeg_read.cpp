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

// Canonical Huffman decoder state per T.81 F.2.2.3.
struct HuffDecTable {
    int32_t mincode[17] = {};
    int32_t maxcode[17] = {};
    int valptr[17] = {};
    std::vector<uint8_t> values;
    bool present = false;

    void build(const uint8_t* bits, const uint8_t* vals, int value_count) {
        values.assign(vals, vals + value_count);
        int32_t code = 0;
        int k = 0;
        for (int len = 1; len <= 16; ++len) {
            valptr[len] = k;
            mincode[len] = code;
            code += bits[len];
            k += bits[len];
            maxcode[len] = bits[len] ? code - 1 : -1;
            code <<= 1;
        }
        present = true;
    }
};

class BitReader {
public:
    BitReader(std::span<const uint8_t> data, size_t start) : data_(data), pos_(start) {}

    int next_bit() {
        if (count_ == 0) {
            if (pos_ >= data_.size())
                throw CorruptStream("entropy-coded data truncated");
            uint8_t b = data_[pos_];
            if (b == 0xff) {
                if (pos_ + 1 >= data_.size() || data_[pos_ + 1] != 0x00)
                    throw CorruptStream("marker interrupts entropy-coded data");
                pos_ += 2; // stuffed 0xFF
            } else {
                ++pos_;
            }
            acc_ = b;
            count_ = 8;
        }
        --count_;
        return (acc_ >> count_) & 1;
    }

    int receive(int nbits) {
        int v = 0;
        for (int i = 0; i < nbits; ++i) v = (v << 1) | next_bit();
        return v;
    }

    int decode(const HuffDecTable& t) {
        int32_t code = next_bit();
        int len = 1;
        while (code > t.maxcode[len]) {
            if (++len > 16) throw CorruptStream("invalid Huffman code");
            code = (code << 1) | next_bit();
        }
        size_t idx = static_cast<size_t>(t.valptr[len] + code - t.mincode[len]);
        if (idx >= t.values.size()) throw CorruptStream("Huffman code out of table range");
        return t.values[idx];
    }

    void expect_restart(int index) {
        count_ = 0; // discard padding bits
        while (pos_ + 1 < data_.size() && data_[pos_] == 0xff && data_[pos_ + 1] == 0xff)
            ++pos_; // fill bytes
        if (pos_ + 1 >= data_.size() || data_[pos_] != 0xff)
            throw CorruptStream("missing restart marker");
        uint8_t m = data_[pos_ + 1];
        if (m != static_cast<uint8_t>(0xd0 + index))
            throw CorruptStream("restart marker out of sequence");
        pos_ += 2;
    }

    size_t position() const { return pos_; }

private:
    std::span<const uint8_t> data_;
    size_t pos_;
    uint32_t acc_ = 0;
    int count_ = 0;
};

int extend(int v, int category) {
    return v < (1 << (category - 1)) ? v - (1 << category) + 1 : v;
}

int16_t clamp_coeff(long v) {
    return static_cast<int16_t>(std::clamp(v, -32768l, 32767l));
}

struct Parser {
    std::span<const uint8_t> bytes;
    size_t pos = 0;

    CoefficientImage img;
    HuffDecTable dc_tables[4];
    HuffDecTable ac_tables[4];
    bool have_sof = false;
    bool have_eoi = false;
    int hmax = 1, vmax = 1;
    int mcus_x = 0, mcus_y = 0;
    std::vector<bool> coded;

    uint8_t u8() {
        if (pos >= bytes.size()) throw CorruptStream("unexpected end of stream");
        return bytes[pos++];
    }

    int u16() {
        int hi = u8();
        return (hi << 8) | u8();
    }

    int segment_length() {
        int len = u16();
        if (len < 2 || pos + static_cast<size_t>(len - 2) > bytes.size())
            throw CorruptStream("marker segment overruns stream");
        return len - 2; // payload bytes
    }

    void run() {
        if (bytes.size() < 2 || bytes[0] != 0xff || bytes[1] != 0xd8)
            throw CorruptStream("missing SOI marker");
        pos = 2;
        while (!have_eoi) {
            uint8_t m = next_marker();
            handle_marker(m);
        }
        if (!have_sof) throw CorruptStream("no frame header");
        for (size_t c = 0; c < img.components.size(); ++c)
            if (!coded[c]) throw CorruptStream("component missing from all scans");
        for (const auto& spec : img.components)
            if (!img.quant_tables[spec.quant_table_id])
                throw CorruptStream("missing quantization table");
    }

    uint8_t next_marker() {
        if (pos >= bytes.size()) throw CorruptStream("unexpected end of stream");
        if (bytes[pos] != 0xff) throw CorruptStream("expected marker, found data");
        while (pos < bytes.size() && bytes[pos] == 0xff) ++pos; // fill bytes
        if (pos >= bytes.size()) throw CorruptStream("unexpected end of stream");
        return bytes[pos++];
    }

    void handle_marker(uint8_t m) {
        switch (m) {
            case 0xc0: parse_sof(); break;                     // SOF0 baseline
            case 0xc4: parse_dht(); break;
            case 0xdb: parse_dqt(); break;
            case 0xdd: parse_dri(); break;
            case 0xda: parse_sos_and_scan(); break;
            case 0xd9: have_eoi = true; break;
            case 0xc2:
                throw UnsupportedFormat("progressive JPEG is not supported");
            case 0xc1: case 0xc3: case 0xc5: case 0xc6: case 0xc7:
            case 0xc9: case 0xca: case 0xcb: case 0xcd: case 0xce: case 0xcf:
                throw UnsupportedFormat("only baseline (SOF0) frames are supported");
            case 0xcc:
                throw UnsupportedFormat("arithmetic coding is not supported");
            case 0xde: case 0xdf:
                throw UnsupportedFormat("hierarchical JPEG is not supported");
            case 0xd8:
                throw CorruptStream("duplicate SOI marker");
            case 0xdc: // DNL
            case 0xfe: // COM
                skip_segment();
                break;
            default:
                if (m >= 0xe0 && m <= 0xef) { // APPn
                    skip_segment();
                } else if (m >= 0xd0 && m <= 0xd7) {
                    throw CorruptStream("restart marker outside entropy-coded data");
                } else {
                    throw CorruptStream("unexpected marker 0x" + hex2(m));
                }
        }
    }

    static std::string hex2(uint8_t v) {
        static const char* digits = "0123456789abcdef";
        return {digits[v >> 4], digits[v & 15]};
    }

    void skip_segment() { pos += static_cast<size_t>(segment_length()); }

    void parse_sof() {
        if (have_sof) throw CorruptStream("duplicate frame header");
        int len = segment_length();
        size_t seg_end = pos + static_cast<size_t>(len);
        int precision = u8();
        if (precision != 8)
            throw UnsupportedFormat("only 8-bit sample precision is supported");
        img.height = u16();
        img.width = u16();
        if (img.width == 0) throw CorruptStream("zero image width");
        if (img.height == 0)
            throw UnsupportedFormat("DNL-deferred image height is not supported");
        int nc = u8();
        if (nc == 0) throw CorruptStream("frame has no components");
        if (nc > 4) throw UnsupportedFormat("more than 4 components");
        if (len != 6 + 3 * nc) throw CorruptStream("bad frame header length");

        int sampling_sum = 0;
        for (int i = 0; i < nc; ++i) {
            ComponentSpec spec;
            spec.component_id = u8();
            int hv = u8();
            spec.h_sampling = hv >> 4;
            spec.v_sampling = hv & 15;
            spec.quant_table_id = u8();
            if (spec.h_sampling < 1 || spec.h_sampling > 4 || spec.v_sampling < 1 ||
                spec.v_sampling > 4)
                throw CorruptStream("sampling factor out of range");
            if (spec.quant_table_id > 3)
                throw CorruptStream("quantization table id out of range");
            for (const auto& prev : img.components)
                if (prev.component_id == spec.component_id)
                    throw CorruptStream("duplicate component id");
            sampling_sum += spec.h_sampling * spec.v_sampling;
            img.components.push_back(spec);
        }
        if (nc > 1 && sampling_sum > 10)
            throw CorruptStream("MCU exceeds 10 blocks");
        pos = seg_end;

        hmax = vmax = 1;
        for (const auto& spec : img.components) {
            hmax = std::max(hmax, spec.h_sampling);
            vmax = std::max(vmax, spec.v_sampling);
        }
        mcus_x = (img.width + 8 * hmax - 1) / (8 * hmax);
        mcus_y = (img.height + 8 * vmax - 1) / (8 * vmax);

        size_t total_blocks = 0;
        for (const auto& spec : img.components) {
            ComponentCoefficients cc;
            if (nc == 1) {
                cc.blocks_w = (img.width + 7) / 8;
                cc.blocks_h = (img.height + 7) / 8;
            } else {
                cc.blocks_w = mcus_x * spec.h_sampling;
                cc.blocks_h = mcus_y * spec.v_sampling;
            }
            total_blocks += cc.block_count();
            if (total_blocks > (1u << 22)) // 512 MiB of int16 coefficients
                throw CorruptStream("coefficient data too large");
            cc.coeffs.assign(cc.block_count() * 64, 0);
            img.planes.push_back(std::move(cc));
        }
        coded.assign(img.components.size(), false);
        have_sof = true;
    }

    void parse_dqt() {
        int remaining = segment_length();
        while (remaining > 0) {
            int pq_tq = u8();
            int pq = pq_tq >> 4;
            int tq = pq_tq & 15;
            if (tq > 3) throw CorruptStream("quantization table id out of range");
            if (pq == 1)
                throw UnsupportedFormat("16-bit quantization tables are not supported");
            if (pq > 1) throw CorruptStream("bad quantization table precision");
            if (remaining < 65) throw CorruptStream("truncated quantization table");
            QuantTable qt;
            qt.table_id = static_cast<uint8_t>(tq);
            for (int z = 0; z < 64; ++z) {
                uint8_t v = u8();
                if (v == 0) throw CorruptStream("zero quantizer value");
                qt.entries[detail::kZigzagToNatural[static_cast<size_t>(z)]] = v;
            }
            img.quant_tables[static_cast<size_t>(tq)] = qt;
            remaining -= 65;
        }
        if (remaining != 0) throw CorruptStream("bad quantization segment length");
    }

    void parse_dht() {
        int remaining = segment_length();
        while (remaining > 0) {
            if (remaining < 17) throw CorruptStream("truncated Huffman table");
            int tc_th = u8();
            int tc = tc_th >> 4;
            int th = tc_th & 15;
            if (tc > 1) throw CorruptStream("bad Huffman table class");
            if (th > 3) throw CorruptStream("Huffman table id out of range");
            uint8_t bits[17] = {};
            int total = 0;
            for (int len = 1; len <= 16; ++len) {
                bits[len] = u8();
                total += bits[len];
            }
            if (total > 256) throw CorruptStream("Huffman table has too many codes");
            if (remaining < 17 + total) throw CorruptStream("truncated Huffman table");
            std::vector<uint8_t> vals(static_cast<size_t>(total));
            for (auto& v : vals) v = u8();
            (tc == 0 ? dc_tables : ac_tables)[th].build(bits, vals.data(), total);
            remaining -= 17 + total;
        }
        if (remaining != 0) throw CorruptStream("bad Huffman segment length");
    }

    void parse_dri() {
        if (segment_length() != 2) throw CorruptStream("bad restart interval segment");
        img.restart_interval = u16();
    }

    void decode_block(BitReader& br, int16_t* blk, int& pred,
                      const HuffDecTable& dc, const HuffDecTable& ac) {
        int t = br.decode(dc);
        if (t > 11) throw CorruptStream("DC category out of range");
        int diff = t ? extend(br.receive(t), t) : 0;
        pred += diff;
        blk[0] = clamp_coeff(pred);

        int z = 1;
        while (z < 64) {
            int rs = br.decode(ac);
            int run = rs >> 4;
            int size = rs & 15;
            if (size == 0) {
                if (run == 0) break;       // EOB
                if (run != 15) throw CorruptStream("bad AC run/size symbol");
                z += 16;                   // ZRL
                continue;
            }
            if (size > 10) throw CorruptStream("AC category out of range");
            z += run;
            if (z > 63) throw CorruptStream("AC coefficient index overflow");
            blk[detail::kZigzagToNatural[static_cast<size_t>(z)]] =
                static_cast<int16_t>(extend(br.receive(size), size));
            ++z;
        }
    }

    void parse_sos_and_scan() {
        if (!have_sof) throw CorruptStream("scan before frame header");
        int len = segment_length();
        int ns = u8();
        if (ns < 1 || ns > 4) throw CorruptStream("bad scan component count");
        if (len != 4 + 2 * ns) throw CorruptStream("bad scan header length");

        struct ScanComp {
            size_t comp_index;
            const HuffDecTable* dc;
            const HuffDecTable* ac;
        };
        std::vector<ScanComp> scomps;
        for (int i = 0; i < ns; ++i) {
            uint8_t cs = u8();
            int td_ta = u8();
            int td = td_ta >> 4;
            int ta = td_ta & 15;
            if (td > 3 || ta > 3) throw CorruptStream("Huffman table id out of range");
            size_t idx = img.components.size();
            for (size_t c = 0; c < img.components.size(); ++c)
                if (img.components[c].component_id == cs) idx = c;
            if (idx == img.components.size())
                throw CorruptStream("scan references unknown component");
            for (const auto& sc : scomps)
                if (sc.comp_index == idx)
                    throw CorruptStream("component repeated within scan");
            if (coded[idx]) throw CorruptStream("component coded in two scans");
            if (!dc_tables[td].present || !ac_tables[ta].present)
                throw CorruptStream("scan references missing Huffman table");
            scomps.push_back({idx, &dc_tables[td], &ac_tables[ta]});
        }
        int ss = u8(), se = u8(), a = u8();
        if (ss != 0 || se != 63 || a != 0)
            throw CorruptStream("bad spectral selection for baseline scan");

        BitReader br(bytes, pos);
        int pred[4] = {0, 0, 0, 0};
        const int ri = img.restart_interval;
        int mcus_to_restart = ri;
        int restart_index = 0;

        long total_mcus;
        int scan_mcus_x;
        if (ns == 1) {
            const auto& spec = img.components[scomps[0].comp_index];
            int cw = (img.width * spec.h_sampling + 8 * hmax - 1) / (8 * hmax);
            int ch = (img.height * spec.v_sampling + 8 * vmax - 1) / (8 * vmax);
            scan_mcus_x = cw;
            total_mcus = static_cast<long>(cw) * ch;
        } else {
            scan_mcus_x = mcus_x;
            total_mcus = static_cast<long>(mcus_x) * mcus_y;
        }

        for (long mcu = 0; mcu < total_mcus; ++mcu) {
            if (ri && mcus_to_restart == 0) {
                br.expect_restart(restart_index);
                restart_index = (restart_index + 1) & 7;
                mcus_to_restart = ri;
                for (auto& p : pred) p = 0;
            }
            int mx = static_cast<int>(mcu % scan_mcus_x);
            int my = static_cast<int>(mcu / scan_mcus_x);
            if (ns == 1) {
                auto& sc = scomps[0];
                decode_block(br, img.planes[sc.comp_index].block(mx, my),
                             pred[0], *sc.dc, *sc.ac);
            } else {
                for (size_t i = 0; i < scomps.size(); ++i) {
                    auto& sc = scomps[i];
                    const auto& spec = img.components[sc.comp_index];
                    for (int v = 0; v < spec.v_sampling; ++v)
                        for (int h = 0; h < spec.h_sampling; ++h)
                            decode_block(br,
                                         img.planes[sc.comp_index].block(
                                             mx * spec.h_sampling + h,
                                             my * spec.v_sampling + v),
                                         pred[i], *sc.dc, *sc.ac);
                }
            }
            if (ri) --mcus_to_restart;
        }

        for (const auto& sc : scomps) coded[sc.comp_index] = true;
        pos = br.position();
    }
};

// The pixel path below (IDCT, upsampling, color conversion) reproduces the
// classic IJG integer arithmetic bit for bit, so decoded samples agree with
// libjpeg-based decoders exactly rather than within rounding slack.

constexpr int kConstBits = 13;
constexpr int kPass1Bits = 2;

constexpr long F_0_298631336 = 2446;
constexpr long F_0_390180644 = 3196;
constexpr long F_0_541196100 = 4433;
constexpr long F_0_765366865 = 6270;
constexpr long F_0_899976223 = 7373;
constexpr long F_1_175875602 = 9633;
constexpr long F_1_501321110 = 12299;
constexpr long F_1_847759065 = 15137;
constexpr long F_1_961570560 = 16069;
constexpr long F_2_053119869 = 16819;
constexpr long F_2_562915447 = 20995;
constexpr long F_3_072711026 = 25172;

inline long descale(long x, int n) { return (x + (1l << (n - 1))) >> n; }

inline uint8_t sample_clamp(long v) {
    return static_cast<uint8_t>(std::clamp(v + 128, 0l, 255l));
}

// Dequantize + inverse DCT of one block into an 8-bit plane (stride in
// samples), using the 13-bit fixed-point Loeffler factorization.
void idct_islow_block(const int16_t* blk, const std::array<uint16_t, 64>& qt,
                      uint8_t* out, int stride) {
    long ws[64];

    for (int c = 0; c < 8; ++c) {
        if ((blk[8 + c] | blk[16 + c] | blk[24 + c] | blk[32 + c] |
             blk[40 + c] | blk[48 + c] | blk[56 + c]) == 0) {
            long dc = (static_cast<long>(blk[c]) * qt[static_cast<size_t>(c)]) << kPass1Bits;
            for (int r = 0; r < 8; ++r) ws[8 * r + c] = dc;
            continue;
        }
        auto deq = [&](int i) {
            return static_cast<long>(blk[i]) * qt[static_cast<size_t>(i)];
        };
        long z2 = deq(16 + c), z3 = deq(48 + c);
        long z1 = (z2 + z3) * F_0_541196100;
        long tmp2 = z1 - z3 * F_1_847759065;
        long tmp3 = z1 + z2 * F_0_765366865;
        z2 = deq(c);
        z3 = deq(32 + c);
        long tmp0 = (z2 + z3) << kConstBits;
        long tmp1 = (z2 - z3) << kConstBits;
        long tmp10 = tmp0 + tmp3, tmp13 = tmp0 - tmp3;
        long tmp11 = tmp1 + tmp2, tmp12 = tmp1 - tmp2;
        tmp0 = deq(56 + c);
        tmp1 = deq(40 + c);
        tmp2 = deq(24 + c);
        tmp3 = deq(8 + c);
        z1 = tmp0 + tmp3;
        z2 = tmp1 + tmp2;
        z3 = tmp0 + tmp2;
        long z4 = tmp1 + tmp3;
        long z5 = (z3 + z4) * F_1_175875602;
        tmp0 *= F_0_298631336;
        tmp1 *= F_2_053119869;
        tmp2 *= F_3_072711026;
        tmp3 *= F_1_501321110;
        z1 *= -F_0_899976223;
        z2 *= -F_2_562915447;
        z3 = z5 - z3 * F_1_961570560;
        z4 = z5 - z4 * F_0_390180644;
        tmp0 += z1 + z3;
        tmp1 += z2 + z4;
        tmp2 += z2 + z3;
        tmp3 += z1 + z4;
        ws[c] = descale(tmp10 + tmp3, kConstBits - kPass1Bits);
        ws[56 + c] = descale(tmp10 - tmp3, kConstBits - kPass1Bits);
        ws[8 + c] = descale(tmp11 + tmp2, kConstBits - kPass1Bits);
        ws[48 + c] = descale(tmp11 - tmp2, kConstBits - kPass1Bits);
        ws[16 + c] = descale(tmp12 + tmp1, kConstBits - kPass1Bits);
        ws[40 + c] = descale(tmp12 - tmp1, kConstBits - kPass1Bits);
        ws[24 + c] = descale(tmp13 + tmp0, kConstBits - kPass1Bits);
        ws[32 + c] = descale(tmp13 - tmp0, kConstBits - kPass1Bits);
    }

    const int shift = kConstBits + kPass1Bits + 3;
    for (int r = 0; r < 8; ++r) {
        const long* in = ws + 8 * r;
        uint8_t* o = out + static_cast<size_t>(r) * stride;
        long z2 = in[2], z3 = in[6];
        long z1 = (z2 + z3) * F_0_541196100;
        long tmp2 = z1 - z3 * F_1_847759065;
        long tmp3 = z1 + z2 * F_0_765366865;
        long tmp0 = (in[0] + in[4]) << kConstBits;
        long tmp1 = (in[0] - in[4]) << kConstBits;
        long tmp10 = tmp0 + tmp3, tmp13 = tmp0 - tmp3;
        long tmp11 = tmp1 + tmp2, tmp12 = tmp1 - tmp2;
        tmp0 = in[7];
        tmp1 = in[5];
        tmp2 = in[3];
        tmp3 = in[1];
        z1 = tmp0 + tmp3;
        z2 = tmp1 + tmp2;
        z3 = tmp0 + tmp2;
        long z4 = tmp1 + tmp3;
        long z5 = (z3 + z4) * F_1_175875602;
        tmp0 *= F_0_298631336;
        tmp1 *= F_2_053119869;
        tmp2 *= F_3_072711026;
        tmp3 *= F_1_501321110;
        z1 *= -F_0_899976223;
        z2 *= -F_2_562915447;
        z3 = z5 - z3 * F_1_961570560;
        z4 = z5 - z4 * F_0_390180644;
        tmp0 += z1 + z3;
        tmp1 += z2 + z4;
        tmp2 += z2 + z3;
        tmp3 += z1 + z4;
        o[0] = sample_clamp(descale(tmp10 + tmp3, shift));
        o[7] = sample_clamp(descale(tmp10 - tmp3, shift));
        o[1] = sample_clamp(descale(tmp11 + tmp2, shift));
        o[6] = sample_clamp(descale(tmp11 - tmp2, shift));
        o[2] = sample_clamp(descale(tmp12 + tmp1, shift));
        o[5] = sample_clamp(descale(tmp12 - tmp1, shift));
        o[3] = sample_clamp(descale(tmp13 + tmp0, shift));
        o[4] = sample_clamp(descale(tmp13 - tmp0, shift));
    }
}

// BT.601 YCbCr -> RGB with 16-bit fixed-point tables.
struct YccTables {
    int cr_r[256];
    int cb_b[256];
    long cr_g[256];
    long cb_g[256];
    YccTables() {
        for (int i = 0; i < 256; ++i) {
            long x = i - 128;
            cr_r[i] = static_cast<int>((91881 * x + 32768) >> 16);  // 1.40200
            cb_b[i] = static_cast<int>((116130 * x + 32768) >> 16); // 1.77200
            cr_g[i] = -46802 * x;                                   // 0.71414
            cb_g[i] = -22554 * x + 32768;                           // 0.34414
        }
    }
};

// libjpeg-compatible "fancy" (triangle filter) upsampling.

// Horizontal 2x: 3/4 nearer + 1/4 further, edges replicated.
void upsample_row_h2(const int* in, int cw, int* out) {
    if (cw == 1) {
        out[0] = out[1] = in[0];
        return;
    }
    out[0] = in[0];
    out[1] = (in[0] * 3 + in[1] + 2) >> 2;
    for (int x = 1; x < cw - 1; ++x) {
        out[2 * x] = (in[x] * 3 + in[x - 1] + 1) >> 2;
        out[2 * x + 1] = (in[x] * 3 + in[x + 1] + 2) >> 2;
    }
    out[2 * (cw - 1)] = (in[cw - 1] * 3 + in[cw - 2] + 1) >> 2;
    out[2 * cw - 1] = in[cw - 1];
}

// Full 2x2 upsample of the cropped chroma plane (cw x ch -> 2cw x 2ch).
std::vector<uint8_t> upsample_h2v2(const std::vector<uint8_t>& plane, int stride,
                                   int cw, int ch) {
    std::vector<uint8_t> out(static_cast<size_t>(2 * cw) * (2 * ch));
    std::vector<int> colsum(static_cast<size_t>(cw));
    for (int y = 0; y < ch; ++y) {
        const uint8_t* cur = plane.data() + static_cast<size_t>(y) * stride;
        for (int v = 0; v < 2; ++v) {
            int other_y = v == 0 ? std::max(y - 1, 0) : std::min(y + 1, ch - 1);
            const uint8_t* other = plane.data() + static_cast<size_t>(other_y) * stride;
            for (int x = 0; x < cw; ++x) colsum[static_cast<size_t>(x)] = cur[x] * 3 + other[x];
            uint8_t* orow = out.data() + static_cast<size_t>(2 * y + v) * (2 * cw);
            if (cw == 1) {
                orow[0] = static_cast<uint8_t>((colsum[0] * 4 + 8) >> 4);
                orow[1] = static_cast<uint8_t>((colsum[0] * 4 + 7) >> 4);
                continue;
            }
            orow[0] = static_cast<uint8_t>((colsum[0] * 4 + 8) >> 4);
            orow[1] = static_cast<uint8_t>((colsum[0] * 3 + colsum[1] + 7) >> 4);
            for (int x = 1; x < cw - 1; ++x) {
                orow[2 * x] =
                    static_cast<uint8_t>((colsum[static_cast<size_t>(x)] * 3 +
                                          colsum[static_cast<size_t>(x - 1)] + 8) >> 4);
                orow[2 * x + 1] =
                    static_cast<uint8_t>((colsum[static_cast<size_t>(x)] * 3 +
                                          colsum[static_cast<size_t>(x + 1)] + 7) >> 4);
            }
            orow[2 * (cw - 1)] =
                static_cast<uint8_t>((colsum[static_cast<size_t>(cw - 1)] * 3 +
                                      colsum[static_cast<size_t>(cw - 2)] + 8) >> 4);
            orow[2 * cw - 1] =
                static_cast<uint8_t>((colsum[static_cast<size_t>(cw - 1)] * 4 + 7) >> 4);
        }
    }
    return out;
}

} // namespace

CoefficientImage parse_coefficients(std::span<const uint8_t> bytes) {
    Parser p;
    p.bytes = bytes;
    p.run();
    return std::move(p.img);
}

PixelImage decode_pixels(const CoefficientImage& coef) {
    if (coef.width <= 0 || coef.height <= 0 || coef.components.empty())
        throw EmptyImage("decode_pixels: empty coefficient image");
    if (coef.components.size() != coef.planes.size())
        throw ShapeMismatch("decode_pixels: component/plane count mismatch");
    if (coef.components.size() != 1 && coef.components.size() != 3)
        throw UnsupportedFormat("pixel decoding supports 1 or 3 components");

    int hmax = 1, vmax = 1;
    for (const auto& spec : coef.components) {
        hmax = std::max(hmax, spec.h_sampling);
        vmax = std::max(vmax, spec.v_sampling);
    }

    const int w = coef.width;
    const int h = coef.height;
    struct Decoded {
        std::vector<uint8_t> plane; // cropped to cw x ch at the given stride
        int stride = 0;
        int cw = 0;
        int ch = 0;
    };
    std::vector<Decoded> planes;

    for (size_t ci = 0; ci < coef.components.size(); ++ci) {
        const auto& spec = coef.components[ci];
        const auto& cc = coef.planes[ci];
        const auto& qt_opt = coef.quant_tables[spec.quant_table_id];
        if (!qt_opt) throw CorruptStream("missing quantization table");
        const QuantTable& qt = *qt_opt;

        Decoded d;
        d.stride = cc.blocks_w * 8;
        d.cw = (w * spec.h_sampling + hmax - 1) / hmax;
        d.ch = (h * spec.v_sampling + vmax - 1) / vmax;
        if (d.cw > d.stride || d.ch > cc.blocks_h * 8)
            throw ShapeMismatch("decode_pixels: block grid smaller than component");
        d.plane.resize(static_cast<size_t>(d.stride) * cc.blocks_h * 8);

        for (int by = 0; by < cc.blocks_h; ++by)
            for (int bx = 0; bx < cc.blocks_w; ++bx)
                idct_islow_block(cc.block(bx, by), qt.entries,
                                 d.plane.data() + static_cast<size_t>(by * 8) * d.stride + bx * 8,
                                 d.stride);
        planes.push_back(std::move(d));
    }

    PixelImage out;
    out.width = w;
    out.height = h;
    out.channels = static_cast<int>(coef.components.size()) == 1 ? 1 : 3;
    out.data.resize(static_cast<size_t>(w) * h * out.channels);

    if (out.channels == 1) {
        const auto& d = planes[0];
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                out.at(x, y, 0) = d.plane[static_cast<size_t>(y) * d.stride + x];
        return out;
    }

    // Bring every component up to full resolution.
    std::vector<std::vector<uint8_t>> full(3);
    for (size_t ci = 0; ci < 3; ++ci) {
        const auto& spec = coef.components[ci];
        auto& d = planes[ci];
        int fh = hmax / spec.h_sampling;
        int fv = vmax / spec.v_sampling;
        std::vector<uint8_t> up;
        if (fh == 1 && fv == 1) {
            up.resize(static_cast<size_t>(w) * h);
            for (int y = 0; y < h; ++y)
                std::copy_n(d.plane.data() + static_cast<size_t>(y) * d.stride, w,
                            up.data() + static_cast<size_t>(y) * w);
        } else if (fh == 2 && fv == 2 && hmax == 2 * spec.h_sampling &&
                   vmax == 2 * spec.v_sampling) {
            auto big = upsample_h2v2(d.plane, d.stride, d.cw, d.ch);
            up.resize(static_cast<size_t>(w) * h);
            for (int y = 0; y < h; ++y)
                std::copy_n(big.data() + static_cast<size_t>(y) * (2 * d.cw), w,
                            up.data() + static_cast<size_t>(y) * w);
        } else if (fh == 2 && fv == 1) {
            up.resize(static_cast<size_t>(w) * h);
            std::vector<int> irow(static_cast<size_t>(d.cw));
            std::vector<int> orow(static_cast<size_t>(2 * d.cw));
            for (int y = 0; y < h; ++y) {
                const uint8_t* src = d.plane.data() + static_cast<size_t>(y) * d.stride;
                for (int x = 0; x < d.cw; ++x) irow[static_cast<size_t>(x)] = src[x];
                upsample_row_h2(irow.data(), d.cw, orow.data());
                for (int x = 0; x < w; ++x)
                    up[static_cast<size_t>(y) * w + x] =
                        static_cast<uint8_t>(orow[static_cast<size_t>(x)]);
            }
        } else {
            // Integer replication fallback for uncommon layouts.
            up.resize(static_cast<size_t>(w) * h);
            for (int y = 0; y < h; ++y) {
                int sy = std::min(y / fv, d.ch - 1);
                for (int x = 0; x < w; ++x) {
                    int sx = std::min(x / fh, d.cw - 1);
                    up[static_cast<size_t>(y) * w + x] =
                        d.plane[static_cast<size_t>(sy) * d.stride + sx];
                }
            }
        }
        full[ci] = std::move(up);
    }

    static const YccTables t;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            size_t o = static_cast<size_t>(y) * w + x;
            int yy = full[0][o];
            int cb = full[1][o];
            int cr = full[2][o];
            out.at(x, y, 0) = static_cast<uint8_t>(std::clamp(yy + t.cr_r[cr], 0, 255));
            out.at(x, y, 1) = static_cast<uint8_t>(std::clamp(
                yy + static_cast<int>((t.cb_g[cb] + t.cr_g[cr]) >> 16), 0, 255));
            out.at(x, y, 2) = static_cast<uint8_t>(std::clamp(yy + t.cb_b[cb], 0, 255));
        }
    return out;
}

} // namespace splice::jpeg
