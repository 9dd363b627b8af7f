#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "splice/errors.hpp"
#include "splice/jpeg.hpp"

#include "test_util.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

using namespace splice;
using testutil::fixture_index;
using testutil::fixture_path;
using testutil::random_image;
using testutil::read_bytes;
using testutil::solid_image;

TEST_CASE("zigzag_to_natural is a bijection with the standard anchors") {
    const auto& z = jpeg::zigzag_to_natural();
    std::set<uint8_t> seen(z.begin(), z.end());
    CHECK(seen.size() == 64);
    CHECK(z[0] == 0);
    CHECK(z[1] == 1);  // first AC: one step right
    CHECK(z[2] == 8);  // second AC: one step down
    CHECK(z[3] == 16);
    CHECK(z[63] == 63);
}

TEST_CASE("quality_to_tables follows the IJG scaling convention") {
    auto [l50, c50] = jpeg::quality_to_tables(50);
    // scale 100 reproduces the Annex K base tables
    CHECK(l50.entries[0] == 16);
    CHECK(l50.entries[1] == 11);
    CHECK(l50.entries[63] == 99);
    CHECK(c50.entries[0] == 17);
    CHECK(c50.entries[63] == 99);

    auto [l100, c100] = jpeg::quality_to_tables(100);
    CHECK(std::all_of(l100.entries.begin(), l100.entries.end(),
                      [](uint16_t v) { return v == 1; }));
    CHECK(std::all_of(c100.entries.begin(), c100.entries.end(),
                      [](uint16_t v) { return v == 1; }));

    auto [l25, c25] = jpeg::quality_to_tables(25); // scale 5000/25 = 200
    CHECK(l25.entries[0] == 32);

    auto [l95, c95] = jpeg::quality_to_tables(95); // scale 200 - 2*95 = 10
    CHECK(l95.entries[0] == 2);

    CHECK_THROWS_AS(jpeg::quality_to_tables(0), RangeError);
    CHECK_THROWS_AS(jpeg::quality_to_tables(101), RangeError);
}

TEST_CASE("encode/parse round-trips quantized coefficients bit-exactly") {
    for (uint64_t i = 0; i < 4; ++i) {
        auto img = random_image(75 + static_cast<int>(i) * 7, 50 + static_cast<int>(i) * 3, 3, 900 + i);
        for (int qf : {30, 75}) {
            for (auto sub : {jpeg::Subsampling::s420, jpeg::Subsampling::s444}) {
                jpeg::CoefficientImage written;
                auto bytes = jpeg::encode(img, qf, sub, &written);
                auto parsed = jpeg::parse_coefficients({bytes.data(), bytes.size()});
                REQUIRE(parsed.components.size() == written.components.size());
                CHECK(parsed.width == img.width);
                CHECK(parsed.height == img.height);
                for (size_t c = 0; c < parsed.planes.size(); ++c) {
                    REQUIRE(parsed.planes[c].coeffs.size() == written.planes[c].coeffs.size());
                    CHECK(parsed.planes[c].coeffs == written.planes[c].coeffs);
                }
                auto [lq, cq] = jpeg::quality_to_tables(qf);
                REQUIRE(parsed.quant_tables[0].has_value());
                CHECK(parsed.quant_tables[0]->entries == lq.entries);
            }
        }
    }
}

TEST_CASE("grayscale encode round-trips and decodes to one channel") {
    auto img = random_image(41, 29, 1, 7001);
    jpeg::CoefficientImage written;
    auto bytes = jpeg::encode(img, 80, jpeg::Subsampling::s444, &written);
    auto parsed = jpeg::parse_coefficients({bytes.data(), bytes.size()});
    REQUIRE(parsed.components.size() == 1);
    CHECK(parsed.planes[0].coeffs == written.planes[0].coeffs);
    auto px = jpeg::decode_pixels(parsed);
    CHECK(px.channels == 1);
    CHECK(px.width == 41);
    CHECK(px.height == 29);
}

TEST_CASE("MCU-padded block grids have the expected geometry") {
    auto img = random_image(33, 17, 3, 31);
    auto b420 = jpeg::encode(img, 75, jpeg::Subsampling::s420);
    auto c420 = jpeg::parse_coefficients({b420.data(), b420.size()});
    // 4:2:0 MCUs are 16x16: ceil(33/16)=3 across, ceil(17/16)=2 down
    CHECK(c420.planes[0].blocks_w == 6);
    CHECK(c420.planes[0].blocks_h == 4);
    CHECK(c420.planes[0].block_count() == 24);
    CHECK(c420.planes[1].blocks_w == 3);
    CHECK(c420.planes[1].blocks_h == 2);

    auto b444 = jpeg::encode(img, 75, jpeg::Subsampling::s444);
    auto c444 = jpeg::parse_coefficients({b444.data(), b444.size()});
    CHECK(c444.planes[0].blocks_w == 5);
    CHECK(c444.planes[0].blocks_h == 3);
    CHECK(c444.planes[0].block_count() == 15);
}

TEST_CASE("solid images produce the closed-form DC-only coefficients") {
    // Gray level g maps to luma g, level shift g-128, DC gain 8, then
    // quantization by the table's DC entry with round-half-away behavior.
    auto img = solid_image(48, 32, 3, 200);
    auto bytes = jpeg::encode(img, 50, jpeg::Subsampling::s420);
    auto ci = jpeg::parse_coefficients({bytes.data(), bytes.size()});
    auto [lq, cq] = jpeg::quality_to_tables(50);
    const int expected_dc = static_cast<int>(std::lround((200.0 - 128.0) * 8.0 / lq.entries[0]));
    for (size_t b = 0; b < ci.planes[0].block_count(); ++b) {
        const int16_t* blk = ci.planes[0].coeffs.data() + b * 64;
        CHECK(blk[0] == expected_dc);
        for (int k = 1; k < 64; ++k) CHECK(blk[k] == 0);
    }
    // chroma of a gray image sits exactly at the 128 level-shift zero
    for (size_t plane = 1; plane < ci.planes.size(); ++plane)
        for (int16_t v : ci.planes[plane].coeffs) CHECK(v == 0);
}

TEST_CASE("encoded coefficients stay within one step of an exact double FDCT") {
    auto img = random_image(8, 8, 1, 424242);
    jpeg::CoefficientImage written;
    jpeg::encode(img, 50, jpeg::Subsampling::s444, &written);
    auto [lq, cq] = jpeg::quality_to_tables(50);

    for (int u = 0; u < 8; ++u) {
        for (int v = 0; v < 8; ++v) {
            double acc = 0.0;
            for (int y = 0; y < 8; ++y)
                for (int x = 0; x < 8; ++x) {
                    double s = static_cast<double>(img.at(x, y, 0)) - 128.0;
                    acc += s * std::cos((2 * x + 1) * v * std::numbers::pi / 16.0) *
                           std::cos((2 * y + 1) * u * std::numbers::pi / 16.0);
                }
            double cu = u == 0 ? 1.0 / std::sqrt(2.0) : 1.0;
            double cv = v == 0 ? 1.0 / std::sqrt(2.0) : 1.0;
            double exact = 0.25 * cu * cv * acc;
            int natural = u * 8 + v;
            double ideal = exact / lq.entries[static_cast<size_t>(natural)];
            CHECK(std::abs(written.planes[0].coeffs[static_cast<size_t>(natural)] - ideal) <= 1.0);
        }
    }
}

TEST_CASE("reference-encoded fixtures decode within tolerance of the reference decoder") {
    auto idx = fixture_index();
    REQUIRE(idx.size() >= 20);
    for (const auto& e : idx) {
        auto bytes = jpeg::read_file(fixture_path(e.name));
        auto px = jpeg::decode_pixels(jpeg::parse_coefficients({bytes.data(), bytes.size()}));
        REQUIRE(px.width == e.width);
        REQUIRE(px.height == e.height);
        REQUIRE(px.channels == e.channels);
        auto want = read_bytes(fixture_path(e.name.substr(0, e.name.size() - 4) + ".raw"));
        REQUIRE(want.size() == px.data.size());
        size_t close = 0;
        int maxdiff = 0;
        for (size_t i = 0; i < want.size(); ++i) {
            int d = std::abs(static_cast<int>(want[i]) - px.data[i]);
            maxdiff = std::max(maxdiff, d);
            close += d <= 2;
        }
        INFO(e.name << " maxdiff=" << maxdiff);
        CHECK(static_cast<double>(close) >= 0.999 * static_cast<double>(want.size()));
    }
}

TEST_CASE("restart-marker streams are handled (DRI + RSTn)") {
    auto bytes = jpeg::read_file(fixture_path("restart.jpg"));
    const std::vector<uint8_t> dri = {0xff, 0xdd};
    REQUIRE(std::search(bytes.begin(), bytes.end(), dri.begin(), dri.end()) != bytes.end());
    auto ci = jpeg::parse_coefficients({bytes.data(), bytes.size()});
    CHECK(ci.restart_interval > 0);
    auto px = jpeg::decode_pixels(ci);
    auto want = read_bytes(fixture_path("restart.raw"));
    REQUIRE(want.size() == px.data.size());
    size_t close = 0;
    for (size_t i = 0; i < want.size(); ++i)
        close += std::abs(static_cast<int>(want[i]) - px.data[i]) <= 2;
    CHECK(static_cast<double>(close) >= 0.999 * static_cast<double>(want.size()));
}

TEST_CASE("progressive streams raise UnsupportedFormat") {
    auto bytes = jpeg::read_file(fixture_path("progressive.jpg"));
    CHECK_THROWS_AS(jpeg::parse_coefficients({bytes.data(), bytes.size()}), UnsupportedFormat);
}

TEST_CASE("malformed streams raise CorruptStream") {
    auto bytes = jpeg::read_file(fixture_path("ref_00.jpg"));

    SUBCASE("empty input") {
        CHECK_THROWS_AS(jpeg::parse_coefficients({bytes.data(), size_t{0}}), CorruptStream);
    }
    SUBCASE("missing SOI") {
        auto bad = bytes;
        bad[0] = 0x00;
        CHECK_THROWS_AS(jpeg::parse_coefficients({bad.data(), bad.size()}), CorruptStream);
    }
    SUBCASE("truncated entropy data") {
        std::vector<uint8_t> bad(bytes.begin(), bytes.begin() + bytes.size() / 2);
        CHECK_THROWS_AS(jpeg::parse_coefficients({bad.data(), bad.size()}), CorruptStream);
    }
}

TEST_CASE("decode_pixels rejects an empty coefficient image") {
    jpeg::CoefficientImage empty;
    CHECK_THROWS_AS(jpeg::decode_pixels(empty), EmptyImage);
}

TEST_CASE("encode validates quality and input shape") {
    auto img = random_image(16, 16, 3, 5);
    CHECK_THROWS_AS(jpeg::encode(img, 0), RangeError);
    CHECK_THROWS_AS(jpeg::encode(img, 101), RangeError);
    jpeg::PixelImage bad = img;
    bad.channels = 2;
    CHECK_THROWS_AS(jpeg::encode(bad, 75), ShapeMismatch);
}

TEST_CASE("recompress re-encodes at the new quality and keeps layout") {
    auto img = random_image(64, 48, 3, 99);
    auto first = jpeg::encode(img, 90, jpeg::Subsampling::s420);
    auto second = jpeg::recompress({first.data(), first.size()}, 55);
    auto ci = jpeg::parse_coefficients({second.data(), second.size()});
    auto [lq, cq] = jpeg::quality_to_tables(55);
    REQUIRE(ci.quant_tables[0].has_value());
    CHECK(ci.quant_tables[0]->entries == lq.entries);
    CHECK(ci.components.size() == 3);
    CHECK(ci.components[0].h_sampling == 2);
    CHECK(ci.components[0].v_sampling == 2);
}
