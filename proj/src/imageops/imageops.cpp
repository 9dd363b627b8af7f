#include "splice/imageops.hpp"

#include "splice/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace splice::img {
namespace {

constexpr double kPi = 3.14159265358979323846;

void require_nonempty(const PixelImage& im, const char* who) {
    if (im.width <= 0 || im.height <= 0 || im.data.empty())
        throw EmptyImage(std::string(who) + ": empty image");
    if (im.channels != 1 && im.channels != 3)
        throw ShapeMismatch(std::string(who) + ": expected 1 or 3 channels");
    if (im.data.size() != static_cast<size_t>(im.width) * im.height * im.channels)
        throw ShapeMismatch(std::string(who) + ": buffer size does not match dims");
}

uint8_t round_clamp(double v) {
    return static_cast<uint8_t>(std::clamp(std::lround(v), 0l, 255l));
}

PixelImage like(const PixelImage& src, int w, int h) {
    PixelImage out;
    out.width = w;
    out.height = h;
    out.channels = src.channels;
    out.data.assign(static_cast<size_t>(w) * h * src.channels, 0);
    return out;
}

double luma_mean(const PixelImage& im) {
    double acc = 0.0;
    size_t n = static_cast<size_t>(im.width) * im.height;
    if (im.channels == 1) {
        for (size_t i = 0; i < n; ++i) acc += im.data[i];
    } else {
        for (size_t i = 0; i < n; ++i) {
            const uint8_t* p = im.data.data() + i * 3;
            acc += 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
        }
    }
    return acc / static_cast<double>(n);
}

} // namespace

PixelImage to_gray(const PixelImage& src) {
    require_nonempty(src, "to_gray");
    if (src.channels == 1) return src;
    PixelImage out;
    out.width = src.width;
    out.height = src.height;
    out.channels = 1;
    out.data.resize(static_cast<size_t>(src.width) * src.height);
    for (size_t i = 0; i < out.data.size(); ++i) {
        const uint8_t* p = src.data.data() + i * 3;
        out.data[i] = round_clamp(0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]);
    }
    return out;
}

PixelImage to_rgb(const PixelImage& src) {
    require_nonempty(src, "to_rgb");
    if (src.channels == 3) return src;
    PixelImage out;
    out.width = src.width;
    out.height = src.height;
    out.channels = 3;
    out.data.resize(static_cast<size_t>(src.width) * src.height * 3);
    for (size_t i = 0; i < src.data.size(); ++i) {
        out.data[i * 3] = out.data[i * 3 + 1] = out.data[i * 3 + 2] = src.data[i];
    }
    return out;
}

PixelImage flip_horizontal(const PixelImage& src) {
    require_nonempty(src, "flip_horizontal");
    PixelImage out = like(src, src.width, src.height);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x)
            for (int c = 0; c < src.channels; ++c)
                out.at(x, y, c) = src.at(src.width - 1 - x, y, c);
    return out;
}

PixelImage flip_vertical(const PixelImage& src) {
    require_nonempty(src, "flip_vertical");
    PixelImage out = like(src, src.width, src.height);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x)
            for (int c = 0; c < src.channels; ++c)
                out.at(x, y, c) = src.at(x, src.height - 1 - y, c);
    return out;
}

PixelImage resize_bilinear(const PixelImage& src, int out_w, int out_h) {
    require_nonempty(src, "resize_bilinear");
    if (out_w < 1 || out_h < 1) throw RangeError("resize_bilinear: output dims must be >= 1");
    PixelImage out = like(src, out_w, out_h);
    double sx = static_cast<double>(src.width) / out_w;
    double sy = static_cast<double>(src.height) / out_h;
    for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double wy = fy - y0;
        int ya = std::clamp(y0, 0, src.height - 1);
        int yb = std::clamp(y0 + 1, 0, src.height - 1);
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            double wx = fx - x0;
            int xa = std::clamp(x0, 0, src.width - 1);
            int xb = std::clamp(x0 + 1, 0, src.width - 1);
            for (int c = 0; c < src.channels; ++c) {
                double top = src.at(xa, ya, c) * (1 - wx) + src.at(xb, ya, c) * wx;
                double bot = src.at(xa, yb, c) * (1 - wx) + src.at(xb, yb, c) * wx;
                out.at(x, y, c) = round_clamp(top * (1 - wy) + bot * wy);
            }
        }
    }
    return out;
}

PixelImage rotate_bilinear(const PixelImage& src, double degrees) {
    require_nonempty(src, "rotate_bilinear");
    double rad = degrees * kPi / 180.0;
    double cs = std::cos(rad), sn = std::sin(rad);

    double w = src.width, h = src.height;
    double bw = std::abs(w * cs) + std::abs(h * sn);
    double bh = std::abs(w * sn) + std::abs(h * cs);
    int out_w = std::max(1, static_cast<int>(std::ceil(bw - 1e-9)));
    int out_h = std::max(1, static_cast<int>(std::ceil(bh - 1e-9)));

    PixelImage out = like(src, out_w, out_h);
    double ocx = out_w / 2.0, ocy = out_h / 2.0;
    double scx = w / 2.0, scy = h / 2.0;

    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
            // inverse map: rotate output coords clockwise back into the source
            double dx = (x + 0.5) - ocx;
            double dy = (y + 0.5) - ocy;
            double sxf = cs * dx - sn * dy + scx - 0.5;
            double syf = sn * dx + cs * dy + scy - 0.5;
            int x0 = static_cast<int>(std::floor(sxf));
            int y0 = static_cast<int>(std::floor(syf));
            double wx = sxf - x0, wy = syf - y0;
            double acc[3] = {0, 0, 0};
            double wsum = 0.0;
            for (int j = 0; j < 2; ++j)
                for (int i = 0; i < 2; ++i) {
                    int xi = x0 + i, yj = y0 + j;
                    if (xi < 0 || xi >= src.width || yj < 0 || yj >= src.height) continue;
                    double wgt = (i ? wx : 1 - wx) * (j ? wy : 1 - wy);
                    wsum += wgt;
                    for (int c = 0; c < src.channels; ++c)
                        acc[c] += wgt * src.at(xi, yj, c);
                }
            if (wsum <= 0.0) continue; // outside the source: stays 0
            for (int c = 0; c < src.channels; ++c)
                out.at(x, y, c) = round_clamp(acc[c] / wsum);
        }
    return out;
}

PixelImage box_blur3(const PixelImage& src) {
    require_nonempty(src, "box_blur3");
    PixelImage out = like(src, src.width, src.height);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x)
            for (int c = 0; c < src.channels; ++c) {
                double acc = 0.0;
                for (int j = -1; j <= 1; ++j)
                    for (int i = -1; i <= 1; ++i) {
                        int xi = std::clamp(x + i, 0, src.width - 1);
                        int yj = std::clamp(y + j, 0, src.height - 1);
                        acc += src.at(xi, yj, c);
                    }
                out.at(x, y, c) = round_clamp(acc / 9.0);
            }
    return out;
}

PixelImage adjust_contrast(const PixelImage& src, double factor) {
    require_nonempty(src, "adjust_contrast");
    if (factor < 0.0) throw RangeError("adjust_contrast: factor must be >= 0");
    double mean = luma_mean(src);
    PixelImage out = like(src, src.width, src.height);
    for (size_t i = 0; i < src.data.size(); ++i)
        out.data[i] = round_clamp(mean + factor * (src.data[i] - mean));
    return out;
}

PixelImage adjust_brightness(const PixelImage& src, double factor) {
    require_nonempty(src, "adjust_brightness");
    if (factor < 0.0) throw RangeError("adjust_brightness: factor must be >= 0");
    PixelImage out = like(src, src.width, src.height);
    for (size_t i = 0; i < src.data.size(); ++i)
        out.data[i] = round_clamp(factor * src.data[i]);
    return out;
}

PixelImage adjust_sharpness(const PixelImage& src, double factor) {
    require_nonempty(src, "adjust_sharpness");
    if (factor < 0.0) throw RangeError("adjust_sharpness: factor must be >= 0");
    PixelImage blur = box_blur3(src);
    PixelImage out = like(src, src.width, src.height);
    for (size_t i = 0; i < src.data.size(); ++i)
        out.data[i] = round_clamp(blur.data[i] + factor * (src.data[i] - blur.data[i]));
    return out;
}

PixelImage binarize_mask(const PixelImage& gray) {
    require_nonempty(gray, "binarize_mask");
    if (gray.channels != 1) throw ShapeMismatch("binarize_mask: mask must be 1-channel");
    PixelImage out = like(gray, gray.width, gray.height);
    for (size_t i = 0; i < gray.data.size(); ++i)
        out.data[i] = gray.data[i] >= 128 ? 255 : 0;
    return out;
}

void paste_masked(PixelImage& dst, const PixelImage& obj, const PixelImage& mask,
                  int x, int y) {
    require_nonempty(dst, "paste_masked");
    require_nonempty(obj, "paste_masked");
    require_nonempty(mask, "paste_masked");
    if (mask.channels != 1) throw ShapeMismatch("paste_masked: mask must be 1-channel");
    if (mask.width != obj.width || mask.height != obj.height)
        throw ShapeMismatch("paste_masked: object/mask dims differ");
    if (obj.channels != dst.channels)
        throw ShapeMismatch("paste_masked: object/destination channels differ");
    if (x < 0 || y < 0 || x + obj.width > dst.width || y + obj.height > dst.height)
        throw PasteOutOfBounds("paste_masked: object rectangle outside destination");
    bool any = false;
    for (int j = 0; j < obj.height; ++j)
        for (int i = 0; i < obj.width; ++i) {
            if (!mask.at(i, j, 0)) continue;
            any = true;
            for (int c = 0; c < obj.channels; ++c)
                dst.at(x + i, y + j, c) = obj.at(i, j, c);
        }
    if (!any) throw EmptyMask("paste_masked: mask has no nonzero pixels");
}

PixelImage read_pgm(const std::string& path) {
    auto bytes = jpeg::read_file(path);
    size_t pos = 0;
    auto token = [&]() -> std::string {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
        size_t start = pos;
        while (pos < bytes.size() && !std::isspace(bytes[pos])) ++pos;
        return {bytes.begin() + static_cast<long>(start), bytes.begin() + static_cast<long>(pos)};
    };
    if (token() != "P5") throw IoError("read_pgm: not a binary PGM: " + path);
    int w, h, maxval;
    try {
        w = std::stoi(token());
        h = std::stoi(token());
        maxval = std::stoi(token());
    } catch (const std::exception&) {
        throw IoError("read_pgm: malformed header: " + path);
    }
    if (w <= 0 || h <= 0 || maxval != 255)
        throw IoError("read_pgm: unsupported header values: " + path);
    ++pos; // exactly one whitespace byte after maxval
    if (bytes.size() - pos < static_cast<size_t>(w) * h)
        throw IoError("read_pgm: truncated pixel data: " + path);
    PixelImage out;
    out.width = w;
    out.height = h;
    out.channels = 1;
    out.data.assign(bytes.begin() + static_cast<long>(pos),
                    bytes.begin() + static_cast<long>(pos) + static_cast<long>(w) * h);
    return out;
}

void write_pgm(const std::string& path, const PixelImage& img) {
    require_nonempty(img, "write_pgm");
    if (img.channels != 1) throw ShapeMismatch("write_pgm: image must be 1-channel");
    std::string header = "P5\n" + std::to_string(img.width) + " " +
                         std::to_string(img.height) + "\n255\n";
    std::vector<uint8_t> bytes(header.begin(), header.end());
    bytes.insert(bytes.end(), img.data.begin(), img.data.end());
    jpeg::write_file(path, {bytes.data(), bytes.size()});
}

} // namespace splice::img
