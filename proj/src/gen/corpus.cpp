#include "splice/gen.hpp"

#include "splice/errors.hpp"
#include "splice/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

// Procedural source images. Nothing here tries to look photographic; the
// point is cheap, seeded, visually varied content whose JPEG coefficient
// statistics are rich enough to train and test on.

namespace splice::gen {
namespace {

using rng::Stream;

// Coarse random lattice sampled with bilinear interpolation.
struct ValueNoise {
    int cells;
    std::vector<double> lattice; // (cells+1)^2

    ValueNoise(int cells_, Stream& s) : cells(cells_) {
        lattice.resize(static_cast<size_t>(cells + 1) * (cells + 1));
        for (auto& v : lattice) v = s.uniform();
    }

    double at(double u, double v) const {
        double x = u * cells, y = v * cells;
        int x0 = std::min(static_cast<int>(x), cells - 1);
        int y0 = std::min(static_cast<int>(y), cells - 1);
        double fx = x - x0, fy = y - y0;
        auto l = [&](int ix, int iy) {
            return lattice[static_cast<size_t>(iy) * (cells + 1) + ix];
        };
        double top = l(x0, y0) * (1 - fx) + l(x0 + 1, y0) * fx;
        double bot = l(x0, y0 + 1) * (1 - fx) + l(x0 + 1, y0 + 1) * fx;
        return top * (1 - fy) + bot * fy;
    }
};

struct Shape {
    int type; // 0 ellipse, 1 rectangle, 2 triangle
    double cx, cy, rx, ry;
    double x0, y0, x1, y1;
    double ax, ay, bx, by, tx, ty;
    double color[3];
    double alpha;

    bool contains(double x, double y) const {
        switch (type) {
        case 0: {
            double dx = (x - cx) / rx, dy = (y - cy) / ry;
            return dx * dx + dy * dy <= 1.0;
        }
        case 1:
            return x >= x0 && x <= x1 && y >= y0 && y <= y1;
        default: {
            auto side = [](double px, double py, double qx, double qy, double x_,
                           double y_) {
                return (qx - px) * (y_ - py) - (qy - py) * (x_ - px);
            };
            double d1 = side(ax, ay, bx, by, x, y);
            double d2 = side(bx, by, tx, ty, x, y);
            double d3 = side(tx, ty, ax, ay, x, y);
            bool neg = d1 < 0 || d2 < 0 || d3 < 0;
            bool pos = d1 > 0 || d2 > 0 || d3 > 0;
            return !(neg && pos);
        }
        }
    }
};

} // namespace

jpeg::PixelImage gen_image(int size, uint64_t seed, uint64_t index) {
    if (size < 64) throw RangeError("gen_image: size must be >= 64");

    Stream s(rng::mix(seed, index));

    // Base: linear gradient between two random colors along a random
    // direction.
    double theta = s.uniform(0.0, 2.0 * 3.14159265358979323846);
    double dirx = std::cos(theta), diry = std::sin(theta);
    double c0[3], c1[3];
    for (int c = 0; c < 3; ++c) {
        c0[c] = s.uniform(20.0, 235.0);
        c1[c] = s.uniform(20.0, 235.0);
    }

    // Noise octaves: coarse to fine with shrinking amplitude, shared across
    // channels with per-channel gain so the chroma isn't flat.
    struct Octave {
        ValueNoise noise;
        double amp;
    };
    std::vector<Octave> octaves;
    int cells = 3 + static_cast<int>(s.next() % 3); // 3..5
    for (int o = 0; o < 3; ++o) {
        double amp = s.uniform(14.0, 42.0) / (o + 1);
        octaves.push_back({ValueNoise(cells, s), amp});
        cells *= 2;
    }
    double gain[3];
    for (int c = 0; c < 3; ++c) gain[c] = s.uniform(0.6, 1.0);

    int nshapes = 2 + static_cast<int>(s.next() % 5); // 2..6
    std::vector<Shape> shapes(static_cast<size_t>(nshapes));
    for (auto& sh : shapes) {
        sh.type = static_cast<int>(s.next() % 3);
        sh.cx = s.uniform(0.1, 0.9) * size;
        sh.cy = s.uniform(0.1, 0.9) * size;
        sh.rx = s.uniform(0.06, 0.28) * size;
        sh.ry = s.uniform(0.06, 0.28) * size;
        sh.x0 = sh.cx - sh.rx;
        sh.x1 = sh.cx + sh.rx;
        sh.y0 = sh.cy - sh.ry;
        sh.y1 = sh.cy + sh.ry;
        sh.ax = sh.cx + s.uniform(-1.0, 1.0) * sh.rx;
        sh.ay = sh.cy + s.uniform(-1.0, 1.0) * sh.ry;
        sh.bx = sh.cx + s.uniform(-1.0, 1.0) * sh.rx;
        sh.by = sh.cy + s.uniform(-1.0, 1.0) * sh.ry;
        sh.tx = sh.cx + s.uniform(-1.0, 1.0) * sh.rx;
        sh.ty = sh.cy + s.uniform(-1.0, 1.0) * sh.ry;
        for (int c = 0; c < 3; ++c) sh.color[c] = s.uniform(10.0, 245.0);
        sh.alpha = s.uniform(0.45, 0.95);
    }

    jpeg::PixelImage out;
    out.width = size;
    out.height = size;
    out.channels = 3;
    out.data.resize(static_cast<size_t>(size) * size * 3);

    const double diag = std::sqrt(2.0) * size;
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            double t = ((x - size / 2.0) * dirx + (y - size / 2.0) * diry) / diag + 0.5;
            t = std::clamp(t, 0.0, 1.0);
            double u = (x + 0.5) / size, v = (y + 0.5) / size;
            double n = 0.0;
            for (const auto& o : octaves) n += (o.noise.at(u, v) - 0.5) * o.amp;

            double px[3];
            for (int c = 0; c < 3; ++c) px[c] = c0[c] * (1 - t) + c1[c] * t + n * gain[c];
            for (const auto& sh : shapes) {
                if (sh.contains(x + 0.5, y + 0.5))
                    for (int c = 0; c < 3; ++c)
                        px[c] = px[c] * (1 - sh.alpha) + sh.color[c] * sh.alpha;
            }
            size_t at = (static_cast<size_t>(y) * size + x) * 3;
            for (int c = 0; c < 3; ++c)
                out.data[at + c] =
                    static_cast<uint8_t>(std::lround(std::clamp(px[c], 0.0, 255.0)));
        }
    }
    return out;
}

std::vector<jpeg::PixelImage> gen_corpus(int n, int size, uint64_t seed) {
    if (n < 0) throw RangeError("gen_corpus: n must be >= 0");
    std::vector<jpeg::PixelImage> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(gen_image(size, seed, static_cast<uint64_t>(i)));
    return out;
}

} // namespace splice::gen
