#include "splice/gen.hpp"

#include "splice/errors.hpp"
#include "splice/imageops.hpp"
#include "splice/rng.hpp"

#include <algorithm>
#include <cmath>

namespace splice::gen {
namespace {

bool has_object(const jpeg::PixelImage& mask) {
    return std::any_of(mask.data.begin(), mask.data.end(), [](uint8_t v) { return v != 0; });
}

} // namespace

TransformedObject transform_object(const jpeg::PixelImage& patch,
                                   const jpeg::PixelImage& mask, const Recipe& recipe) {
    if (mask.channels != 1)
        throw ShapeMismatch("transform_object: mask must be single-channel");
    if (mask.width != patch.width || mask.height != patch.height)
        throw ShapeMismatch("transform_object: mask dims must match the patch");
    if (!has_object(mask)) throw EmptyMask("transform_object: mask has no object");
    if (recipe.scale <= 0.0) throw RangeError("transform_object: scale must be positive");

    jpeg::PixelImage p = patch;
    jpeg::PixelImage m = mask;

    if (recipe.scale != 1.0) {
        int w = std::max(1, static_cast<int>(std::lround(p.width * recipe.scale)));
        int h = std::max(1, static_cast<int>(std::lround(p.height * recipe.scale)));
        p = img::resize_bilinear(p, w, h);
        m = img::binarize_mask(img::resize_bilinear(m, w, h));
    }
    if (recipe.rotation_deg != 0.0) {
        p = img::rotate_bilinear(p, recipe.rotation_deg);
        m = img::binarize_mask(img::rotate_bilinear(m, recipe.rotation_deg));
    }
    if (recipe.flip) {
        p = img::flip_horizontal(p);
        m = img::flip_horizontal(m);
    }
    if (recipe.contrast != 1.0) p = img::adjust_contrast(p, recipe.contrast);
    if (recipe.brightness != 1.0) p = img::adjust_brightness(p, recipe.brightness);
    if (recipe.sharpness != 1.0) p = img::adjust_sharpness(p, recipe.sharpness);

    if (!has_object(m))
        throw EmptyMask("transform_object: object vanished under the transform");
    return {std::move(p), std::move(m)};
}

std::vector<uint8_t> make_original(const jpeg::PixelImage& src, int qf1) {
    return jpeg::encode(src, qf1, jpeg::Subsampling::s420);
}

SplicedResult make_spliced(const jpeg::PixelImage& donor, const jpeg::PixelImage& target,
                           const Recipe& recipe, uint64_t seed) {
    if (donor.width < 8 || donor.height < 8)
        throw TooSmall("make_spliced: donor is too small");
    if (target.width < 16 || target.height < 16)
        throw TooSmall("make_spliced: target is too small");

    auto first = jpeg::encode(target, recipe.qf1, jpeg::Subsampling::s420);
    jpeg::PixelImage canvas = img::to_rgb(jpeg::decode_pixels(jpeg::parse_coefficients(first)));

    rng::Stream s(rng::mix(seed, 0x6f626a70ull)); // object geometry stream

    // Object footprint sized against the target so the final mask fraction
    // lands inside the dataset bounds even after the recipe's down-scale.
    double frac = s.uniform(0.06, 0.32);
    double aspect = s.uniform(0.6, 1.6);
    double area = frac * target.width * target.height;
    int ow = static_cast<int>(std::lround(std::sqrt(area * aspect)));
    int oh = static_cast<int>(std::lround(std::sqrt(area / aspect)));
    ow = std::clamp(ow, 8, std::min(donor.width, target.width - 2));
    oh = std::clamp(oh, 8, std::min(donor.height, target.height - 2));

    // Procedural object mask: a filled ellipse or a jittered polygon.
    jpeg::PixelImage omask;
    omask.width = ow;
    omask.height = oh;
    omask.channels = 1;
    omask.data.assign(static_cast<size_t>(ow) * oh, 0);
    const double cx = ow / 2.0, cy = oh / 2.0;
    if (s.coin()) {
        double rx = 0.48 * ow, ry = 0.48 * oh;
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
                if (dx * dx + dy * dy <= 1.0) omask.data[static_cast<size_t>(y) * ow + x] = 255;
            }
    } else {
        int verts = 5 + static_cast<int>(s.next() % 5); // 5..9
        std::vector<double> vx(static_cast<size_t>(verts)), vy(vx.size());
        for (int i = 0; i < verts; ++i) {
            double ang = (i + s.uniform(-0.2, 0.2)) * 2.0 * 3.14159265358979323846 / verts;
            double rad = s.uniform(0.62, 0.98);
            vx[static_cast<size_t>(i)] = cx + 0.5 * ow * rad * std::cos(ang);
            vy[static_cast<size_t>(i)] = cy + 0.5 * oh * rad * std::sin(ang);
        }
        // Even-odd scan fill.
        for (int y = 0; y < oh; ++y) {
            double py = y + 0.5;
            for (int x = 0; x < ow; ++x) {
                double px = x + 0.5;
                bool inside = false;
                for (int i = 0, j = verts - 1; i < verts; j = i++) {
                    double xi = vx[static_cast<size_t>(i)], yi = vy[static_cast<size_t>(i)];
                    double xj = vx[static_cast<size_t>(j)], yj = vy[static_cast<size_t>(j)];
                    if ((yi > py) != (yj > py) &&
                        px < (xj - xi) * (py - yi) / (yj - yi) + xi)
                        inside = !inside;
                }
                if (inside) omask.data[static_cast<size_t>(y) * ow + x] = 255;
            }
        }
    }

    int crop_x = ow < donor.width ? s.uniform_int(0, donor.width - ow) : 0;
    int crop_y = oh < donor.height ? s.uniform_int(0, donor.height - oh) : 0;
    jpeg::PixelImage donor_rgb = img::to_rgb(donor);
    jpeg::PixelImage patch;
    patch.width = ow;
    patch.height = oh;
    patch.channels = 3;
    patch.data.resize(static_cast<size_t>(ow) * oh * 3);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x)
            for (int c = 0; c < 3; ++c)
                patch.at(x, y, c) = donor_rgb.at(crop_x + x, crop_y + y, c);

    auto obj = transform_object(patch, omask, recipe);

    if (obj.patch.width > canvas.width || obj.patch.height > canvas.height)
        throw PasteOutOfBounds("make_spliced: transformed object exceeds the target");
    int px = recipe.paste_x, py = recipe.paste_y;
    if (px < 0) px = s.uniform_int(0, canvas.width - obj.patch.width);
    if (py < 0) py = s.uniform_int(0, canvas.height - obj.patch.height);

    img::paste_masked(canvas, obj.patch, obj.mask, px, py);

    SplicedResult out;
    out.composite = canvas;
    out.bytes = jpeg::encode(canvas, recipe.qf2, jpeg::Subsampling::s420);
    out.mask.width = canvas.width;
    out.mask.height = canvas.height;
    out.mask.channels = 1;
    out.mask.data.assign(static_cast<size_t>(canvas.width) * canvas.height, 0);
    for (int y = 0; y < obj.mask.height; ++y)
        for (int x = 0; x < obj.mask.width; ++x)
            if (obj.mask.at(x, y, 0) != 0) out.mask.at(px + x, py + y, 0) = 255;
    return out;
}

} // namespace splice::gen
