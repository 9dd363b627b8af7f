#pragma once

#include "splice/jpeg.hpp"

#include <string>

// Pixel-space operations used by the splice dataset generator. Images are
// jpeg::PixelImage (1 or 3 channels); masks are 1-channel images whose
// nonzero samples mark object pixels.

namespace splice::img {

using jpeg::PixelImage;

PixelImage to_gray(const PixelImage& src); // BT.601 luma, rounded
PixelImage to_rgb(const PixelImage& src);

PixelImage flip_horizontal(const PixelImage& src);
PixelImage flip_vertical(const PixelImage& src);

// Separable bilinear resampling; out dims must be >= 1.
PixelImage resize_bilinear(const PixelImage& src, int out_w, int out_h);

// Counter-clockwise rotation about the image center. The canvas expands to
// the bounding box of the rotated image; uncovered pixels are 0.
PixelImage rotate_bilinear(const PixelImage& src, double degrees);

// 3x3 mean filter with edge replication.
PixelImage box_blur3(const PixelImage& src);

// out = mean + factor * (in - mean), where mean is the scalar luma mean of
// the whole image. factor 1 is identity, 0 is a flat gray image.
PixelImage adjust_contrast(const PixelImage& src, double factor);

// out = factor * in. factor 1 is identity, 0 is black.
PixelImage adjust_brightness(const PixelImage& src, double factor);

// out = blur + factor * (in - blur) with a 3x3 box blur; factor 1 is
// identity, 0 fully blurred, >1 sharpened.
PixelImage adjust_sharpness(const PixelImage& src, double factor);

// Binarize a 1-channel image: >= 128 becomes 255, else 0.
PixelImage binarize_mask(const PixelImage& gray);

// Copy obj pixels where mask is nonzero into dst at offset (x, y).
// obj and mask must have identical dims; the rectangle must lie fully
// inside dst (PasteOutOfBounds otherwise).
void paste_masked(PixelImage& dst, const PixelImage& obj, const PixelImage& mask,
                  int x, int y);

// Binary PGM (P5, maxval 255).
PixelImage read_pgm(const std::string& path);
void write_pgm(const std::string& path, const PixelImage& img);

} // namespace splice::img
