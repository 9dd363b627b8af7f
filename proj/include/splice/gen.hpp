#pragma once

#include "splice/jpeg.hpp"

#include <cstdint>
#include <string>
#include <vector>

// Splice dataset generator: procedural source images, randomized object
// transforms, and the originals/spliced/masks/manifest.csv layout. Originals
// are single-compressed sources; spliced images go through a second
// compression after the paste, which is the signal the detector learns.

namespace splice::gen {

// Deterministic procedural image: layered gradients, value noise, and
// geometric shapes. Same (seed, index) always yields the same pixels.
jpeg::PixelImage gen_image(int size, uint64_t seed, uint64_t index);
std::vector<jpeg::PixelImage> gen_corpus(int n, int size, uint64_t seed);

// Randomized edit applied to the donor object before pasting. Factor 1.0 is
// identity for the three enhancement fields.
struct Recipe {
    int qf1 = 75;
    int qf2 = 75;
    std::string object_name;
    double scale = 1.0;        // [0.85, 1.0]
    double rotation_deg = 0.0; // [0, 180)
    int flip = 0;              // horizontal when 1
    double contrast = 1.0;     // [1.5, 1.85] when drawn
    double brightness = 1.0;   // [1.1, 1.4] when drawn
    double sharpness = 1.0;    // [1.5, 2.0] when drawn
    int paste_x = -1;          // -1: drawn uniformly over valid positions
    int paste_y = -1;
};

struct TransformedObject {
    jpeg::PixelImage patch;
    jpeg::PixelImage mask; // re-binarized after resampling
};

// Scale, rotate (canvas expands), flip, then contrast/brightness/sharpness
// on the patch; the mask follows the geometric steps only.
TransformedObject transform_object(const jpeg::PixelImage& patch,
                                   const jpeg::PixelImage& mask, const Recipe& recipe);

std::vector<uint8_t> make_original(const jpeg::PixelImage& src, int qf1);

struct SplicedResult {
    std::vector<uint8_t> bytes;
    jpeg::PixelImage mask;      // 255 marks the pasted region, dims match the image
    jpeg::PixelImage composite; // pasted pixels before the second compression
};

// encode target at qf1 -> decode -> cut an object out of the donor with a
// procedural mask -> transform_object -> paste -> encode at qf2. The seed
// drives the object shape, the donor crop, and the paste position (unless
// the recipe pins paste_x/paste_y >= 0).
SplicedResult make_spliced(const jpeg::PixelImage& donor, const jpeg::PixelImage& target,
                           const Recipe& recipe, uint64_t seed);

struct ManifestRow {
    std::string name;
    std::string first_compression;
    std::string second_compression; // empty for originals
    std::string object_name;
    std::string scale;
    std::string rotation;
    std::string flip;
    std::string contrast;
    std::string brightness;
    std::string sharpness;
    std::string label; // "original" | "spliced"
    std::string mask_path;
};

struct DatasetOptions {
    int count = 10;      // pairs; the manifest gets count originals + count spliced
    uint64_t seed = 0;
    int image_size = 256;    // procedural corpus images are square
    std::string corpus_dir;  // when set, sources load from here (.pgm/.jpg)
    std::string out_dir;
};

// Writes originals/, spliced/, masks/, manifest.csv under out_dir and
// returns the manifest rows in file order.
std::vector<ManifestRow> gen_dataset(const DatasetOptions& opt);

void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> load_manifest(const std::string& path);

} // namespace splice::gen
