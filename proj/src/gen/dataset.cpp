#include "splice/gen.hpp"

#include "splice/errors.hpp"
#include "splice/imageops.hpp"
#include "splice/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace splice::gen {
namespace {

namespace fs = std::filesystem;

constexpr const char* kHeader =
    "name,first compression,second compression,object name,scale,rotation,flip,"
    "contrast,brightness,sharpness,label,mask_path";

std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string seq_name(const char* stem, int i, const char* suffix) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%04d%s", stem, i, suffix);
    return buf;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

// Source images for one (original, spliced) pair.
struct SourcePair {
    jpeg::PixelImage target;
    jpeg::PixelImage donor;
    std::string donor_name;
};

struct Corpus {
    int image_size;
    uint64_t seed;
    std::vector<fs::path> files; // empty in procedural mode

    explicit Corpus(const DatasetOptions& opt) : image_size(opt.image_size), seed(opt.seed) {
        if (opt.corpus_dir.empty()) return;
        for (const auto& e : fs::directory_iterator(opt.corpus_dir)) {
            if (!e.is_regular_file()) continue;
            std::string ext = e.path().extension().string();
            std::transform(ext.begin(), ext.end(), ext.begin(),
                           [](unsigned char c) { return std::tolower(c); });
            if (ext == ".pgm" || ext == ".jpg" || ext == ".jpeg") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        if (files.size() < 2)
            throw InsufficientCorpus("gen_dataset: corpus needs at least 2 images");
    }

    bool procedural() const { return files.empty(); }

    jpeg::PixelImage load(size_t i) const {
        const auto& p = files[i];
        if (p.extension() == ".pgm") return img::read_pgm(p.string());
        auto bytes = jpeg::read_file(p.string());
        return jpeg::decode_pixels(jpeg::parse_coefficients(bytes));
    }

    SourcePair pair(int i, rng::Stream& s) const {
        SourcePair out;
        if (procedural()) {
            out.target = gen_image(image_size, seed, 2 * static_cast<uint64_t>(i));
            out.donor = gen_image(image_size, seed, 2 * static_cast<uint64_t>(i) + 1);
            out.donor_name = "proc-" + std::to_string(2 * i + 1);
        } else {
            size_t m = files.size();
            size_t t = static_cast<size_t>(i) % m;
            size_t d = (t + 1 + static_cast<size_t>(s.next() % (m - 1))) % m;
            out.target = load(t);
            out.donor = load(d);
            out.donor_name = files[d].filename().string();
        }
        return out;
    }
};

} // namespace

std::vector<ManifestRow> gen_dataset(const DatasetOptions& opt) {
    if (opt.count < 1) throw RangeError("gen_dataset: count must be >= 1");
    if (opt.out_dir.empty()) throw ConfigError("gen_dataset: out_dir is required");

    Corpus corpus(opt);
    if (!corpus.procedural() && static_cast<size_t>(opt.count) > corpus.files.size())
        throw InsufficientCorpus("gen_dataset: count " + std::to_string(opt.count) +
                                 " exceeds the " + std::to_string(corpus.files.size()) +
                                 " available pairs");

    fs::path root(opt.out_dir);
    std::error_code ec;
    fs::create_directories(root / "originals", ec);
    fs::create_directories(root / "spliced", ec);
    fs::create_directories(root / "masks", ec);
    if (ec) throw IoError("gen_dataset: cannot create " + opt.out_dir);

    std::vector<ManifestRow> originals, spliced;
    for (int i = 0; i < opt.count; ++i) {
        rng::Stream rs(rng::mix(opt.seed, 0x1000000000000000ull + static_cast<uint64_t>(i)));

        Recipe r;
        r.qf1 = rs.uniform_int(30, 95);
        r.qf2 = rs.uniform_int(30, 95);
        r.scale = round2(rs.uniform(0.85, 1.0));
        r.rotation_deg = std::min(round2(rs.uniform(0.0, 180.0)), 179.99);
        r.flip = rs.coin() ? 1 : 0;
        r.contrast = round2(rs.uniform(1.5, 1.85));
        r.brightness = round2(rs.uniform(1.1, 1.4));
        r.sharpness = round2(rs.uniform(1.5, 2.0));

        SourcePair src = corpus.pair(i, rs);
        r.object_name = src.donor_name;

        std::string orig_name = "originals/" + seq_name("orig", i, ".jpg");
        auto orig = make_original(src.target, r.qf1);
        jpeg::write_file((root / orig_name).string(), {orig.data(), orig.size()});
        ManifestRow orow;
        orow.name = orig_name;
        orow.first_compression = std::to_string(r.qf1);
        orow.label = "original";
        originals.push_back(std::move(orow));

        // The object drawing can land outside the mask-area bounds for
        // extreme shapes; redraw with a fresh sub-seed until it fits.
        SplicedResult res;
        bool ok = false;
        const double area = static_cast<double>(src.target.width) * src.target.height;
        for (uint64_t attempt = 0; attempt < 32 && !ok; ++attempt) {
            uint64_t sseed = rng::mix(opt.seed, 0x2000000000000000ull +
                                                    (static_cast<uint64_t>(i) << 6) + attempt);
            res = make_spliced(src.donor, src.target, r, sseed);
            size_t nz = 0;
            for (uint8_t v : res.mask.data) nz += v != 0;
            double frac = static_cast<double>(nz) / area;
            ok = frac >= 0.01 && frac <= 0.40;
        }
        if (!ok) throw RangeError("gen_dataset: could not satisfy the mask area bounds");

        std::string spl_name = "spliced/" + seq_name("spliced", i, ".jpg");
        std::string mask_name = "masks/" + seq_name("spliced", i, "_mask.pgm");
        jpeg::write_file((root / spl_name).string(), {res.bytes.data(), res.bytes.size()});
        img::write_pgm((root / mask_name).string(), res.mask);

        ManifestRow srow;
        srow.name = spl_name;
        srow.first_compression = std::to_string(r.qf1);
        srow.second_compression = std::to_string(r.qf2);
        srow.object_name = r.object_name;
        srow.scale = fmt2(r.scale);
        srow.rotation = fmt2(r.rotation_deg);
        srow.flip = std::to_string(r.flip);
        srow.contrast = fmt2(r.contrast);
        srow.brightness = fmt2(r.brightness);
        srow.sharpness = fmt2(r.sharpness);
        srow.label = "spliced";
        srow.mask_path = mask_name;
        spliced.push_back(std::move(srow));
    }

    std::vector<ManifestRow> rows = std::move(originals);
    rows.insert(rows.end(), std::make_move_iterator(spliced.begin()),
                std::make_move_iterator(spliced.end()));
    write_manifest((root / "manifest.csv").string(), rows);
    return rows;
}

void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows) {
    std::string out = kHeader;
    out += '\n';
    for (const auto& r : rows) {
        out += r.name + ',' + r.first_compression + ',' + r.second_compression + ',' +
               r.object_name + ',' + r.scale + ',' + r.rotation + ',' + r.flip + ',' +
               r.contrast + ',' + r.brightness + ',' + r.sharpness + ',' + r.label + ',' +
               r.mask_path + '\n';
    }
    jpeg::write_file(path, {reinterpret_cast<const uint8_t*>(out.data()), out.size()});
}

std::vector<ManifestRow> load_manifest(const std::string& path) {
    auto bytes = jpeg::read_file(path);
    std::string text(bytes.begin(), bytes.end());

    std::vector<std::string> lines;
    size_t start = 0;
    while (start < text.size()) {
        size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(std::move(line));
        start = end + 1;
    }
    if (lines.empty() || lines[0] != kHeader)
        throw LoadError("manifest has an unexpected header: " + path);

    std::vector<ManifestRow> rows;
    for (size_t i = 1; i < lines.size(); ++i) {
        std::vector<std::string> f;
        size_t pos = 0;
        const std::string& line = lines[i];
        while (true) {
            size_t c = line.find(',', pos);
            if (c == std::string::npos) {
                f.push_back(line.substr(pos));
                break;
            }
            f.push_back(line.substr(pos, c - pos));
            pos = c + 1;
        }
        if (f.size() != 12)
            throw LoadError("manifest row " + std::to_string(i) + " is malformed: " + path);
        ManifestRow r;
        r.name = f[0];
        r.first_compression = f[1];
        r.second_compression = f[2];
        r.object_name = f[3];
        r.scale = f[4];
        r.rotation = f[5];
        r.flip = f[6];
        r.contrast = f[7];
        r.brightness = f[8];
        r.sharpness = f[9];
        r.label = f[10];
        r.mask_path = f[11];
        if (r.label != "original" && r.label != "spliced")
            throw LoadError("manifest row " + std::to_string(i) + " has a bad label: " + path);
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace splice::gen
