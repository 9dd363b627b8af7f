#include "splice/model.hpp"

#include "splice/errors.hpp"
#include "splice/features.hpp"
#include "splice/jpeg.hpp"

#include <array>
#include <cstring>

// Checkpoint container ("SPLC"): header describing the architecture and the
// feature contract, training metadata, then every parameter and batch-norm
// buffer as little-endian float32 blobs in declared order. A load must
// reproduce forward outputs bit-exactly.

namespace splice::model {
namespace {

constexpr uint32_t kCheckpointVersion = 1;
constexpr std::array<uint32_t, 4> kPlan{8, 16, 32, 32};

// Fingerprint of the feature definition; a checkpoint trained against a
// different histogram layout must refuse to load.
uint32_t feature_spec_hash() {
    std::string s = "ac-zigzag:1.." + std::to_string(feat::kNumCoeffs) +
                    ";bins:" + std::to_string(feat::kNumBins) +
                    ";range:[-63,64];oob:clamp;standardize:per-sample";
    uint32_t h = 2166136261u;
    for (unsigned char c : s) {
        h ^= c;
        h *= 16777619u;
    }
    return h;
}

struct Writer {
    std::vector<uint8_t> out;

    void u8(uint8_t v) { out.push_back(v); }
    void u32(uint32_t v) {
        out.push_back(static_cast<uint8_t>(v & 0xff));
        out.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
        out.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
        out.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
    }
    void f32(float f) {
        uint32_t v;
        std::memcpy(&v, &f, 4);
        u32(v);
    }
    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        out.insert(out.end(), s.begin(), s.end());
    }
    void tensor(const nn::Tensor& t) {
        u32(static_cast<uint32_t>(t.ndim()));
        for (int d : t.shape) u32(static_cast<uint32_t>(d));
        for (float f : t.data) f32(f);
    }
};

struct Reader {
    const std::vector<uint8_t>& bytes;
    const std::string& path;
    size_t pos = 0;

    uint8_t u8() {
        if (pos >= bytes.size()) throw LoadError("truncated file: " + path);
        return bytes[pos++];
    }
    uint32_t u32() {
        if (pos + 4 > bytes.size()) throw LoadError("truncated file: " + path);
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
    std::string str() {
        uint32_t len = u32();
        if (pos + len > bytes.size()) throw LoadError("truncated file: " + path);
        std::string s(bytes.begin() + static_cast<long>(pos),
                      bytes.begin() + static_cast<long>(pos + len));
        pos += len;
        return s;
    }
    void expect_magic(const char* magic, const char* what) {
        if (bytes.size() < 4 || std::memcmp(bytes.data(), magic, 4) != 0)
            throw LoadError(std::string(what) + " has wrong magic: " + path);
        pos = 4;
    }
    bool at_end() const { return pos == bytes.size(); }
};

void read_into_tensor(Reader& r, nn::Tensor& t, const std::string& name) {
    uint32_t ndim = r.u32();
    if (ndim != static_cast<uint32_t>(t.ndim()))
        throw LoadError("checkpoint shape mismatch for " + name + ": " + r.path);
    for (int i = 0; i < t.ndim(); ++i)
        if (r.u32() != static_cast<uint32_t>(t.dim(i)))
            throw LoadError("checkpoint shape mismatch for " + name + ": " + r.path);
    for (auto& v : t.data) v = r.f32();
}

} // namespace

void save(SpliceModel& m, const std::string& path) {
    Writer w;
    w.out.insert(w.out.end(), {'S', 'P', 'L', 'C'});
    w.u32(kCheckpointVersion);

    w.u8(static_cast<uint8_t>(m.config().branch));
    w.u8(static_cast<uint8_t>(m.config().adapter));
    w.u32(static_cast<uint32_t>(m.config().embedding_dim));
    w.u32(static_cast<uint32_t>(kPlan.size()));
    for (uint32_t c : kPlan) w.u32(c);
    w.u32(feature_spec_hash());

    w.u32(m.meta().seed);
    w.u32(m.meta().epochs);
    w.f32(m.meta().final_lr);

    auto params = m.params();
    w.u32(static_cast<uint32_t>(params.size()));
    for (auto* p : params) {
        w.str(p->name);
        w.tensor(p->value);
    }
    auto buffers = m.buffers();
    w.u32(static_cast<uint32_t>(buffers.size()));
    for (auto& [name, t] : buffers) {
        w.str(name);
        w.tensor(*t);
    }

    jpeg::write_file(path, {w.out.data(), w.out.size()});
}

SpliceModel load(const std::string& path) {
    auto bytes = jpeg::read_file(path);
    Reader r{bytes, path};
    r.expect_magic("SPLC", "checkpoint");

    if (r.u32() != kCheckpointVersion)
        throw LoadError("checkpoint has unsupported version: " + path);

    uint8_t branch = r.u8();
    uint8_t adapter = r.u8();
    if (branch > 1 || adapter > 2)
        throw LoadError("checkpoint has invalid configuration: " + path);
    uint32_t embedding_dim = r.u32();

    uint32_t nplan = r.u32();
    if (nplan != kPlan.size())
        throw LoadError("checkpoint has unexpected channel plan: " + path);
    for (uint32_t c : kPlan)
        if (r.u32() != c)
            throw LoadError("checkpoint has unexpected channel plan: " + path);
    if (r.u32() != feature_spec_hash())
        throw LoadError("checkpoint was built against a different feature spec: " + path);

    TrainMeta meta;
    meta.seed = r.u32();
    meta.epochs = r.u32();
    meta.final_lr = r.f32();

    ModelConfig cfg;
    cfg.branch = static_cast<Branch>(branch);
    cfg.adapter = static_cast<Adapter>(adapter);
    cfg.embedding_dim = static_cast<int>(embedding_dim);
    cfg.init_seed = meta.seed;
    SpliceModel m(cfg);
    m.meta() = meta;

    auto params = m.params();
    if (r.u32() != params.size())
        throw LoadError("checkpoint parameter list mismatch: " + path);
    for (auto* p : params) {
        if (r.str() != p->name)
            throw LoadError("checkpoint parameter order mismatch: " + path);
        read_into_tensor(r, p->value, p->name);
    }
    auto buffers = m.buffers();
    if (r.u32() != buffers.size())
        throw LoadError("checkpoint buffer list mismatch: " + path);
    for (auto& [name, t] : buffers) {
        if (r.str() != name)
            throw LoadError("checkpoint buffer order mismatch: " + path);
        read_into_tensor(r, *t, name);
    }
    if (!r.at_end()) throw LoadError("checkpoint has trailing bytes: " + path);
    return m;
}

EmbeddingStore load_embeddings(const std::string& path) {
    auto bytes = jpeg::read_file(path);
    Reader r{bytes, path};
    r.expect_magic("EMBD", "embedding sidecar");

    EmbeddingStore store;
    store.dim = r.u32();
    if (store.dim < 1) throw LoadError("embedding sidecar has zero dim: " + path);
    while (!r.at_end()) {
        std::string key = r.str();
        std::vector<float> v(store.dim);
        for (auto& f : v) f = r.f32();
        if (!store.by_path.emplace(std::move(key), std::move(v)).second)
            throw LoadError("embedding sidecar has a duplicate path: " + path);
    }
    return store;
}

void save_embeddings(const std::string& path, const EmbeddingStore& store) {
    if (store.dim < 1) throw ConfigError("save_embeddings: dim must be >= 1");
    Writer w;
    w.out.insert(w.out.end(), {'E', 'M', 'B', 'D'});
    w.u32(store.dim);
    for (const auto& [key, v] : store.by_path) {
        if (v.size() != store.dim)
            throw ShapeMismatch("save_embeddings: record dim mismatch for \"" + key + "\"");
        w.str(key);
        for (float f : v) w.f32(f);
    }
    jpeg::write_file(path, {w.out.data(), w.out.size()});
}

} // namespace splice::model
