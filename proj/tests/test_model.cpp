#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "splice/errors.hpp"
#include "splice/model.hpp"

#include "test_util.hpp"

#include <cstring>
#include <fstream>

using namespace splice;
using testutil::random_image;
using testutil::scratch_dir;

namespace {

nn::Tensor rand_features(int n, uint64_t seed) {
    nn::Tensor t({n, 1, 16, 128});
    rng::Stream s(seed);
    for (auto& v : t.data) v = static_cast<float>(s.uniform(-2.0, 2.0));
    return t;
}

nn::Tensor rand_spatial(int n, uint64_t seed) {
    nn::Tensor t({n, 3, model::kSpatialSize, model::kSpatialSize});
    rng::Stream s(seed);
    for (auto& v : t.data) v = static_cast<float>(s.uniform(0.0, 1.0));
    return t;
}

} // namespace

TEST_CASE("parameter counts match the per-layer arithmetic") {
    model::ModelConfig cnn;
    cnn.branch = model::Branch::Cnn;
    cnn.adapter = model::Adapter::None;
    model::SpliceModel m_cnn(cnn);
    CHECK(m_cnn.compression_param_count() == 19424);
    CHECK(m_cnn.fusion_param_count() == 2370);
    CHECK(m_cnn.spatial_param_count() == 0);
    CHECK(m_cnn.param_count() == 19424 + 2370);

    model::ModelConfig inn = cnn;
    inn.branch = model::Branch::Inn;
    model::SpliceModel m_inn(inn);
    CHECK(m_inn.compression_param_count() == 6896);
    CHECK(m_inn.compression_param_count() < m_cnn.compression_param_count());

    model::ModelConfig tiny = cnn;
    tiny.adapter = model::Adapter::Tiny;
    model::SpliceModel m_tiny(tiny);
    CHECK(m_tiny.spatial_param_count() == 20192);

    model::ModelConfig emb = cnn;
    emb.adapter = model::Adapter::Embedding;
    emb.embedding_dim = 128;
    model::SpliceModel m_emb(emb);
    CHECK(m_emb.spatial_param_count() == 128 * 16 + 16);

    for (auto* m : {&m_cnn, &m_inn, &m_tiny, &m_emb}) CHECK(m->param_count() < 100000);
}

TEST_CASE("forward emits (N,2) logits and validates input shapes") {
    model::ModelConfig cfg;
    cfg.adapter = model::Adapter::Tiny;
    model::SpliceModel m(cfg);
    auto logits = m.forward(rand_spatial(3, 1), rand_features(3, 2), false);
    CHECK(logits.shape == std::vector<int>{3, 2});

    nn::Tensor bad({3, 1, 8, 128});
    CHECK_THROWS_AS(m.forward(rand_spatial(3, 1), bad, false), ShapeMismatch);
    CHECK_THROWS_AS(m.forward(rand_spatial(2, 1), rand_features(3, 2), false), ShapeMismatch);
}

TEST_CASE("the None adapter ignores spatial input entirely") {
    model::ModelConfig cfg;
    cfg.adapter = model::Adapter::None;
    model::SpliceModel m(cfg);
    auto f = rand_features(2, 5);
    auto a = m.forward(rand_spatial(2, 6), f, false);
    auto b = m.forward(rand_spatial(2, 7), f, false);
    CHECK(a.data == b.data);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    auto dir = scratch_dir("model_ckpt");
    for (auto branch : {model::Branch::Cnn, model::Branch::Inn}) {
        model::ModelConfig cfg;
        cfg.branch = branch;
        cfg.adapter = model::Adapter::Tiny;
        cfg.init_seed = 99;
        model::SpliceModel m(cfg);
        m.meta().seed = 99;
        m.meta().epochs = 12;
        m.meta().final_lr = 0.00025f;

        const std::string path = dir + "/m.splc";
        model::save(m, path);
        auto n = model::load(path);
        CHECK(n.config().branch == branch);
        CHECK(n.config().adapter == model::Adapter::Tiny);
        CHECK(n.meta().seed == 99);
        CHECK(n.meta().epochs == 12);
        CHECK(n.meta().final_lr == 0.00025f);

        for (uint64_t t = 0; t < 10; ++t) {
            auto sp = rand_spatial(2, 100 + t);
            auto ft = rand_features(2, 200 + t);
            auto a = m.forward(sp, ft, false);
            auto b = n.forward(sp, ft, false);
            CHECK(std::memcmp(a.ptr(), b.ptr(), sizeof(float) * a.numel()) == 0);
        }
    }
}

TEST_CASE("checkpoint loader rejects tampered files") {
    auto dir = scratch_dir("model_bad");
    model::ModelConfig cfg;
    model::SpliceModel m(cfg);
    const std::string path = dir + "/m.splc";
    model::save(m, path);

    auto bytes = testutil::read_bytes(path);

    SUBCASE("bad magic") {
        auto bad = bytes;
        bad[0] = 'X';
        std::ofstream(dir + "/bad.splc", std::ios::binary)
            .write(reinterpret_cast<char*>(bad.data()), static_cast<std::streamsize>(bad.size()));
        CHECK_THROWS_AS(model::load(dir + "/bad.splc"), LoadError);
    }
    SUBCASE("bad version") {
        auto bad = bytes;
        bad[4] = 0x7f;
        std::ofstream(dir + "/bad.splc", std::ios::binary)
            .write(reinterpret_cast<char*>(bad.data()), static_cast<std::streamsize>(bad.size()));
        CHECK_THROWS_AS(model::load(dir + "/bad.splc"), LoadError);
    }
    SUBCASE("truncated") {
        std::ofstream(dir + "/bad.splc", std::ios::binary)
            .write(reinterpret_cast<char*>(bytes.data()),
                   static_cast<std::streamsize>(bytes.size() / 2));
        CHECK_THROWS_AS(model::load(dir + "/bad.splc"), LoadError);
    }
    SUBCASE("trailing garbage") {
        auto bad = bytes;
        bad.push_back(0);
        std::ofstream(dir + "/bad.splc", std::ios::binary)
            .write(reinterpret_cast<char*>(bad.data()), static_cast<std::streamsize>(bad.size()));
        CHECK_THROWS_AS(model::load(dir + "/bad.splc"), LoadError);
    }
}

TEST_CASE("embedding sidecars round-trip and reject duplicates") {
    auto dir = scratch_dir("model_emb");
    model::EmbeddingStore store;
    store.dim = 4;
    store.by_path["a.jpg"] = {1, 2, 3, 4};
    store.by_path["b.jpg"] = {-1, 0, 1, 2};
    const std::string path = dir + "/e.embd";
    model::save_embeddings(path, store);
    auto loaded = model::load_embeddings(path);
    CHECK(loaded.dim == 4);
    CHECK(loaded.by_path == store.by_path);

    // handcrafted duplicate record
    std::vector<uint8_t> raw = {'E', 'M', 'B', 'D', 1, 0, 0, 0};
    auto put_rec = [&raw]() {
        const char* key = "dup";
        uint32_t len = 3;
        for (int i = 0; i < 4; ++i) raw.push_back(static_cast<uint8_t>(len >> (8 * i)));
        raw.insert(raw.end(), key, key + 3);
        float f = 1.0f;
        uint8_t fb[4];
        std::memcpy(fb, &f, 4);
        raw.insert(raw.end(), fb, fb + 4);
    };
    put_rec();
    put_rec();
    std::ofstream(dir + "/dup.embd", std::ios::binary)
        .write(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    CHECK_THROWS_AS(model::load_embeddings(dir + "/dup.embd"), LoadError);
}

TEST_CASE("predict runs the full pipeline per adapter") {
    auto img = random_image(96, 80, 3, 4242);
    auto bytes = jpeg::encode(img, 75);

    SUBCASE("tiny adapter decodes pixels itself") {
        model::ModelConfig cfg;
        cfg.adapter = model::Adapter::Tiny;
        model::SpliceModel m(cfg);
        auto p = model::predict(m, {bytes.data(), bytes.size()});
        CHECK((p.label == 0 || p.label == 1));
        CHECK(p.p_spliced >= 0.0);
        CHECK(p.p_spliced <= 1.0);
        CHECK((p.label == 1) == (p.p_spliced > 0.5));
    }
    SUBCASE("embedding adapter needs its sidecar") {
        model::ModelConfig cfg;
        cfg.adapter = model::Adapter::Embedding;
        cfg.embedding_dim = 8;
        model::SpliceModel m(cfg);
        CHECK_THROWS_AS(model::predict(m, {bytes.data(), bytes.size()}), MissingEmbedding);

        model::EmbeddingStore store;
        store.dim = 8;
        store.by_path["x.jpg"] = std::vector<float>(8, 0.25f);
        auto p = model::predict(m, {bytes.data(), bytes.size()}, &store, "x.jpg");
        CHECK(p.p_spliced >= 0.0);
        CHECK(p.p_spliced <= 1.0);
        CHECK_THROWS_AS(model::predict(m, {bytes.data(), bytes.size()}, &store, "y.jpg"),
                        MissingEmbedding);

        model::EmbeddingStore wrong;
        wrong.dim = 4;
        wrong.by_path["x.jpg"] = std::vector<float>(4, 0.25f);
        CHECK_THROWS_AS(model::predict(m, {bytes.data(), bytes.size()}, &wrong, "x.jpg"),
                        ShapeMismatch);
    }
}

TEST_CASE("identical configs and seeds construct identical models") {
    model::ModelConfig cfg;
    cfg.branch = model::Branch::Inn;
    cfg.adapter = model::Adapter::Tiny;
    cfg.init_seed = 31337;
    model::SpliceModel a(cfg), b(cfg);
    auto pa = a.params(), pb = b.params();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i]->name == pb[i]->name);
        CHECK(pa[i]->value.data == pb[i]->value.data);
    }
}
