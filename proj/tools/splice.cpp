// Command-line front end: inspect | features | gen | train | eval | predict | roc.
// Exit codes: 0 success, 1 usage, 2 input I/O, 3 unsupported format,
// 4 internal invariant violation.

#include "splice/errors.hpp"
#include "splice/features.hpp"
#include "splice/gen.hpp"
#include "splice/harness.hpp"
#include "splice/imageops.hpp"
#include "splice/jpeg.hpp"
#include "splice/model.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace splice;

struct GlobalOpts {
    uint32_t seed = 0;
    bool as_json = false;
    bool verbose = false;
};

void note(const GlobalOpts& g, const std::string& msg) {
    if (g.verbose) std::fprintf(stderr, "%s\n", msg.c_str());
}

// Adapter flag: "tiny", "none", or "embed:<sidecar-path>".
struct AdapterChoice {
    model::Adapter adapter = model::Adapter::Tiny;
    std::string sidecar;
};

AdapterChoice parse_adapter(const std::string& s) {
    AdapterChoice c;
    if (s == "tiny") {
        c.adapter = model::Adapter::Tiny;
    } else if (s == "none") {
        c.adapter = model::Adapter::None;
    } else if (s.rfind("embed:", 0) == 0 && s.size() > 6) {
        c.adapter = model::Adapter::Embedding;
        c.sidecar = s.substr(6);
    } else {
        throw CLI::ValidationError("--spatial", "expected tiny, none, or embed:<file>");
    }
    return c;
}

std::string sampling_name(const jpeg::CoefficientImage& ci) {
    if (ci.components.size() == 1) return "grayscale";
    bool all_11 = true, is_420 = ci.components.size() == 3;
    for (size_t i = 0; i < ci.components.size(); ++i) {
        const auto& c = ci.components[i];
        if (c.h_sampling != 1 || c.v_sampling != 1) all_11 = false;
        if (i == 0 ? (c.h_sampling != 2 || c.v_sampling != 2)
                   : (c.h_sampling != 1 || c.v_sampling != 1))
            is_420 = false;
    }
    if (is_420) return "4:2:0";
    if (all_11 && ci.components.size() == 3) return "4:4:4";
    std::string s;
    for (const auto& c : ci.components) {
        if (!s.empty()) s += ',';
        s += std::to_string(c.h_sampling) + "x" + std::to_string(c.v_sampling);
    }
    return s;
}

std::vector<int> nonzero_bins(const feat::Histogram& h) {
    std::vector<int> out(feat::kNumCoeffs);
    for (int r = 0; r < feat::kNumCoeffs; ++r) {
        int nz = 0;
        for (int b = 0; b < feat::kNumBins; ++b) nz += h.at(r, b) != 0;
        out[static_cast<size_t>(r)] = nz;
    }
    return out;
}

int cmd_inspect(const GlobalOpts& g, const std::string& file) {
    auto bytes = jpeg::read_file(file);
    auto ci = jpeg::parse_coefficients(bytes);
    auto hist = feat::ac_histograms(ci);
    auto nz = nonzero_bins(hist);

    if (g.as_json) {
        json j;
        j["file"] = file;
        j["width"] = ci.width;
        j["height"] = ci.height;
        j["sampling"] = sampling_name(ci);
        j["luma_blocks"] = hist.block_count;
        j["restart_interval"] = ci.restart_interval;
        auto comps = json::array();
        for (const auto& c : ci.components)
            comps.push_back({{"id", c.component_id},
                             {"h", c.h_sampling},
                             {"v", c.v_sampling},
                             {"quant_table", c.quant_table_id}});
        j["components"] = std::move(comps);
        json qt;
        for (size_t t = 0; t < ci.quant_tables.size(); ++t)
            if (ci.quant_tables[t])
                qt[std::to_string(t)] = ci.quant_tables[t]->entries;
        j["quant_tables"] = std::move(qt);
        j["nonzero_bins"] = nz;
        std::printf("%s\n", j.dump(2).c_str());
        return 0;
    }

    std::printf("file: %s\n", file.c_str());
    std::printf("dimensions: %dx%d\n", ci.width, ci.height);
    std::printf("sampling: %s\n", sampling_name(ci).c_str());
    std::printf("luma blocks: %u\n", hist.block_count);
    if (ci.restart_interval) std::printf("restart interval: %d\n", ci.restart_interval);
    for (size_t t = 0; t < ci.quant_tables.size(); ++t) {
        if (!ci.quant_tables[t]) continue;
        std::printf("quant table %zu:\n", t);
        for (int row = 0; row < 8; ++row) {
            std::printf(" ");
            for (int col = 0; col < 8; ++col)
                std::printf(" %3u", ci.quant_tables[t]->entries[static_cast<size_t>(row * 8 + col)]);
            std::printf("\n");
        }
    }
    std::printf("nonzero bins per AC row (1..16):");
    for (int v : nz) std::printf(" %d", v);
    std::printf("\n");
    return 0;
}

int cmd_features(const GlobalOpts& g, const std::vector<std::string>& files,
                 const std::string& manifest, const std::string& out) {
    std::vector<feat::Sample> samples;
    size_t attempted = 0;

    auto add = [&](const std::string& path, const std::string& disk_path, uint8_t label) {
        ++attempted;
        try {
            auto bytes = jpeg::read_file(disk_path);
            feat::Sample s;
            s.label = label;
            s.features = feat::extract_features({bytes.data(), bytes.size()});
            s.path = path;
            samples.push_back(std::move(s));
        } catch (const Error& e) {
            std::fprintf(stderr, "warning: skipping %s: %s\n", disk_path.c_str(), e.what());
        }
    };

    for (const auto& f : files) add(f, f, 0);
    if (!manifest.empty()) {
        fs::path base = fs::path(manifest).parent_path();
        for (const auto& r : gen::load_manifest(manifest))
            add(r.name, (base / r.name).string(), r.label == "spliced" ? 1 : 0);
    }

    if (attempted == 0) {
        std::fprintf(stderr, "error: no inputs; pass files or --manifest\n");
        return 1;
    }
    if (samples.empty()) {
        std::fprintf(stderr, "error: every input failed\n");
        return 2;
    }
    feat::save_cache(out, samples);
    note(g, "wrote " + std::to_string(samples.size()) + " samples to " + out);
    std::printf("%zu/%zu samples -> %s\n", samples.size(), attempted, out.c_str());
    return 0;
}

int cmd_gen(const GlobalOpts& g, int count, int size, const std::string& corpus,
            const std::string& out) {
    gen::DatasetOptions opt;
    opt.count = count;
    opt.seed = g.seed;
    opt.image_size = size;
    opt.corpus_dir = corpus;
    opt.out_dir = out;
    auto rows = gen::gen_dataset(opt);
    note(g, "dataset written to " + out);
    if (g.as_json) {
        json j;
        j["manifest"] = (fs::path(out) / "manifest.csv").string();
        j["rows"] = rows.size();
        std::printf("%s\n", j.dump(2).c_str());
    } else {
        std::printf("wrote %zu rows to %s\n", rows.size(),
                    (fs::path(out) / "manifest.csv").string().c_str());
    }
    return 0;
}

std::optional<model::EmbeddingStore> maybe_embeddings(const std::string& sidecar) {
    if (sidecar.empty()) return std::nullopt;
    return model::load_embeddings(sidecar);
}

int cmd_train(const GlobalOpts& g, const std::string& manifest, const std::string& branch,
              const std::string& spatial, int epochs, int batch, double lr,
              double lr_decay, int lr_step, int folds, bool no_augment,
              const std::string& history_path, const std::string& out) {
    AdapterChoice ad = parse_adapter(spatial);
    auto embeddings = maybe_embeddings(ad.sidecar);

    harness::TrainConfig tc;
    tc.epochs = epochs;
    tc.batch_size = batch;
    tc.initial_lr = lr;
    tc.lr_decay_factor = lr_decay;
    tc.lr_step_epochs = lr_step;
    tc.seed = g.seed;
    tc.branch = branch == "inn" ? model::Branch::Inn : model::Branch::Cnn;
    tc.adapter = ad.adapter;
    tc.embedding_dim = embeddings ? static_cast<int>(embeddings->dim) : 0;
    tc.augmentation = !no_augment;

    note(g, "loading " + manifest);
    auto data = harness::load_dataset(manifest, tc.adapter == model::Adapter::Tiny);
    harness::SplitSpec ss;
    ss.folds = folds;
    auto sp = harness::split(data.labels, ss, g.seed);

    const model::EmbeddingStore* emb = embeddings ? &*embeddings : nullptr;
    std::optional<harness::TrainResult> best;
    int best_fold = -1;
    std::vector<std::pair<int, double>> fold_acc;
    for (int f = 0; f < folds; ++f) {
        std::vector<int> tr, va = sp.folds[static_cast<size_t>(f)];
        for (int k = 0; k < folds; ++k)
            if (k != f)
                tr.insert(tr.end(), sp.folds[static_cast<size_t>(k)].begin(),
                          sp.folds[static_cast<size_t>(k)].end());
        auto res = harness::train(tc, data, tr, va, emb);
        note(g, "fold " + std::to_string(f) +
                    " val_acc=" + std::to_string(res.best_val_acc));
        fold_acc.emplace_back(f, res.best_val_acc);
        if (!best || res.best_val_acc > best->best_val_acc) {
            best_fold = f;
            best = std::move(res);
        }
    }

    model::save(best->model, out);
    if (!history_path.empty()) harness::write_history_csv(history_path, best->history);
    auto test_report = harness::evaluate(best->model, data, sp.test, emb);

    double mean = 0;
    for (auto& [f, a] : fold_acc) mean += a;
    mean /= static_cast<double>(fold_acc.size());

    if (g.as_json) {
        json j;
        auto jf = json::array();
        for (auto& [f, a] : fold_acc) jf.push_back({{"fold", f}, {"val_acc", a}});
        j["folds"] = std::move(jf);
        j["mean_val_acc"] = mean;
        j["best_fold"] = best_fold;
        j["best_epoch"] = best->best_epoch;
        j["test"] = json::parse(harness::to_json(test_report));
        j["checkpoint"] = out;
        std::printf("%s\n", j.dump(2).c_str());
    } else {
        for (auto& [f, a] : fold_acc) std::printf("fold %d val_acc %.4f\n", f, a);
        std::printf("mean val_acc %.4f (best fold %d, epoch %d)\n", mean, best_fold,
                    best->best_epoch);
        std::printf("test acc %.4f auc %.4f\n", test_report.acc, test_report.auc);
        std::printf("checkpoint -> %s\n", out.c_str());
    }
    return 0;
}

int cmd_eval(const GlobalOpts& g, const std::string& model_path, const std::string& manifest,
             const std::string& roc_path, const std::string& sidecar) {
    auto m = model::load(model_path);
    auto embeddings = maybe_embeddings(sidecar);
    if (m.config().adapter == model::Adapter::Embedding && !embeddings)
        throw MissingEmbedding("eval: model needs --embed <sidecar>");
    auto data = harness::load_dataset(manifest, m.config().adapter == model::Adapter::Tiny);
    std::vector<int> idx(data.labels.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    auto rep = harness::evaluate(m, data, idx, embeddings ? &*embeddings : nullptr);
    if (!roc_path.empty()) harness::write_roc_csv(roc_path, rep.roc);
    if (g.as_json) {
        std::printf("%s\n", harness::to_json(rep).c_str());
    } else {
        std::printf("n %zu\n", data.labels.size());
        std::printf("tp %lld tn %lld fp %lld fn %lld\n", static_cast<long long>(rep.tp),
                    static_cast<long long>(rep.tn), static_cast<long long>(rep.fp),
                    static_cast<long long>(rep.fn));
        std::printf("acc %.4f precision %.4f recall %.4f f1 %.4f mcc %.4f auc %.4f%s\n",
                    rep.acc, rep.precision, rep.recall, rep.f1, rep.mcc, rep.auc,
                    rep.degenerate ? " (degenerate)" : "");
    }
    return 0;
}

int cmd_predict(const GlobalOpts& g, const std::string& model_path, const std::string& file,
                const std::string& sidecar) {
    auto m = model::load(model_path);
    auto embeddings = maybe_embeddings(sidecar);
    auto bytes = jpeg::read_file(file);
    auto pred = model::predict(m, {bytes.data(), bytes.size()},
                               embeddings ? &*embeddings : nullptr, file);
    if (g.as_json) {
        json j;
        j["file"] = file;
        j["label"] = pred.label == 1 ? "spliced" : "original";
        j["p_spliced"] = pred.p_spliced;
        std::printf("%s\n", j.dump(2).c_str());
    } else {
        std::printf("%s p_spliced=%.4f %s\n", file.c_str(), pred.p_spliced,
                    pred.label == 1 ? "spliced" : "original");
    }
    return 0;
}

int cmd_roc(const GlobalOpts& g, const std::string& model_path, const std::string& manifest,
            const std::string& out, const std::string& sidecar) {
    auto m = model::load(model_path);
    auto embeddings = maybe_embeddings(sidecar);
    if (m.config().adapter == model::Adapter::Embedding && !embeddings)
        throw MissingEmbedding("roc: model needs --embed <sidecar>");
    auto data = harness::load_dataset(manifest, m.config().adapter == model::Adapter::Tiny);
    std::vector<int> idx(data.labels.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    auto rep = harness::evaluate(m, data, idx, embeddings ? &*embeddings : nullptr);
    harness::write_roc_csv(out, rep.roc);
    note(g, "roc -> " + out);
    std::printf("auc %.4f -> %s\n", rep.auc, out.c_str());
    return 0;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"JPEG splice-forensics toolkit"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--seed", g.seed, "seed for every random draw");
    app.add_flag("--json", g.as_json, "machine-readable output");
    app.add_flag("--verbose", g.verbose, "extra progress output on stderr");

    auto* c_inspect = app.add_subcommand("inspect", "coefficient-level report of a JPEG");
    std::string in_file;
    c_inspect->add_option("file", in_file, "baseline JPEG")->required();

    auto* c_feat = app.add_subcommand("features", "write a DCTF feature cache");
    std::vector<std::string> feat_files;
    std::string feat_manifest, feat_out;
    c_feat->add_option("files", feat_files, "JPEG files (label 0)");
    c_feat->add_option("--manifest", feat_manifest, "dataset manifest (labels included)");
    c_feat->add_option("--out", feat_out, "output cache path")->required();

    auto* c_gen = app.add_subcommand("gen", "generate an original/spliced dataset");
    int gen_count = 0, gen_size = 256;
    std::string gen_corpus_dir, gen_out;
    bool gen_procedural = false;
    c_gen->add_option("--count", gen_count, "pairs to generate")
        ->required()
        ->check(CLI::PositiveNumber);
    c_gen->add_option("--size", gen_size, "procedural image size")->check(CLI::Range(64, 4096));
    c_gen->add_flag("--procedural", gen_procedural, "use the procedural corpus");
    c_gen->add_option("--corpus", gen_corpus_dir, "directory of source images");
    c_gen->add_option("--out", gen_out, "output directory")->required();

    auto* c_train = app.add_subcommand("train", "train a detector from a manifest");
    std::string tr_manifest, tr_branch = "cnn", tr_spatial = "tiny", tr_history, tr_out;
    int tr_epochs = 30, tr_batch = 256, tr_step = 2, tr_folds = 5;
    double tr_lr = 0.001, tr_decay = 0.5;
    bool tr_no_augment = false;
    c_train->add_option("--manifest", tr_manifest, "dataset manifest")->required();
    c_train->add_option("--branch", tr_branch, "compression branch: cnn|inn")
        ->check(CLI::IsMember({"cnn", "inn"}));
    c_train->add_option("--spatial", tr_spatial, "spatial adapter: tiny|none|embed:<file>");
    c_train->add_option("--epochs", tr_epochs, "training epochs")->check(CLI::PositiveNumber);
    c_train->add_option("--batch", tr_batch, "batch size")->check(CLI::PositiveNumber);
    c_train->add_option("--lr", tr_lr, "initial learning rate");
    c_train->add_option("--lr-decay", tr_decay, "step decay factor");
    c_train->add_option("--lr-step", tr_step, "epochs per decay step")
        ->check(CLI::PositiveNumber);
    c_train->add_option("--folds", tr_folds, "cross-validation folds")->check(CLI::Range(2, 20));
    c_train->add_flag("--no-augment", tr_no_augment, "disable spatial augmentation");
    c_train->add_option("--history", tr_history, "per-epoch history CSV (best fold)");
    c_train->add_option("--out", tr_out, "checkpoint path")->required();

    auto* c_eval = app.add_subcommand("eval", "metrics report over a manifest");
    std::string ev_model, ev_manifest, ev_roc, ev_embed;
    c_eval->add_option("--model", ev_model, "checkpoint")->required();
    c_eval->add_option("--manifest", ev_manifest, "dataset manifest")->required();
    c_eval->add_option("--roc", ev_roc, "also write the ROC sweep CSV");
    c_eval->add_option("--embed", ev_embed, "embedding sidecar");

    auto* c_pred = app.add_subcommand("predict", "classify one JPEG");
    std::string pr_model, pr_file, pr_embed;
    c_pred->add_option("--model", pr_model, "checkpoint")->required();
    c_pred->add_option("file", pr_file, "baseline JPEG")->required();
    c_pred->add_option("--embed", pr_embed, "embedding sidecar");

    auto* c_roc = app.add_subcommand("roc", "write the ROC sweep for a manifest");
    std::string rc_model, rc_manifest, rc_out, rc_embed;
    c_roc->add_option("--model", rc_model, "checkpoint")->required();
    c_roc->add_option("--manifest", rc_manifest, "dataset manifest")->required();
    c_roc->add_option("--out", rc_out, "output CSV")->required();
    c_roc->add_option("--embed", rc_embed, "embedding sidecar");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    std::fprintf(stderr, "seed: %u\n", g.seed);

    if (*c_inspect) return cmd_inspect(g, in_file);
    if (*c_feat) return cmd_features(g, feat_files, feat_manifest, feat_out);
    if (*c_gen) {
        if (gen_procedural && !gen_corpus_dir.empty()) {
            std::fprintf(stderr, "error: --procedural and --corpus are exclusive\n");
            return 1;
        }
        return cmd_gen(g, gen_count, gen_size, gen_corpus_dir, gen_out);
    }
    if (*c_train)
        return cmd_train(g, tr_manifest, tr_branch, tr_spatial, tr_epochs, tr_batch, tr_lr,
                         tr_decay, tr_step, tr_folds, tr_no_augment, tr_history, tr_out);
    if (*c_eval) return cmd_eval(g, ev_model, ev_manifest, ev_roc, ev_embed);
    if (*c_pred) return cmd_predict(g, pr_model, pr_file, pr_embed);
    if (*c_roc) return cmd_roc(g, rc_model, rc_manifest, rc_out, rc_embed);
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const UnsupportedFormat& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const RangeError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const CorruptStream& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const LoadError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const InsufficientCorpus& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const MissingEmbedding& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const TooSmall& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 4;
    }
}
