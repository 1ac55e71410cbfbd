// Command-line front end for the pipeline: dataset generation, graph
// construction, training, evaluation, visualization, gradient checking.
// Exit codes: 0 success, 2 usage, 3 I/O or file format, 4 numeric failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "kerl/checkpoint.hpp"
#include "kerl/data.hpp"
#include "kerl/error.hpp"
#include "kerl/graph.hpp"
#include "kerl/image_io.hpp"
#include "kerl/kernels.hpp"
#include "kerl/model.hpp"
#include "kerl/regions.hpp"
#include "kerl/trainer.hpp"

namespace fs = std::filesystem;
using namespace kerl;

namespace {

std::string resolve_data(std::string dir) {
    if (dir.empty()) {
        const char* env = std::getenv("KERL_DATA_ROOT");
        if (env && *env) dir = env;
    }
    if (dir.empty())
        throw std::invalid_argument("no --data given and KERL_DATA_ROOT is unset");
    if (!fs::exists(dir)) throw IoError("data root does not exist: " + dir);
    return dir;
}

data::Dataset load_dataset(const std::string& dir, const std::string& format) {
    if (format == "synth") return data::load_synthetic(dir);
    if (format == "cub") return data::load_cub(dir, data::CubMode::image);
    if (format == "cub-bbox") return data::load_cub(dir, data::CubMode::bbox);
    // auto: the synthetic layout always carries meta.txt at its root
    if (fs::exists(fs::path(dir) / "meta.txt")) return data::load_synthetic(dir);
    return data::load_cub(dir, data::CubMode::image);
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

const std::vector<data::Sample>& pick_split(const data::Dataset& ds, const std::string& split) {
    if (split == "train") return ds.train;
    if (split == "test") return ds.test;
    throw std::invalid_argument("unknown split: " + split);
}

// ---- shared training options ---------------------------------------------------

struct TrainOpts {
    std::string data, format = "auto";
    std::string variant = "kerl";
    std::string config_file, graph_file, pretrained, scores_in;
    std::string out, metrics_out, scores_out;
    // trainer
    int epochs = 30, batch = 16, eval_every = 0, region_epochs = 0;
    double clip_norm = 5.0;
    double gate_l1 = 0.0;
    double gate_lr_scale = 1.0;
    std::uint64_t seed = 1;
    double lr = 1e-2, momentum = 0.9, weight_decay = 0.0;
    double adam_lr = 1e-3, adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
    // model
    int image = 64, backbone_d = 64;
    std::size_t cbp_c = 512, gate_hidden = 0, ggnn_n = 10, ggnn_out = 5, t_steps = 5;
    std::uint64_t sketch_seed = 24601;
    bool scalar_gate = false, cbp_normalize = false;
    int region_size = 3, region_count = 3, region_crop = 24;
    double region_iou = 0.5;
};

void add_train_flags(CLI::App* sc, TrainOpts& o, bool with_variant) {
    sc->add_option("--data", o.data, "dataset root (default: $KERL_DATA_ROOT)");
    sc->add_option("--format", o.format, "dataset layout")
        ->check(CLI::IsMember({"auto", "synth", "cub", "cub-bbox"}));
    if (with_variant)
        sc->add_option("--variant", o.variant, "model variant")
            ->check(CLI::IsMember({"baseline", "self_guided", "concat", "kerl"}));
    sc->add_option("--config", o.config_file, "JSON training config; explicit flags override");
    sc->add_option("--out", o.out, "checkpoint output path");
    sc->add_option("--metrics", o.metrics_out, "per-epoch metrics CSV output path");
    sc->add_option("--epochs", o.epochs, "training epochs");
    sc->add_option("--batch", o.batch, "batch size");
    sc->add_option("--seed", o.seed, "training seed");
    sc->add_option("--eval-every", o.eval_every, "test evaluation cadence (epochs, 0 = never)");
    sc->add_option("--region-epochs", o.region_epochs, "region-head fitting epochs (0 = skip)");
    sc->add_option("--clip-norm", o.clip_norm, "global gradient-norm clip (0 = off)");
    sc->add_option("--gate-l1", o.gate_l1, "gate-activity penalty weight (0 = off)");
    sc->add_option("--gate-lr-scale", o.gate_lr_scale, "lr multiplier for the gate network");
    sc->add_option("--lr", o.lr, "SGD learning rate");
    sc->add_option("--momentum", o.momentum, "SGD momentum");
    sc->add_option("--weight-decay", o.weight_decay, "SGD weight decay");
    sc->add_option("--adam-lr", o.adam_lr, "Adam learning rate (graph network)");
    sc->add_option("--adam-beta1", o.adam_beta1, "Adam beta1");
    sc->add_option("--adam-beta2", o.adam_beta2, "Adam beta2");
    sc->add_option("--adam-eps", o.adam_eps, "Adam epsilon");
    sc->add_option("--image", o.image, "input image side");
    sc->add_option("--backbone-d", o.backbone_d, "backbone output channels");
    sc->add_option("--cbp-c", o.cbp_c, "compact bilinear sketch dimension");
    sc->add_option("--sketch-seed", o.sketch_seed, "sketch table seed");
    sc->add_option("--gate-hidden", o.gate_hidden, "gate hidden width (0 = max(64, c/2))");
    sc->add_flag("--scalar-gate", o.scalar_gate, "one gate value per location");
    sc->add_flag("--cbp-normalize", o.cbp_normalize,
                 "signed-sqrt + l2 per location on the sketched features");
    sc->add_option("--ggnn-n", o.ggnn_n, "graph network state dimension");
    sc->add_option("--ggnn-out-dim", o.ggnn_out, "graph network per-node output dimension");
    sc->add_option("--t-steps", o.t_steps, "graph propagation steps");
    sc->add_option("--region-size", o.region_size, "NMS box side in feature cells");
    sc->add_option("--region-count", o.region_count, "regions kept per image");
    sc->add_option("--region-iou", o.region_iou, "NMS IoU threshold");
    sc->add_option("--region-crop", o.region_crop, "region crop side in pixels");
}

trainer::TrainConfig build_config(CLI::App* sc, const TrainOpts& o, fusion::Variant v) {
    trainer::TrainConfig tc;
    if (!o.config_file.empty()) tc = trainer::TrainConfig::from_json(slurp(o.config_file));
    auto set = [&](const char* flag) { return sc->count(flag) > 0; };
    if (set("--epochs")) tc.epochs = o.epochs;
    if (set("--batch")) tc.batch = o.batch;
    if (set("--seed")) tc.seed = o.seed;
    if (set("--eval-every")) tc.eval_every = o.eval_every;
    if (set("--region-epochs")) tc.region_epochs = o.region_epochs;
    if (set("--clip-norm")) tc.clip_norm = o.clip_norm;
    if (set("--gate-l1")) tc.gate_l1 = o.gate_l1;
    if (set("--gate-lr-scale")) tc.sgd.gate_lr_scale = o.gate_lr_scale;
    if (set("--lr")) tc.sgd.lr = o.lr;
    if (set("--momentum")) tc.sgd.momentum = o.momentum;
    if (set("--weight-decay")) tc.sgd.weight_decay = o.weight_decay;
    if (set("--adam-lr")) tc.adam.lr = o.adam_lr;
    if (set("--adam-beta1")) tc.adam.beta1 = o.adam_beta1;
    if (set("--adam-beta2")) tc.adam.beta2 = o.adam_beta2;
    if (set("--adam-eps")) tc.adam.eps = o.adam_eps;
    if (set("--image")) tc.model.image = o.image;
    if (set("--backbone-d")) tc.model.backbone = backbone::BackboneConfig::desk(3, o.backbone_d);
    if (set("--cbp-c")) tc.model.cbp_c = o.cbp_c;
    if (set("--sketch-seed")) tc.model.sketch_seed = o.sketch_seed;
    if (set("--gate-hidden")) tc.model.gate_hidden = o.gate_hidden;
    if (set("--scalar-gate")) tc.model.scalar_gate = o.scalar_gate;
    if (set("--cbp-normalize")) tc.model.cbp_normalize = o.cbp_normalize;
    if (set("--ggnn-n")) tc.model.ggnn.n = o.ggnn_n;
    if (set("--ggnn-out-dim")) tc.model.ggnn.out_dim = o.ggnn_out;
    if (set("--t-steps")) tc.model.ggnn.t_steps = o.t_steps;
    if (set("--region-size")) tc.model.region_size = o.region_size;
    if (set("--region-count")) tc.model.region_count = o.region_count;
    if (set("--region-iou")) tc.model.region_iou = o.region_iou;
    if (set("--region-crop")) tc.model.region_crop = o.region_crop;
    tc.model.variant = v;
    tc.model.num_classes = 0;  // filled from the dataset
    require(tc.sgd.lr > 0 && tc.adam.lr > 0, "learning rates must be positive");
    return tc;
}

void print_history(const std::vector<trainer::EpochStats>& hist) {
    for (const auto& st : hist) {
        std::cout << "epoch " << st.epoch << " loss " << st.loss << " train_acc "
                  << st.train_acc;
        if (st.test_acc >= 0.0) std::cout << " test_acc " << st.test_acc;
        std::cout << "\n";
    }
}

void finish_training(const TrainOpts& o, const trainer::TrainConfig& tc,
                     const trainer::TrainResult& res, const data::Dataset& ds) {
    print_history(res.history);
    const auto ev = trainer::evaluate(res.model, ds.test);
    std::cout << std::setprecision(17) << "final test_acc " << ev.accuracy << "\n";
    if (!o.out.empty()) {
        ckpt::save(model::to_checkpoint(res.model, o.graph_file, res.rng_state), o.out);
        std::cout << "checkpoint " << o.out << "\n";
    }
    if (!o.metrics_out.empty()) {
        trainer::write_metrics(o.metrics_out, tc, res.history);
        std::cout << "metrics " << o.metrics_out << "\n";
    }
    if (!o.scores_out.empty()) {
        trainer::save_scores(o.scores_out, trainer::crossfit_scores(ds, tc));
        std::cout << "scores " << o.scores_out << "\n";
    }
}

// ---- subcommands -----------------------------------------------------------------

int cmd_gen_synthetic(const std::string& out, const data::SynthConfig& cfg,
                      std::uint64_t seed) {
    data::Dataset ds = data::gen_synthetic(cfg, seed);
    data::save_synthetic(ds, out);
    std::cout << "synthetic dataset: " << ds.num_classes() << " classes, "
              << ds.num_attributes() << " attributes, " << ds.train.size() << " train / "
              << ds.test.size() << " test -> " << out << "\n";
    return 0;
}

int cmd_build_graph(const std::string& data, const std::string& format, const std::string& out,
                    const std::string& dot, bool per_column) {
    data::Dataset ds = load_dataset(resolve_data(data), format);
    graph::NodeRegistry reg{ds.class_names, ds.attribute_names};
    graph::BuildReport rep;
    graph::KnowledgeGraph kg =
        graph::build_graph(data::train_instances(ds), std::move(reg),
                           per_column ? graph::NormMode::per_column : graph::NormMode::global,
                           &rep);
    graph::save_graph(kg, out);
    std::size_t edges = 0;
    for (double v : kg.s().a)
        if (v > 0.0) ++edges;
    std::cout << "graph: " << kg.num_categories() << " categories, " << kg.num_attributes()
              << " attributes, " << edges << " nonzero edges, raw counts [" << rep.raw_min
              << ", " << rep.raw_max << "] -> " << out << "\n";
    if (!rep.empty_categories.empty())
        std::cout << "warning: " << rep.empty_categories.size()
                  << " categories had no training instances\n";
    if (!dot.empty()) {
        graph::export_dot(kg, dot);
        std::cout << "dot " << dot << "\n";
    }
    return 0;
}

int cmd_pretrain(CLI::App* sc, TrainOpts& o) {
    data::Dataset ds = load_dataset(resolve_data(o.data), o.format);
    trainer::TrainConfig tc = build_config(sc, o, fusion::Variant::baseline);
    trainer::TrainResult res = trainer::train(ds, nullptr, tc);
    finish_training(o, tc, res, ds);
    return 0;
}

int cmd_train(CLI::App* sc, TrainOpts& o) {
    data::Dataset ds = load_dataset(resolve_data(o.data), o.format);
    const fusion::Variant v = fusion::parse_variant(o.variant);
    trainer::TrainConfig tc = build_config(sc, o, v);

    graph::KnowledgeGraph kg;
    const graph::KnowledgeGraph* kgp = nullptr;
    model::KerlModel scorer;
    const model::KerlModel* scorerp = nullptr;
    std::vector<Vec> cached;
    const std::vector<Vec>* cachedp = nullptr;

    if (tc.model.needs_knowledge()) {
        if (o.graph_file.empty()) {
            kg = graph::build_graph(data::train_instances(ds),
                                    graph::NodeRegistry{ds.class_names, ds.attribute_names});
        } else {
            kg = graph::load_graph(o.graph_file);
            require(kg.num_categories() == ds.num_classes() &&
                        kg.num_attributes() == ds.num_attributes(),
                    "graph node counts do not match the dataset");
        }
        kgp = &kg;
        if (o.pretrained.empty())
            throw std::invalid_argument(
                "variant '" + o.variant +
                "' needs frozen baseline scores: run `kerl pretrain --data ... --out "
                "baseline.ckpt` first and pass --pretrained baseline.ckpt");
        scorer = model::from_checkpoint(ckpt::load(o.pretrained));
        scorerp = &scorer;
        if (!o.scores_in.empty()) {
            cached = trainer::load_scores(o.scores_in);
            cachedp = &cached;
        }
    }

    trainer::TrainResult res = trainer::train(ds, kgp, tc, scorerp, cachedp);
    finish_training(o, tc, res, ds);
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data, const std::string& format,
             const std::string& split, bool with_regions) {
    model::KerlModel m = model::from_checkpoint(ckpt::load(ckpt_path));
    data::Dataset ds = load_dataset(resolve_data(data), format);
    const auto& samples = pick_split(ds, split);
    trainer::EvalOptions opt;
    opt.with_regions = with_regions;
    trainer::EvalResult r = trainer::evaluate(m, samples, opt);

    std::cout << std::setprecision(17);
    std::cout << "variant " << fusion::variant_name(m.cfg.variant) << "\n";
    std::cout << "split " << split << "\n";
    std::cout << "samples " << samples.size() << "\n";
    std::cout << "accuracy " << r.accuracy << "\n";
    std::cout << "per_class";
    for (double a : r.per_class_accuracy) std::cout << " " << a;
    std::cout << "\n";
    if (r.mass_samples > 0)
        std::cout << "saliency_mass " << r.mass << " chance " << r.chance << " samples "
                  << r.mass_samples << "\n";
    return 0;
}

int cmd_visualize(const std::string& ckpt_path, const std::string& data,
                  const std::string& format, const std::string& split, const std::string& out,
                  int count, bool upsample) {
    model::KerlModel m = model::from_checkpoint(ckpt::load(ckpt_path));
    data::Dataset ds = load_dataset(resolve_data(data), format);
    const auto& samples = pick_split(ds, split);
    require(count > 0, "visualize: --count must be positive");
    const std::size_t n = std::min<std::size_t>(samples.size(), static_cast<std::size_t>(count));

    fs::create_directories(out);
    cbp::Sketcher sk(m.sketch);
    std::vector<Vec> scores;
    if (m.cfg.needs_knowledge()) {
        require(m.scorer != nullptr, "visualize: model carries no scorer");
        std::vector<data::Sample> head(samples.begin(),
                                       samples.begin() + static_cast<std::ptrdiff_t>(n));
        scores = trainer::compute_scores(*m.scorer, head);
    }

    std::ofstream index(fs::path(out) / "index.txt");
    if (!index) throw IoError("cannot write index in " + out);
    const auto& ks = kernels::ops();
    for (std::size_t i = 0; i < n; ++i) {
        const data::Sample& s = samples[i];
        const FeatureMap in =
            s.has_features ? s.features : image::to_feature(s.image);
        const Vec* sp = scores.empty() ? nullptr : &scores[i];
        model::SampleTape tape;
        const Vec logits = model::forward(m, sk, in, s.has_features, sp, &tape);
        const Vec prob = model::softmax(logits);
        const std::size_t pred =
            static_cast<std::size_t>(std::max_element(prob.begin(), prob.end()) - prob.begin());

        char stem[32];
        std::snprintf(stem, sizeof(stem), "%03zu", i);
        const std::string base = (fs::path(out) / stem).string();

        if (s.has_image) image::write_image(base + "_input.ppm", s.image);

        const Mat loc = regions::min_max_normalized(regions::location_scores(tape.fmap));
        image::ImageU8 locimg = image::gray_from_unit(loc);
        image::write_image(base + "_loc.pgm", locimg);
        if (upsample)
            image::write_image(base + "_loc_up.pgm",
                               image::resize_bilinear(locimg, m.cfg.image, m.cfg.image));

        std::string gate_file = "-";
        if (m.cfg.has_gates()) {
            const FeatureMap& g = tape.gate.gates;
            Mat gm(static_cast<std::size_t>(g.h), static_cast<std::size_t>(g.w));
            for (int r = 0; r < g.h; ++r)
                for (int c = 0; c < g.w; ++c)
                    gm.at(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) =
                        ks.sum(g.loc(r, c), static_cast<std::size_t>(g.ch)) / g.ch;
            image::ImageU8 gimg = image::gray_from_unit(regions::min_max_normalized(gm));
            gate_file = std::string(stem) + "_gate.pgm";
            image::write_image(base + "_gate.pgm", gimg);
            if (upsample)
                image::write_image(base + "_gate_up.pgm",
                                   image::resize_bilinear(gimg, m.cfg.image, m.cfg.image));
        }
        index << i << " label " << s.label << " pred " << pred << " loc " << stem
              << "_loc.pgm gate " << gate_file << "\n";
    }
    index.flush();
    if (!index) throw IoError("short write to index in " + out);
    std::cout << "wrote " << n << " sample visualizations to " << out << "\n";
    return 0;
}

int cmd_gradcheck(std::uint64_t seed) {
    const auto reports = trainer::gradcheck_all(seed);
    double worst = 0.0;
    std::cout << std::setprecision(6);
    for (const auto& r : reports) {
        std::cout << r.group << " max_rel_err " << r.max_rel_err << "\n";
        worst = std::max(worst, r.max_rel_err);
    }
    if (!(worst < 1e-4))
        throw NumericError(msg("gradient check failed: max relative error ", worst));
    std::cout << "all gradient checks pass (worst " << worst << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"knowledge-gated fine-grained classification pipeline"};
    app.require_subcommand(1);

    // gen-synthetic
    data::SynthConfig syn;
    std::uint64_t syn_seed = 1;
    std::string syn_out;
    auto* sc_gen = app.add_subcommand("gen-synthetic", "generate the synthetic dataset");
    sc_gen->add_option("--out", syn_out, "output directory")->required();
    sc_gen->add_option("--classes", syn.num_classes, "number of categories (2..8)");
    sc_gen->add_option("--train-per-class", syn.train_per_class, "training samples per class");
    sc_gen->add_option("--test-per-class", syn.test_per_class, "test samples per class");
    sc_gen->add_option("--image", syn.image, "image side");
    sc_gen->add_option("--patch", syn.patch, "attribute patch side");
    sc_gen->add_option("--jitter", syn.jitter, "patch position jitter");
    sc_gen->add_option("--clutter", syn.clutter, "distractor patches per image");
    sc_gen->add_option("--dropout", syn.dropout, "attribute dropout probability");
    sc_gen->add_option("--noise", syn.noise, "background noise amplitude");
    sc_gen->add_option("--seed", syn_seed, "generator seed");

    // build-graph
    std::string bg_data, bg_format = "auto", bg_out, bg_dot;
    bool bg_per_column = false;
    auto* sc_bg = app.add_subcommand("build-graph", "build the knowledge graph from a dataset");
    sc_bg->add_option("--data", bg_data, "dataset root (default: $KERL_DATA_ROOT)");
    sc_bg->add_option("--format", bg_format, "dataset layout")
        ->check(CLI::IsMember({"auto", "synth", "cub", "cub-bbox"}));
    sc_bg->add_option("--out", bg_out, "graph output file")->required();
    sc_bg->add_option("--dot", bg_dot, "also export Graphviz DOT here");
    sc_bg->add_flag("--per-column-norm", bg_per_column,
                    "normalize each attribute column independently");

    // pretrain
    TrainOpts pre;
    auto* sc_pre = app.add_subcommand("pretrain", "train the baseline used as score source");
    add_train_flags(sc_pre, pre, false);
    sc_pre->add_option("--scores", pre.scores_out,
                       "write the training-split score cache here");

    // train
    TrainOpts tr;
    auto* sc_tr = app.add_subcommand("train", "train a model variant");
    add_train_flags(sc_tr, tr, true);
    sc_tr->add_option("--graph", tr.graph_file,
                      "knowledge graph file (default: built from the training split)");
    sc_tr->add_option("--pretrained", tr.pretrained,
                      "baseline checkpoint supplying category scores");
    sc_tr->add_option("--scores", tr.scores_in, "cached training-split scores");

    // eval
    std::string ev_ckpt, ev_data, ev_format = "auto", ev_split = "test";
    bool ev_regions = false;
    auto* sc_ev = app.add_subcommand("eval", "evaluate a checkpoint");
    sc_ev->add_option("--ckpt", ev_ckpt, "checkpoint path")->required();
    sc_ev->add_option("--data", ev_data, "dataset root (default: $KERL_DATA_ROOT)");
    sc_ev->add_option("--format", ev_format, "dataset layout")
        ->check(CLI::IsMember({"auto", "synth", "cub", "cub-bbox"}));
    sc_ev->add_option("--split", ev_split, "split to evaluate")
        ->check(CLI::IsMember({"train", "test"}));
    sc_ev->add_flag("--with-regions", ev_regions, "add highlighted-region rescoring");

    // visualize
    std::string vz_ckpt, vz_data, vz_format = "auto", vz_split = "test", vz_out;
    int vz_count = 8;
    bool vz_up = false;
    auto* sc_vz = app.add_subcommand("visualize", "emit location/gate heatmaps");
    sc_vz->add_option("--ckpt", vz_ckpt, "checkpoint path")->required();
    sc_vz->add_option("--data", vz_data, "dataset root (default: $KERL_DATA_ROOT)");
    sc_vz->add_option("--format", vz_format, "dataset layout")
        ->check(CLI::IsMember({"auto", "synth", "cub", "cub-bbox"}));
    sc_vz->add_option("--split", vz_split, "split to visualize")
        ->check(CLI::IsMember({"train", "test"}));
    sc_vz->add_option("--out", vz_out, "output directory")->required();
    sc_vz->add_option("--count", vz_count, "number of samples");
    sc_vz->add_flag("--upsample", vz_up, "also write input-size upsampled heatmaps");

    // gradcheck
    std::uint64_t gc_seed = 7;
    auto* sc_gc = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    sc_gc->add_option("--seed", gc_seed, "perturbation seed");

    try {
        app.parse(argc, argv);
        if (sc_gen->parsed()) return cmd_gen_synthetic(syn_out, syn, syn_seed);
        if (sc_bg->parsed())
            return cmd_build_graph(bg_data, bg_format, bg_out, bg_dot, bg_per_column);
        if (sc_pre->parsed()) return cmd_pretrain(sc_pre, pre);
        if (sc_tr->parsed()) return cmd_train(sc_tr, tr);
        if (sc_ev->parsed()) return cmd_eval(ev_ckpt, ev_data, ev_format, ev_split, ev_regions);
        if (sc_vz->parsed())
            return cmd_visualize(vz_ckpt, vz_data, vz_format, vz_split, vz_out, vz_count, vz_up);
        if (sc_gc->parsed()) return cmd_gradcheck(gc_seed);
        std::cerr << "no subcommand\n";
        return 2;
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
