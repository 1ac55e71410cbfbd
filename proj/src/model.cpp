#include "kerl/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "kerl/error.hpp"
#include "kerl/kernels.hpp"

namespace kerl::model {

using nlohmann::json;

fusion::FusionConfig ModelConfig::fusion_cfg(std::size_t knowledge_dim) const {
    fusion::FusionConfig f;
    f.c = cbp_c;
    f.knowledge_dim = knowledge_dim;
    f.m = gate_width();
    f.num_classes = num_classes;
    f.scalar_gate = scalar_gate;
    return f;
}

std::string ModelConfig::to_json() const {
    json j;
    j["variant"] = fusion::variant_name(variant);
    j["image"] = image;
    json layers = json::array();
    for (const auto& l : backbone.layers)
        layers.push_back({{"in", l.in_ch},
                          {"out", l.out_ch},
                          {"kernel", l.kernel},
                          {"stride", l.stride},
                          {"pad", l.pad}});
    j["backbone"] = layers;
    j["ggnn"] = {{"n", ggnn.n}, {"out_dim", ggnn.out_dim}, {"t_steps", ggnn.t_steps}};
    j["cbp_c"] = cbp_c;
    j["sketch_seed"] = sketch_seed;
    j["gate_hidden"] = gate_hidden;
    j["scalar_gate"] = scalar_gate;
    j["cbp_normalize"] = cbp_normalize;
    j["num_classes"] = num_classes;
    j["region"] = {{"size", region_size},
                   {"count", region_count},
                   {"iou", region_iou},
                   {"crop", region_crop}};
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    try {
        json j = json::parse(text);
        ModelConfig c;
        c.variant = fusion::parse_variant(j.at("variant").get<std::string>());
        c.image = j.at("image").get<int>();
        c.backbone.layers.clear();
        for (const auto& l : j.at("backbone"))
            c.backbone.layers.push_back({l.at("in").get<int>(), l.at("out").get<int>(),
                                         l.at("kernel").get<int>(), l.at("stride").get<int>(),
                                         l.at("pad").get<int>()});
        const auto& g = j.at("ggnn");
        c.ggnn.n = g.at("n").get<std::size_t>();
        c.ggnn.out_dim = g.at("out_dim").get<std::size_t>();
        c.ggnn.t_steps = g.at("t_steps").get<std::size_t>();
        c.cbp_c = j.at("cbp_c").get<std::size_t>();
        c.sketch_seed = j.at("sketch_seed").get<std::uint64_t>();
        c.gate_hidden = j.at("gate_hidden").get<std::size_t>();
        c.scalar_gate = j.at("scalar_gate").get<bool>();
        c.cbp_normalize = j.value("cbp_normalize", false);
        c.num_classes = j.at("num_classes").get<std::size_t>();
        const auto& r = j.at("region");
        c.region_size = r.at("size").get<int>();
        c.region_count = r.at("count").get<int>();
        c.region_iou = r.at("iou").get<double>();
        c.region_crop = r.at("crop").get<int>();
        return c;
    } catch (const json::exception& e) {
        throw ParseError("model config", 0, e.what());
    }
}

namespace {

// shapes only; parameters zero, graph/scorer untouched
KerlModel shaped(const ModelConfig& cfg, std::size_t knowledge_dim) {
    require(cfg.num_classes > 0, "model: num_classes must be set");
    require(!cfg.backbone.layers.empty(), "model: backbone has no layers");
    KerlModel m;
    m.cfg = cfg;
    m.knowledge_dim = knowledge_dim;
    m.sketch = cbp::make_sketch_params(
        static_cast<std::size_t>(cfg.backbone.out_channels()), cfg.cbp_c, cfg.sketch_seed);
    m.bb = backbone::BackboneParams::zeros(cfg.backbone);
    if (cfg.needs_knowledge()) m.gg = ggnn::GgnnParams::zeros(cfg.ggnn);
    m.fu = fusion::FusionParams::shaped(cfg.variant, cfg.fusion_cfg(knowledge_dim));
    m.region = fusion::Affine(cfg.num_classes,
                              static_cast<std::size_t>(cfg.region_count) * cfg.cbp_c);
    return m;
}

}  // namespace

KerlModel KerlModel::init(const ModelConfig& cfg, const graph::KnowledgeGraph* kg, Rng& rng) {
    std::size_t kdim = 0;
    if (cfg.needs_knowledge()) {
        require(kg != nullptr, "model: variant needs a knowledge graph");
        require(kg->num_categories() == cfg.num_classes,
                "model: graph categories do not match num_classes");
        kdim = kg->registry.num_nodes() * cfg.ggnn.out_dim;
    }
    KerlModel m = shaped(cfg, kdim);
    m.bb = backbone::BackboneParams::init(cfg.backbone, rng);
    if (cfg.needs_knowledge()) {
        m.kg = *kg;
        m.a_full = graph::adjacency(m.kg).a_full;
        m.gg = ggnn::GgnnParams::init(cfg.ggnn, rng);
    }
    m.fu = fusion::FusionParams::init(cfg.variant, cfg.fusion_cfg(kdim), rng);
    // region head starts at zero like the main classifier
    return m;
}

KerlModel KerlModel::zeros_like(const KerlModel& m) { return shaped(m.cfg, m.knowledge_dim); }

KerlModel KerlModel::clone() const {
    KerlModel m;
    m.cfg = cfg;
    m.knowledge_dim = knowledge_dim;
    m.sketch = sketch;
    m.bb = bb;
    m.fu = fu;
    m.gg = gg;
    m.kg = kg;
    m.a_full = a_full;
    m.region = region;
    if (scorer) m.scorer = std::make_unique<KerlModel>(scorer->clone());
    return m;
}

Vec softmax(const Vec& logits) {
    require(!logits.empty(), "softmax: empty input");
    double mx = *std::max_element(logits.begin(), logits.end());
    Vec p(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

Vec forward(const KerlModel& m, cbp::Sketcher& sk, const FeatureMap& input,
            bool input_is_features, const Vec* scores, SampleTape* tape) {
    SampleTape scratch;
    SampleTape& t = tape ? *tape : scratch;

    if (input_is_features) {
        t.used_backbone = false;
        t.fmap = input;
    } else {
        t.used_backbone = true;
        t.fmap = backbone::forward(input, m.bb, m.cfg.backbone, &t.bb);
    }
    require(static_cast<std::size_t>(t.fmap.ch) == m.sketch.d,
            "model: feature channels do not match the sketch input dim");
    t.f_i = sk.pool(t.fmap);
    if (m.cfg.cbp_normalize) {
        t.f_i_raw = std::move(t.f_i);
        t.f_i = cbp::Sketcher::normalized_map(t.f_i_raw);
    }

    const fusion::FusionConfig fcfg = m.cfg.fusion_cfg(m.knowledge_dim);
    auto knowledge = [&]() {
        require(scores != nullptr, "model: knowledge variant needs category scores");
        auto out = ggnn::forward(m.a_full, m.kg.num_categories(), *scores, m.gg, m.cfg.ggnn,
                                 &t.gg);
        t.f_g = std::move(out.second.f_g);
    };

    switch (m.cfg.variant) {
        case fusion::Variant::baseline:
            t.logits = fusion::baseline_head(t.f_i, m.fu);
            break;
        case fusion::Variant::concat:
            knowledge();
            t.logits = fusion::concat_head(t.f_i, t.f_g, m.fu);
            break;
        case fusion::Variant::self_guided: {
            auto pr = fusion::self_guided_pool(t.f_i, m.fu, fcfg, &t.gate);
            t.f = std::move(pr.f);
            t.logits = fusion::classify(t.f, m.fu);
            break;
        }
        case fusion::Variant::kerl: {
            knowledge();
            auto pr = fusion::gated_pool(t.f_i, t.f_g, m.fu, fcfg, &t.gate);
            t.f = std::move(pr.f);
            t.logits = fusion::classify(t.f, m.fu);
            break;
        }
    }
    if (!all_finite(t.logits)) throw NumericError("model: non-finite logits");
    return t.logits;
}

void backward(const KerlModel& m, cbp::Sketcher& sk, const SampleTape& t, const Vec& dlogits,
              KerlModel& grads, double gate_l1) {
    const fusion::FusionConfig fcfg = m.cfg.fusion_cfg(m.knowledge_dim);
    FeatureMap df_i(t.f_i.h, t.f_i.w, t.f_i.ch);
    // gate-activity penalty: gate_l1 * mean(gates); constant slope per entry
    const double dgate_bias =
        t.gate.gates.v.empty() ? 0.0 : gate_l1 / static_cast<double>(t.gate.gates.v.size());

    switch (m.cfg.variant) {
        case fusion::Variant::baseline:
            fusion::baseline_head_backward(t.f_i, dlogits, m.fu, grads.fu, df_i);
            break;
        case fusion::Variant::concat: {
            Vec df_g(m.knowledge_dim, 0.0);
            fusion::concat_head_backward(t.f_i, t.f_g, dlogits, m.fu, grads.fu, df_i, df_g);
            ggnn::backward(t.gg, m.a_full, m.kg.num_categories(), m.gg, m.cfg.ggnn, df_g,
                           grads.gg);
            break;
        }
        case fusion::Variant::self_guided: {
            Vec df;
            fusion::classify_backward(t.f, dlogits, m.fu, grads.fu, df);
            fusion::self_guided_pool_backward(t.f_i, m.fu, fcfg, t.gate, df, grads.fu, df_i,
                                              dgate_bias);
            break;
        }
        case fusion::Variant::kerl: {
            Vec df;
            fusion::classify_backward(t.f, dlogits, m.fu, grads.fu, df);
            Vec df_g(m.knowledge_dim, 0.0);
            fusion::gated_pool_backward(t.f_i, t.f_g, m.fu, fcfg, t.gate, df, grads.fu, df_i,
                                        df_g, dgate_bias);
            ggnn::backward(t.gg, m.a_full, m.kg.num_categories(), m.gg, m.cfg.ggnn, df_g,
                           grads.gg);
            break;
        }
    }

    if (m.cfg.cbp_normalize)
        df_i = cbp::Sketcher::normalized_map_backward(t.f_i_raw, df_i);
    FeatureMap dfmap = sk.pool_backward(t.fmap, df_i);
    if (t.used_backbone) backbone::backward(t.bb, m.bb, m.cfg.backbone, dfmap, grads.bb);
}

Vec crop_feature(const KerlModel& m, cbp::Sketcher& sk, const image::ImageU8& img,
                 const regions::CropSpec& spec) {
    image::ImageU8 patch = image::crop(img, spec.box);
    image::ImageU8 resized = image::resize_bilinear(patch, spec.resize, spec.resize);
    FeatureMap fm = backbone::forward(image::to_feature(resized), m.bb, m.cfg.backbone);
    FeatureMap f_i = sk.pool(fm);
    if (m.cfg.cbp_normalize) f_i = cbp::Sketcher::normalized_map(f_i);
    Vec pooled(static_cast<std::size_t>(f_i.ch), 0.0);
    const auto& ks = kernels::ops();
    for (int i = 0; i < f_i.h; ++i)
        for (int j = 0; j < f_i.w; ++j)
            ks.axpy(1.0, f_i.loc(i, j), pooled.data(), pooled.size());
    return pooled;
}

ckpt::Checkpoint to_checkpoint(const KerlModel& m, const std::string& graph_path,
                               const std::string& rng_state) {
    ckpt::Checkpoint c;
    c.put_meta("config", m.cfg.to_json());
    c.put_meta("variant", fusion::variant_name(m.cfg.variant));
    c.put_meta("knowledge_dim", std::to_string(m.knowledge_dim));
    if (!rng_state.empty()) c.put_meta("rng_state", rng_state);
    if (m.knowledge_dim) {
        std::ostringstream g;
        graph::save_graph(m.kg, g);
        c.put_meta("graph", g.str());
    }
    if (!graph_path.empty()) c.put_meta("graph_path", graph_path);
    m.visit_params([&](const std::string& n, const auto& t) { c.put(n, t); });
    if (m.scorer) {
        c.put_meta("scorer_config", m.scorer->cfg.to_json());
        m.scorer->visit_params(
            [&](const std::string& n, const auto& t) { c.put("scorer." + n, t); });
    }
    return c;
}

KerlModel from_checkpoint(const ckpt::Checkpoint& c) {
    ModelConfig cfg = ModelConfig::from_json(c.need_meta("config"));
    std::size_t kdim = 0;
    graph::KnowledgeGraph kg;
    if (const std::string* g = c.find_meta("graph")) {
        std::istringstream is(*g);
        kg = graph::load_graph(is, "checkpoint graph");
        kdim = kg.registry.num_nodes() * cfg.ggnn.out_dim;
    }
    require(!cfg.needs_knowledge() || kdim > 0, "checkpoint: knowledge variant without a graph");
    KerlModel m = shaped(cfg, kdim);
    if (kdim) {
        m.kg = std::move(kg);
        m.a_full = graph::adjacency(m.kg).a_full;
    }
    m.visit_params([&](const std::string& n, auto& t) { c.read_into(n, t); });

    if (const std::string* sc = c.find_meta("scorer_config")) {
        ckpt::Checkpoint sub;
        sub.put_meta("config", *sc);
        for (const auto& [name, data] : c.tensors)
            if (name.rfind("scorer.", 0) == 0) sub.tensors.emplace_back(name.substr(7), data);
        m.scorer = std::make_unique<KerlModel>(from_checkpoint(sub));
    }
    return m;
}

}  // namespace kerl::model
