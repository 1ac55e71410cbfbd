#pragma once

#include <memory>
#include <string>

#include "kerl/backbone.hpp"
#include "kerl/cbp.hpp"
#include "kerl/checkpoint.hpp"
#include "kerl/fusion.hpp"
#include "kerl/ggnn.hpp"
#include "kerl/graph.hpp"
#include "kerl/image_io.hpp"
#include "kerl/regions.hpp"
#include "kerl/rng.hpp"

// The assembled classifier: backbone -> per-location compact bilinear
// features -> variant-specific pooling/head. Knowledge variants (kerl,
// concat) additionally run the graph network on per-sample category scores
// produced by a frozen pretrained baseline (the scorer), which is embedded
// in the model so checkpoints evaluate self-contained.

namespace kerl::model {

struct ModelConfig {
    fusion::Variant variant = fusion::Variant::baseline;
    int image = 64;  // expected square input side
    backbone::BackboneConfig backbone = backbone::BackboneConfig::desk();
    ggnn::GgnnConfig ggnn;
    std::size_t cbp_c = 512;
    std::uint64_t sketch_seed = 24601;
    std::size_t gate_hidden = 0;  // 0 -> max(64, cbp_c / 2)
    bool scalar_gate = false;
    // per-location signed-sqrt + l2 on the sketched features (CB-CNN
    // post-normalization); off keeps the raw-feature gate of Eq. 6
    bool cbp_normalize = false;
    std::size_t num_classes = 0;
    // highlighted-region refinement geometry
    int region_size = 3;     // NMS box side in feature cells
    int region_count = 3;    // regions kept per image
    double region_iou = 0.5;
    int region_crop = 24;    // pixel crop side
    // paper-scale reference geometry (not run at desk scale): 448 input,
    // stride 16, c = 8192, region size 6, crop 96, resize 224

    bool needs_knowledge() const {
        return variant == fusion::Variant::kerl || variant == fusion::Variant::concat;
    }
    bool has_gates() const {
        return variant == fusion::Variant::kerl || variant == fusion::Variant::self_guided;
    }
    std::size_t gate_width() const {
        return gate_hidden ? gate_hidden : std::max<std::size_t>(64, cbp_c / 2);
    }
    fusion::FusionConfig fusion_cfg(std::size_t knowledge_dim) const;

    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
};

struct KerlModel {
    ModelConfig cfg;
    std::size_t knowledge_dim = 0;  // |V| * ggnn.out_dim; 0 when knowledge-free
    cbp::SketchParams sketch;
    backbone::BackboneParams bb;
    fusion::FusionParams fu;
    ggnn::GgnnParams gg;      // sized only for knowledge variants
    graph::KnowledgeGraph kg; // empty otherwise
    Mat a_full;               // cached adjacency for the graph rollout
    fusion::Affine region;    // (region_count * cbp_c) -> num_classes
    std::unique_ptr<KerlModel> scorer;  // frozen baseline (knowledge variants)

    KerlModel() = default;
    KerlModel(KerlModel&&) = default;
    KerlModel& operator=(KerlModel&&) = default;

    // kg required (and copied in) for knowledge variants
    static KerlModel init(const ModelConfig& cfg, const graph::KnowledgeGraph* kg, Rng& rng);
    // same shapes, all parameters zero; no graph/scorer copied
    static KerlModel zeros_like(const KerlModel& m);
    KerlModel clone() const;  // deep copy (scorer included)

    template <class F>
    void visit_params(F&& f) {
        bb.visit([&](const std::string& n, auto& t) { f("backbone." + n, t); });
        if (knowledge_dim)
            gg.visit([&](const std::string& n, auto& t) { f("ggnn." + n, t); });
        fu.visit([&](const std::string& n, auto& t) { f("fusion." + n, t); });
        f("region.w", region.w);
        f("region.b", region.b);
    }
    template <class F>
    void visit_params(F&& f) const {
        bb.visit([&](const std::string& n, const auto& t) { f("backbone." + n, t); });
        if (knowledge_dim)
            gg.visit([&](const std::string& n, const auto& t) { f("ggnn." + n, t); });
        fu.visit([&](const std::string& n, const auto& t) { f("fusion." + n, t); });
        f("region.w", region.w);
        f("region.b", region.b);
    }
};

// Per-sample intermediates for the reverse pass and for inspection.
struct SampleTape {
    bool used_backbone = false;
    backbone::BackboneTape bb;
    FeatureMap fmap;   // backbone output (or the provided feature map)
    FeatureMap f_i;    // per-location sketched features (normalized when configured)
    FeatureMap f_i_raw;  // pre-normalization sketch, kept for the reverse pass
    ggnn::Tape gg;
    Vec f_g;
    fusion::GateCache gate;
    Vec f;  // pooled feature fed to the classifier
    Vec logits;
};

// input: image as [0,1] map (backbone runs) or a precomputed backbone
// feature map (input_is_features). scores: frozen-baseline softmax, required
// for knowledge variants, ignored otherwise.
Vec forward(const KerlModel& m, cbp::Sketcher& sk, const FeatureMap& input,
            bool input_is_features, const Vec* scores, SampleTape* tape = nullptr);

// gate_l1 adds the slope of a gate-activity penalty, gate_l1 * mean(gates),
// to the reverse pass of the gated variants (0 = plain cross-entropy).
void backward(const KerlModel& m, cbp::Sketcher& sk, const SampleTape& tape, const Vec& dlogits,
              KerlModel& grads, double gate_l1 = 0.0);

Vec softmax(const Vec& logits);

// Sum-pooled sketched feature of one crop (region-refinement path).
Vec crop_feature(const KerlModel& m, cbp::Sketcher& sk, const image::ImageU8& img,
                 const regions::CropSpec& spec);

// graph_path: optional reference to the graph file used at build time;
// rng_state: optional trainer RNG snapshot, stored for provenance.
ckpt::Checkpoint to_checkpoint(const KerlModel& m, const std::string& graph_path = "",
                               const std::string& rng_state = "");
KerlModel from_checkpoint(const ckpt::Checkpoint& c);

}  // namespace kerl::model
