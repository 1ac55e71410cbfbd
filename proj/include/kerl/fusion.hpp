#pragma once

#include <string>

#include "kerl/rng.hpp"
#include "kerl/tensor.hpp"

// Knowledge-gated pooling and the classifier heads. The gate network g maps
// concat(per-location feature, knowledge representation) through two affine
// layers (tanh between) to a c-dimensional sigmoid gate; the pooled feature
// is the gate-weighted sum over locations. Ablation heads: self-guided gate
// (no knowledge slot), plain concatenation, and the sum-pooling baseline.

namespace kerl::fusion {

enum class Variant { baseline, self_guided, concat, kerl };

Variant parse_variant(const std::string& name);
std::string variant_name(Variant v);

struct FusionConfig {
    std::size_t c = 0;              // pooled feature channels
    std::size_t knowledge_dim = 0;  // |V| * out_dim, 0 for knowledge-free heads
    std::size_t m = 0;              // gate hidden width
    std::size_t num_classes = 0;
    bool scalar_gate = false;  // ablation: one gate value per location
};

struct Affine {
    Mat w;
    Vec b;

    Affine() = default;
    Affine(std::size_t out, std::size_t in) : w(out, in), b(out, 0.0) {}
    std::size_t out_dim() const { return w.rows; }
    std::size_t in_dim() const { return w.cols; }

    void apply(const double* x, double* y) const;      // y = w x + b
    void apply_t(const double* dy, double* dx) const;  // dx = w^T dy
};

struct FusionParams {
    Affine g1;   // (c [+ knowledge]) -> m
    Affine g2;   // m -> c (or 1 with scalar_gate)
    Affine cls;  // classifier

    // shapes for the variant, all weights zero
    static FusionParams shaped(Variant v, const FusionConfig& cfg);
    static FusionParams init(Variant v, const FusionConfig& cfg, Rng& rng);

    template <class F>
    void visit(F&& f) {
        f("g1.w", g1.w); f("g1.b", g1.b);
        f("g2.w", g2.w); f("g2.b", g2.b);
        f("cls.w", cls.w); f("cls.b", cls.b);
    }
    template <class F>
    void visit(F&& f) const {
        f("g1.w", g1.w); f("g1.b", g1.b);
        f("g2.w", g2.w); f("g2.b", g2.b);
        f("cls.w", cls.w); f("cls.b", cls.b);
    }
};

// Intermediates kept for the reverse pass (one entry per location).
struct GateCache {
    Mat q;            // locations x m, tanh output
    FeatureMap gates; // h x w x gate_dim
};

struct PoolResult {
    Vec f;            // c
    FeatureMap gates; // h x w x gate_dim, entries strictly in (0,1)
};

// Knowledge-gated pooling over all spatial locations.
PoolResult gated_pool(const FeatureMap& f_i, const Vec& f_g, const FusionParams& p,
                      const FusionConfig& cfg, GateCache* cache = nullptr);

PoolResult self_guided_pool(const FeatureMap& f_i, const FusionParams& p,
                            const FusionConfig& cfg, GateCache* cache = nullptr);

Vec classify(const Vec& f, const FusionParams& p);

Vec concat_head(const FeatureMap& f_i, const Vec& f_g, const FusionParams& p);

Vec baseline_head(const FeatureMap& f_i, const FusionParams& p);

// Reverse passes. Gradients accumulate into grads; df_i / df_g receive the
// input gradients (df_i accumulated per location, df_g accumulated).
// dgate_bias is an extra constant upstream gradient on every gate entry,
// used for the gate-activity penalty in training (0 = none).
void classify_backward(const Vec& f, const Vec& dscores, const FusionParams& p,
                       FusionParams& grads, Vec& df);

void gated_pool_backward(const FeatureMap& f_i, const Vec& f_g, const FusionParams& p,
                         const FusionConfig& cfg, const GateCache& cache, const Vec& df,
                         FusionParams& grads, FeatureMap& df_i, Vec& df_g,
                         double dgate_bias = 0.0);

void self_guided_pool_backward(const FeatureMap& f_i, const FusionParams& p,
                               const FusionConfig& cfg, const GateCache& cache, const Vec& df,
                               FusionParams& grads, FeatureMap& df_i, double dgate_bias = 0.0);

void concat_head_backward(const FeatureMap& f_i, const Vec& f_g, const Vec& dscores,
                          const FusionParams& p, FusionParams& grads, FeatureMap& df_i,
                          Vec& df_g);

void baseline_head_backward(const FeatureMap& f_i, const Vec& dscores, const FusionParams& p,
                            FusionParams& grads, FeatureMap& df_i);

// l2 helpers for the optional normalization flag

}  // namespace kerl::fusion
