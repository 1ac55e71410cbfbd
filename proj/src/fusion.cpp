#include "kerl/fusion.hpp"

#include <cmath>

#include "kerl/error.hpp"
#include "kerl/kernels.hpp"

namespace kerl::fusion {

namespace {

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

void affine_init(Affine& a, Rng& rng) {
    if (a.w.cols == 0) return;
    double bound = 1.0 / std::sqrt(static_cast<double>(a.w.cols));
    for (double& v : a.w.a) v = rng.uniform(-bound, bound);
}

Vec sum_pool(const FeatureMap& f_i) {
    const auto& ks = kernels::ops();
    Vec pooled(f_i.ch, 0.0);
    for (int i = 0; i < f_i.h; ++i)
        for (int j = 0; j < f_i.w; ++j) ks.axpy(1.0, f_i.loc(i, j), pooled.data(), f_i.ch);
    return pooled;
}

// shared worker: knowledge slot is empty for the self-guided head
PoolResult pool_impl(const FeatureMap& f_i, const double* f_g, std::size_t k_dim,
                     const FusionParams& p, const FusionConfig& cfg, GateCache* cache) {
    const auto& ks = kernels::ops();
    const std::size_t c = static_cast<std::size_t>(f_i.ch);
    require(c == cfg.c, "gated_pool: channel mismatch");
    require(p.g1.in_dim() == c + k_dim, "gated_pool: g1 input width mismatch");
    const std::size_t m = p.g1.out_dim();
    const std::size_t gd = p.g2.out_dim();

    PoolResult res;
    res.f.assign(c, 0.0);
    res.gates = FeatureMap(f_i.h, f_i.w, static_cast<int>(gd));
    if (cache) {
        cache->q = Mat(static_cast<std::size_t>(f_i.locations()), m);
        cache->gates = FeatureMap(f_i.h, f_i.w, static_cast<int>(gd));
    }

    Vec u(c + k_dim), q(m), r2(gd);
    if (k_dim) std::copy(f_g, f_g + k_dim, u.data() + c);
    std::size_t loc_idx = 0;
    for (int i = 0; i < f_i.h; ++i)
        for (int j = 0; j < f_i.w; ++j, ++loc_idx) {
            const double* floc = f_i.loc(i, j);
            std::copy(floc, floc + c, u.data());
            p.g1.apply(u.data(), q.data());
            for (std::size_t t = 0; t < m; ++t) q[t] = std::tanh(q[t]);
            p.g2.apply(q.data(), r2.data());
            double* gate = res.gates.loc(i, j);
            for (std::size_t t = 0; t < gd; ++t) gate[t] = sigmoid(r2[t]);
            if (cfg.scalar_gate)
                ks.axpy(gate[0], floc, res.f.data(), c);
            else
                ks.had_acc(gate, floc, res.f.data(), c);
            if (cache) {
                std::copy(q.begin(), q.end(), cache->q.row(loc_idx));
                std::copy(gate, gate + gd, cache->gates.loc(i, j));
            }
        }
    return res;
}

void pool_backward_impl(const FeatureMap& f_i, const double* f_g, std::size_t k_dim,
                        const FusionParams& p, const FusionConfig& cfg, const GateCache& cache,
                        const Vec& df, FusionParams& grads, FeatureMap& df_i, double* df_g,
                        double dgate_bias) {
    const auto& ks = kernels::ops();
    const std::size_t c = static_cast<std::size_t>(f_i.ch);
    require(df.size() == c, "gated_pool_backward: upstream length mismatch");
    const std::size_t m = p.g1.out_dim();
    const std::size_t gd = p.g2.out_dim();

    Vec u(c + k_dim), dgate(gd), dr2(gd), dq(m), dp_(m), du(c + k_dim);
    if (k_dim) std::copy(f_g, f_g + k_dim, u.data() + c);
    std::size_t loc_idx = 0;
    for (int i = 0; i < f_i.h; ++i)
        for (int j = 0; j < f_i.w; ++j, ++loc_idx) {
            const double* floc = f_i.loc(i, j);
            const double* gate = cache.gates.loc(i, j);
            const double* q = cache.q.row(loc_idx);
            double* dfloc = df_i.loc(i, j);
            std::copy(floc, floc + c, u.data());

            if (cfg.scalar_gate) {
                dgate[0] = ks.dot(df.data(), floc, c) + dgate_bias;
                ks.axpy(gate[0], df.data(), dfloc, c);
            } else {
                for (std::size_t t = 0; t < c; ++t) {
                    dgate[t] = df[t] * floc[t] + dgate_bias;
                    dfloc[t] += df[t] * gate[t];
                }
            }
            for (std::size_t t = 0; t < gd; ++t) dr2[t] = dgate[t] * gate[t] * (1.0 - gate[t]);

            ks.ger(dr2.data(), q, grads.g2.w.a.data(), gd, m);
            ks.axpy(1.0, dr2.data(), grads.g2.b.data(), gd);
            p.g2.apply_t(dr2.data(), dq.data());
            for (std::size_t t = 0; t < m; ++t) dp_[t] = dq[t] * (1.0 - q[t] * q[t]);

            ks.ger(dp_.data(), u.data(), grads.g1.w.a.data(), m, c + k_dim);
            ks.axpy(1.0, dp_.data(), grads.g1.b.data(), m);
            p.g1.apply_t(dp_.data(), du.data());
            ks.axpy(1.0, du.data(), dfloc, c);
            if (k_dim) ks.axpy(1.0, du.data() + c, df_g, k_dim);
        }
}

}  // namespace

Variant parse_variant(const std::string& name) {
    if (name == "baseline") return Variant::baseline;
    if (name == "self_guided") return Variant::self_guided;
    if (name == "concat") return Variant::concat;
    if (name == "kerl") return Variant::kerl;
    throw std::invalid_argument("unknown variant: " + name);
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::baseline: return "baseline";
        case Variant::self_guided: return "self_guided";
        case Variant::concat: return "concat";
        case Variant::kerl: return "kerl";
    }
    return "?";
}

void Affine::apply(const double* x, double* y) const {
    const auto& ks = kernels::ops();
    ks.matvec(w.a.data(), x, y, w.rows, w.cols, false);
    ks.axpy(1.0, b.data(), y, w.rows);
}

void Affine::apply_t(const double* dy, double* dx) const {
    kernels::ops().matvec_t(w.a.data(), dy, dx, w.rows, w.cols, false);
}

FusionParams FusionParams::shaped(Variant v, const FusionConfig& cfg) {
    FusionParams p;
    const std::size_t gd = cfg.scalar_gate ? 1 : cfg.c;
    switch (v) {
        case Variant::kerl:
            p.g1 = Affine(cfg.m, cfg.c + cfg.knowledge_dim);
            p.g2 = Affine(gd, cfg.m);
            p.cls = Affine(cfg.num_classes, cfg.c);
            break;
        case Variant::self_guided:
            p.g1 = Affine(cfg.m, cfg.c);
            p.g2 = Affine(gd, cfg.m);
            p.cls = Affine(cfg.num_classes, cfg.c);
            break;
        case Variant::concat:
            p.cls = Affine(cfg.num_classes, cfg.c + cfg.knowledge_dim);
            break;
        case Variant::baseline:
            p.cls = Affine(cfg.num_classes, cfg.c);
            break;
    }
    return p;
}

FusionParams FusionParams::init(Variant v, const FusionConfig& cfg, Rng& rng) {
    FusionParams p = shaped(v, cfg);
    affine_init(p.g1, rng);
    affine_init(p.g2, rng);
    // classifier starts at zero: logits 0, loss exactly ln(num_classes),
    // no blow-up from the unnormalized bilinear feature scale
    return p;
}

PoolResult gated_pool(const FeatureMap& f_i, const Vec& f_g, const FusionParams& p,
                      const FusionConfig& cfg, GateCache* cache) {
    require(f_g.size() == cfg.knowledge_dim && cfg.knowledge_dim > 0,
            "gated_pool: knowledge vector length mismatch");
    return pool_impl(f_i, f_g.data(), f_g.size(), p, cfg, cache);
}

PoolResult self_guided_pool(const FeatureMap& f_i, const FusionParams& p, const FusionConfig& cfg,
                            GateCache* cache) {
    return pool_impl(f_i, nullptr, 0, p, cfg, cache);
}

Vec classify(const Vec& f, const FusionParams& p) {
    require(f.size() == p.cls.in_dim(), "classify: feature length mismatch");
    Vec scores(p.cls.out_dim());
    p.cls.apply(f.data(), scores.data());
    return scores;
}

Vec concat_head(const FeatureMap& f_i, const Vec& f_g, const FusionParams& p) {
    Vec pooled = sum_pool(f_i);
    pooled.insert(pooled.end(), f_g.begin(), f_g.end());
    return classify(pooled, p);
}

Vec baseline_head(const FeatureMap& f_i, const FusionParams& p) {
    return classify(sum_pool(f_i), p);
}

void classify_backward(const Vec& f, const Vec& dscores, const FusionParams& p,
                       FusionParams& grads, Vec& df) {
    const auto& ks = kernels::ops();
    ks.ger(dscores.data(), f.data(), grads.cls.w.a.data(), p.cls.out_dim(), p.cls.in_dim());
    ks.axpy(1.0, dscores.data(), grads.cls.b.data(), p.cls.out_dim());
    df.assign(p.cls.in_dim(), 0.0);
    p.cls.apply_t(dscores.data(), df.data());
}

void gated_pool_backward(const FeatureMap& f_i, const Vec& f_g, const FusionParams& p,
                         const FusionConfig& cfg, const GateCache& cache, const Vec& df,
                         FusionParams& grads, FeatureMap& df_i, Vec& df_g, double dgate_bias) {
    require(f_g.size() == cfg.knowledge_dim, "gated_pool_backward: knowledge length mismatch");
    pool_backward_impl(f_i, f_g.data(), f_g.size(), p, cfg, cache, df, grads, df_i,
                       df_g.data(), dgate_bias);
}

void self_guided_pool_backward(const FeatureMap& f_i, const FusionParams& p,
                               const FusionConfig& cfg, const GateCache& cache, const Vec& df,
                               FusionParams& grads, FeatureMap& df_i, double dgate_bias) {
    pool_backward_impl(f_i, nullptr, 0, p, cfg, cache, df, grads, df_i, nullptr, dgate_bias);
}

void concat_head_backward(const FeatureMap& f_i, const Vec& f_g, const Vec& dscores,
                          const FusionParams& p, FusionParams& grads, FeatureMap& df_i,
                          Vec& df_g) {
    const auto& ks = kernels::ops();
    const std::size_t c = static_cast<std::size_t>(f_i.ch);
    Vec pooled = sum_pool(f_i);
    pooled.insert(pooled.end(), f_g.begin(), f_g.end());
    Vec dfeat;
    classify_backward(pooled, dscores, p, grads, dfeat);
    for (int i = 0; i < f_i.h; ++i)
        for (int j = 0; j < f_i.w; ++j) ks.axpy(1.0, dfeat.data(), df_i.loc(i, j), c);
    ks.axpy(1.0, dfeat.data() + c, df_g.data(), f_g.size());
}

void baseline_head_backward(const FeatureMap& f_i, const Vec& dscores, const FusionParams& p,
                            FusionParams& grads, FeatureMap& df_i) {
    const auto& ks = kernels::ops();
    const std::size_t c = static_cast<std::size_t>(f_i.ch);
    Vec pooled = sum_pool(f_i);
    Vec dfeat;
    classify_backward(pooled, dscores, p, grads, dfeat);
    for (int i = 0; i < f_i.h; ++i)
        for (int j = 0; j < f_i.w; ++j) ks.axpy(1.0, dfeat.data(), df_i.loc(i, j), c);
}

}  // namespace kerl::fusion
