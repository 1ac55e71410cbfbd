#include "kerl/backbone.hpp"

#include <cmath>

#include "kerl/error.hpp"
#include "kerl/kernels.hpp"

namespace kerl::backbone {

namespace {

int out_extent(int in, const ConvSpec& s) { return (in + 2 * s.pad - s.kernel) / s.stride + 1; }

// Copies the k*k*in_ch patch under output location (oi, oj) into buf,
// zero-filling where the window hangs over the border.
void gather_patch(const FeatureMap& x, const ConvSpec& s, int oi, int oj, double* buf) {
    const int k = s.kernel;
    const std::size_t row_len = static_cast<std::size_t>(k) * s.in_ch;
    for (int di = 0; di < k; ++di) {
        double* dst = buf + static_cast<std::size_t>(di) * row_len;
        int ii = oi * s.stride - s.pad + di;
        if (ii < 0 || ii >= x.h) {
            std::fill(dst, dst + row_len, 0.0);
            continue;
        }
        for (int dj = 0; dj < k; ++dj) {
            int jj = oj * s.stride - s.pad + dj;
            double* cell = dst + static_cast<std::size_t>(dj) * s.in_ch;
            if (jj < 0 || jj >= x.w) {
                std::fill(cell, cell + s.in_ch, 0.0);
            } else {
                const double* src = x.loc(ii, jj);
                std::copy(src, src + s.in_ch, cell);
            }
        }
    }
}

void scatter_patch(FeatureMap& dx, const ConvSpec& s, int oi, int oj, const double* buf) {
    const auto& ks = kernels::ops();
    const int k = s.kernel;
    const std::size_t row_len = static_cast<std::size_t>(k) * s.in_ch;
    for (int di = 0; di < k; ++di) {
        int ii = oi * s.stride - s.pad + di;
        if (ii < 0 || ii >= dx.h) continue;
        const double* src = buf + static_cast<std::size_t>(di) * row_len;
        for (int dj = 0; dj < k; ++dj) {
            int jj = oj * s.stride - s.pad + dj;
            if (jj < 0 || jj >= dx.w) continue;
            ks.axpy(1.0, src + static_cast<std::size_t>(dj) * s.in_ch, dx.loc(ii, jj),
                    static_cast<std::size_t>(s.in_ch));
        }
    }
}

}  // namespace

BackboneConfig BackboneConfig::desk(int in_ch, int d) {
    BackboneConfig cfg;
    cfg.layers = {{in_ch, 16, 3, 2, 1}, {16, 32, 3, 2, 1}, {32, d, 3, 2, 1}};
    return cfg;
}

int BackboneConfig::total_stride() const {
    int s = 1;
    for (const auto& l : layers) s *= l.stride;
    return s;
}

int BackboneConfig::out_channels() const {
    require(!layers.empty(), "backbone: no layers");
    return layers.back().out_ch;
}

std::pair<int, int> BackboneConfig::output_dims(int in_h, int in_w) const {
    int h = in_h, w = in_w;
    for (const auto& l : layers) {
        h = out_extent(h, l);
        w = out_extent(w, l);
        require(h >= 1 && w >= 1, "backbone: input too small for the layer stack");
    }
    return {h, w};
}

BackboneParams BackboneParams::init(const BackboneConfig& cfg, Rng& rng) {
    BackboneParams p = zeros(cfg);
    for (auto& l : p.layers) {
        // Kaiming-uniform with ReLU gain so activation scale survives the stack
        double bound = std::sqrt(6.0 / static_cast<double>(l.w.cols));
        for (double& v : l.w.a) v = rng.uniform(-bound, bound);
    }
    return p;
}

BackboneParams BackboneParams::zeros(const BackboneConfig& cfg) {
    BackboneParams p;
    for (const auto& s : cfg.layers) {
        require(s.in_ch > 0 && s.out_ch > 0 && s.kernel > 0 && s.stride > 0 && s.pad >= 0,
                "backbone: bad layer spec");
        ConvLayer l;
        l.w = Mat(static_cast<std::size_t>(s.out_ch),
                  static_cast<std::size_t>(s.in_ch) * s.kernel * s.kernel);
        l.b.assign(static_cast<std::size_t>(s.out_ch), 0.0);
        p.layers.push_back(std::move(l));
    }
    return p;
}

FeatureMap forward(const FeatureMap& x, const BackboneParams& p, const BackboneConfig& cfg,
                   BackboneTape* tape) {
    require(p.layers.size() == cfg.layers.size(), "backbone: params/config mismatch");
    const auto& ks = kernels::ops();
    if (tape) {
        tape->inputs.clear();
        tape->preact.clear();
    }
    FeatureMap cur = x;
    for (std::size_t li = 0; li < cfg.layers.size(); ++li) {
        const ConvSpec& s = cfg.layers[li];
        require(cur.ch == s.in_ch, "backbone: channel mismatch at layer " + std::to_string(li));
        const int oh = out_extent(cur.h, s), ow = out_extent(cur.w, s);
        require(oh >= 1 && ow >= 1, "backbone: map shrank to nothing");
        FeatureMap pre(oh, ow, s.out_ch);
        Vec patch(static_cast<std::size_t>(s.kernel) * s.kernel * s.in_ch);
        for (int oi = 0; oi < oh; ++oi)
            for (int oj = 0; oj < ow; ++oj) {
                gather_patch(cur, s, oi, oj, patch.data());
                double* out = pre.loc(oi, oj);
                ks.matvec(p.layers[li].w.a.data(), patch.data(), out, p.layers[li].w.rows,
                          p.layers[li].w.cols, false);
                ks.axpy(1.0, p.layers[li].b.data(), out, p.layers[li].b.size());
            }
        if (tape) {
            tape->inputs.push_back(std::move(cur));
            tape->preact.push_back(pre);
        }
        FeatureMap act(oh, ow, s.out_ch);
        for (std::size_t k = 0; k < pre.v.size(); ++k) act.v[k] = pre.v[k] > 0.0 ? pre.v[k] : 0.0;
        cur = std::move(act);
    }
    if (!all_finite(cur.v)) throw NumericError("backbone: non-finite activation");
    return cur;
}

void backward(const BackboneTape& tape, const BackboneParams& p, const BackboneConfig& cfg,
              const FeatureMap& dout, BackboneParams& grads, FeatureMap* dx) {
    require(tape.inputs.size() == cfg.layers.size(), "backbone: tape/config mismatch");
    const auto& ks = kernels::ops();
    FeatureMap dcur = dout;
    for (std::size_t li = cfg.layers.size(); li-- > 0;) {
        const ConvSpec& s = cfg.layers[li];
        const FeatureMap& pre = tape.preact[li];
        const FeatureMap& in = tape.inputs[li];
        require(dcur.h == pre.h && dcur.w == pre.w && dcur.ch == pre.ch,
                "backbone: upstream shape mismatch");

        FeatureMap dpre = dcur;
        for (std::size_t k = 0; k < dpre.v.size(); ++k)
            if (pre.v[k] <= 0.0) dpre.v[k] = 0.0;

        FeatureMap din(in.h, in.w, in.ch);
        Vec patch(static_cast<std::size_t>(s.kernel) * s.kernel * s.in_ch);
        Vec dpatch(patch.size());
        Mat& gw = grads.layers[li].w;
        Vec& gb = grads.layers[li].b;
        for (int oi = 0; oi < dpre.h; ++oi)
            for (int oj = 0; oj < dpre.w; ++oj) {
                const double* g = dpre.loc(oi, oj);
                gather_patch(in, s, oi, oj, patch.data());
                ks.ger(g, patch.data(), gw.a.data(), gw.rows, gw.cols);
                ks.axpy(1.0, g, gb.data(), gb.size());
                ks.matvec_t(p.layers[li].w.a.data(), g, dpatch.data(), gw.rows, gw.cols, false);
                scatter_patch(din, s, oi, oj, dpatch.data());
            }
        if (li == 0) {
            if (dx) *dx = std::move(din);
            return;
        }
        dcur = std::move(din);
    }
}

}  // namespace kerl::backbone
