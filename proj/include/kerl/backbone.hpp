#pragma once

#include <string>
#include <utility>
#include <vector>

#include "kerl/rng.hpp"
#include "kerl/tensor.hpp"

// Small configurable convolutional stack (conv + ReLU blocks) that turns an
// image into the per-location feature map the pooling layers consume. Each
// conv is realized as a per-location matvec over the gathered input patch.

namespace kerl::backbone {

struct ConvSpec {
    int in_ch = 0, out_ch = 0, kernel = 3, stride = 2, pad = 1;
};

struct BackboneConfig {
    std::vector<ConvSpec> layers;  // ReLU follows every conv

    // 3 blocks, kernel 3 stride 2 pad 1: in_ch -> 16 -> 32 -> d, total stride 8.
    static BackboneConfig desk(int in_ch = 3, int d = 64);

    int total_stride() const;
    int out_channels() const;
    // floor((in + 2 pad - k) / stride) + 1 per layer
    std::pair<int, int> output_dims(int in_h, int in_w) const;
};

struct ConvLayer {
    Mat w;  // out_ch x (in_ch * k * k)
    Vec b;  // out_ch
};

struct BackboneParams {
    std::vector<ConvLayer> layers;

    static BackboneParams init(const BackboneConfig& cfg, Rng& rng);
    static BackboneParams zeros(const BackboneConfig& cfg);

    template <class F>
    void visit(F&& f) {
        for (std::size_t l = 0; l < layers.size(); ++l) {
            std::string p = "conv" + std::to_string(l);
            f(p + ".w", layers[l].w);
            f(p + ".b", layers[l].b);
        }
    }
    template <class F>
    void visit(F&& f) const {
        for (std::size_t l = 0; l < layers.size(); ++l) {
            std::string p = "conv" + std::to_string(l);
            f(p + ".w", layers[l].w);
            f(p + ".b", layers[l].b);
        }
    }
};

// Layer inputs and pre-activation outputs, kept for the reverse pass.
struct BackboneTape {
    std::vector<FeatureMap> inputs;
    std::vector<FeatureMap> preact;
};

FeatureMap forward(const FeatureMap& x, const BackboneParams& p, const BackboneConfig& cfg,
                   BackboneTape* tape = nullptr);

// Accumulates parameter gradients into grads; writes input gradients into
// dx when non-null (dx is sized and zeroed here).
void backward(const BackboneTape& tape, const BackboneParams& p, const BackboneConfig& cfg,
              const FeatureMap& dout, BackboneParams& grads, FeatureMap* dx = nullptr);

}  // namespace kerl::backbone
