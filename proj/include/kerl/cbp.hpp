#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "kerl/tensor.hpp"

// Compact bilinear pooling via Tensor Sketch: two count sketches whose
// circular convolution approximates the flattened outer product x (x) x,
// applied independently at every spatial location (no sum pooling). The
// spectral product runs through FFTW; the sketch tables are drawn once from
// (d, c, seed) and must be identical between training and inference.

namespace kerl::cbp {

struct SketchParams {
    std::size_t d = 0;  // input channel count
    std::size_t c = 0;  // sketch dimension
    std::uint64_t seed = 0;
    std::vector<std::uint32_t> h1, h2;  // [0,d) -> [0,c)
    std::vector<std::int8_t> s1, s2;    // {-1,+1}
};

SketchParams make_sketch_params(std::size_t d, std::size_t c, std::uint64_t seed);

// out[k] = sum_{j: h[j]=k} s[j] * x[j]; out must have length c
void count_sketch(const double* x, std::size_t d, const std::uint32_t* h, const std::int8_t* s,
                  double* out, std::size_t c);

// FFTW plan pair for one transform size, with owned aligned buffers.
class Fft {
public:
    explicit Fft(std::size_t n);
    ~Fft();
    Fft(const Fft&) = delete;
    Fft& operator=(const Fft&) = delete;

    std::size_t size() const { return n_; }
    // real input -> interleaved complex output
    void forward_real(const double* re_in, double* complex_out);
    // unnormalized inverse, interleaved complex in/out
    void inverse(const double* complex_in, double* complex_out);

private:
    std::size_t n_;
    void* plan_fwd_;
    void* plan_bwd_;
    double* buf_in_;
    double* buf_out_;
};

// Runtime object: sketch tables + FFT plans + scratch.
class Sketcher {
public:
    explicit Sketcher(SketchParams params);

    const SketchParams& params() const { return params_; }

    // out = real(ifft(fft(CS1 x) . fft(CS2 x))); out length c
    void tensor_sketch(const double* x, double* out);

    // max |imaginary part| left by the inverse transform in the last
    // tensor_sketch call; conjugate symmetry makes this round-off only
    double last_imag_residue() const { return imag_residue_; }

    // per-location sketch; no spatial reduction
    FeatureMap pool(const FeatureMap& fmap);

    // reverse mode through the per-location sketch
    FeatureMap pool_backward(const FeatureMap& fmap, const FeatureMap& upstream);

    // optional signed-sqrt + l2 post-normalization, per location (the
    // CB-CNN practice); raw is the pre-normalization map in backward
    static FeatureMap normalized_map(const FeatureMap& f);
    static FeatureMap normalized_map_backward(const FeatureMap& raw, const FeatureMap& dnorm);

    // gradient of tensor_sketch at x, given upstream dy; accumulates into dx
    void tensor_sketch_backward(const double* x, const double* dy, double* dx);

private:
    SketchParams params_;
    Fft fft_;
    Vec cs1_, cs2_;       // c
    Vec fa_, fb_, fz_;    // interleaved complex, 2c
    double imag_residue_ = 0.0;
};

// Stateless wrappers (convenience; a fresh Sketcher per call).
Vec tensor_sketch(const Vec& x, const SketchParams& params);
FeatureMap per_location_pool(const FeatureMap& fmap, const SketchParams& params);
FeatureMap cbp_backward(const FeatureMap& fmap, const SketchParams& params,
                        const FeatureMap& upstream);

// Optional CB-CNN-style post-normalization (signed sqrt then l2), off by
// default in the pooling pipeline; forward maps v in place.
void signed_sqrt_l2(double* v, std::size_t n);
void signed_sqrt_l2_backward(const double* v_raw, const double* upstream, double* dv,
                             std::size_t n);

}  // namespace kerl::cbp
