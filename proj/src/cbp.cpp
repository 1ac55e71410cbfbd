#include "kerl/cbp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "kerl/error.hpp"
#include "kerl/kernels.hpp"
#include "kerl/rng.hpp"

namespace kerl::cbp {

SketchParams make_sketch_params(std::size_t d, std::size_t c, std::uint64_t seed) {
    require(d >= 1 && c >= 1, "make_sketch_params: d and c must be >= 1");
    SketchParams p;
    p.d = d;
    p.c = c;
    p.seed = seed;
    Rng rng(seed);
    p.h1.resize(d);
    p.h2.resize(d);
    p.s1.resize(d);
    p.s2.resize(d);
    for (std::size_t j = 0; j < d; ++j) p.h1[j] = static_cast<std::uint32_t>(rng.uniform_int(c));
    for (std::size_t j = 0; j < d; ++j) p.h2[j] = static_cast<std::uint32_t>(rng.uniform_int(c));
    for (std::size_t j = 0; j < d; ++j) p.s1[j] = rng.bernoulli(0.5) ? 1 : -1;
    for (std::size_t j = 0; j < d; ++j) p.s2[j] = rng.bernoulli(0.5) ? 1 : -1;
    return p;
}

void count_sketch(const double* x, std::size_t d, const std::uint32_t* h, const std::int8_t* s,
                  double* out, std::size_t c) {
    std::fill(out, out + c, 0.0);
    for (std::size_t j = 0; j < d; ++j) out[h[j]] += s[j] * x[j];
}

Fft::Fft(std::size_t n) : n_(n) {
    buf_in_ = static_cast<double*>(fftw_malloc(sizeof(double) * 2 * n));
    buf_out_ = static_cast<double*>(fftw_malloc(sizeof(double) * 2 * n));
    plan_fwd_ = fftw_plan_dft_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(buf_in_),
                                 reinterpret_cast<fftw_complex*>(buf_out_), FFTW_FORWARD,
                                 FFTW_ESTIMATE);
    plan_bwd_ = fftw_plan_dft_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(buf_in_),
                                 reinterpret_cast<fftw_complex*>(buf_out_), FFTW_BACKWARD,
                                 FFTW_ESTIMATE);
}

Fft::~Fft() {
    fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
    fftw_destroy_plan(static_cast<fftw_plan>(plan_bwd_));
    fftw_free(buf_in_);
    fftw_free(buf_out_);
}

void Fft::forward_real(const double* re_in, double* complex_out) {
    for (std::size_t i = 0; i < n_; ++i) {
        buf_in_[2 * i] = re_in[i];
        buf_in_[2 * i + 1] = 0.0;
    }
    fftw_execute(static_cast<fftw_plan>(plan_fwd_));
    std::memcpy(complex_out, buf_out_, sizeof(double) * 2 * n_);
}

void Fft::inverse(const double* complex_in, double* complex_out) {
    std::memcpy(buf_in_, complex_in, sizeof(double) * 2 * n_);
    fftw_execute(static_cast<fftw_plan>(plan_bwd_));
    std::memcpy(complex_out, buf_out_, sizeof(double) * 2 * n_);
}

Sketcher::Sketcher(SketchParams params)
    : params_(std::move(params)),
      fft_(params_.c),
      cs1_(params_.c),
      cs2_(params_.c),
      fa_(2 * params_.c),
      fb_(2 * params_.c),
      fz_(2 * params_.c) {}

void Sketcher::tensor_sketch(const double* x, double* out) {
    const std::size_t c = params_.c;
    count_sketch(x, params_.d, params_.h1.data(), params_.s1.data(), cs1_.data(), c);
    count_sketch(x, params_.d, params_.h2.data(), params_.s2.data(), cs2_.data(), c);
    fft_.forward_real(cs1_.data(), fa_.data());
    fft_.forward_real(cs2_.data(), fb_.data());
    std::fill(fz_.begin(), fz_.end(), 0.0);
    kernels::ops().cmul_had_acc(fa_.data(), fb_.data(), fz_.data(), c, false);
    fft_.inverse(fz_.data(), fa_.data());  // reuse fa_ as ifft output
    const double inv_c = 1.0 / static_cast<double>(c);
    double residue = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
        out[k] = fa_[2 * k] * inv_c;
        residue = std::max(residue, std::abs(fa_[2 * k + 1]) * inv_c);
    }
    imag_residue_ = residue;
}

void Sketcher::tensor_sketch_backward(const double* x, const double* dy, double* dx) {
    const std::size_t c = params_.c;
    const std::size_t d = params_.d;
    const auto& ks = kernels::ops();

    count_sketch(x, d, params_.h1.data(), params_.s1.data(), cs1_.data(), c);
    count_sketch(x, d, params_.h2.data(), params_.s2.data(), cs2_.data(), c);
    fft_.forward_real(cs1_.data(), fa_.data());
    fft_.forward_real(cs2_.data(), fb_.data());

    Vec fg(2 * c), tmp(2 * c), da(c), db(c);
    fft_.forward_real(dy, fg.data());
    const double inv_c = 1.0 / static_cast<double>(c);

    // d/d(cs1): circular correlation of upstream with cs2
    std::fill(fz_.begin(), fz_.end(), 0.0);
    ks.cmul_had_acc(fg.data(), fb_.data(), fz_.data(), c, true);
    fft_.inverse(fz_.data(), tmp.data());
    for (std::size_t k = 0; k < c; ++k) da[k] = tmp[2 * k] * inv_c;

    std::fill(fz_.begin(), fz_.end(), 0.0);
    ks.cmul_had_acc(fg.data(), fa_.data(), fz_.data(), c, true);
    fft_.inverse(fz_.data(), tmp.data());
    for (std::size_t k = 0; k < c; ++k) db[k] = tmp[2 * k] * inv_c;

    for (std::size_t j = 0; j < d; ++j)
        dx[j] += params_.s1[j] * da[params_.h1[j]] + params_.s2[j] * db[params_.h2[j]];
}

FeatureMap Sketcher::pool(const FeatureMap& fmap) {
    require(static_cast<std::size_t>(fmap.ch) == params_.d,
            "per_location_pool: channel count does not match sketch d");
    FeatureMap out(fmap.h, fmap.w, static_cast<int>(params_.c));
    for (int i = 0; i < fmap.h; ++i)
        for (int j = 0; j < fmap.w; ++j) tensor_sketch(fmap.loc(i, j), out.loc(i, j));
    return out;
}

FeatureMap Sketcher::pool_backward(const FeatureMap& fmap, const FeatureMap& upstream) {
    require(static_cast<std::size_t>(fmap.ch) == params_.d &&
                static_cast<std::size_t>(upstream.ch) == params_.c &&
                fmap.h == upstream.h && fmap.w == upstream.w,
            "cbp_backward: shape mismatch");
    FeatureMap dfmap(fmap.h, fmap.w, fmap.ch);
    for (int i = 0; i < fmap.h; ++i)
        for (int j = 0; j < fmap.w; ++j)
            tensor_sketch_backward(fmap.loc(i, j), upstream.loc(i, j), dfmap.loc(i, j));
    return dfmap;
}

Vec tensor_sketch(const Vec& x, const SketchParams& params) {
    require(x.size() == params.d, "tensor_sketch: input length != d");
    Sketcher sk(params);
    Vec out(params.c);
    sk.tensor_sketch(x.data(), out.data());
    return out;
}

FeatureMap per_location_pool(const FeatureMap& fmap, const SketchParams& params) {
    Sketcher sk(params);
    return sk.pool(fmap);
}

FeatureMap cbp_backward(const FeatureMap& fmap, const SketchParams& params,
                        const FeatureMap& upstream) {
    Sketcher sk(params);
    return sk.pool_backward(fmap, upstream);
}

// stabilized signed sqrt: sign(x) (sqrt(|x| + eps) - sqrt(eps)). The plain
// sign(x) sqrt(|x|) has an unbounded slope at zero, which wrecks both finite
// differences and SGD on near-zero sketch entries; the shift keeps the map
// odd and zero-preserving with slope capped at 1 / (2 sqrt(eps)).
constexpr double kSqrtEps = 1e-3;

inline double signed_sqrt(double x) {
    double a = std::abs(x);
    return (x >= 0.0 ? 1.0 : -1.0) * (std::sqrt(a + kSqrtEps) - std::sqrt(kSqrtEps));
}

void signed_sqrt_l2(double* v, std::size_t n) {
    double norm_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = signed_sqrt(v[i]);
        norm_sq += v[i] * v[i];
    }
    double inv = 1.0 / std::max(std::sqrt(norm_sq), 1e-12);
    kernels::ops().scal(inv, v, n);
}

void signed_sqrt_l2_backward(const double* v_raw, const double* upstream, double* dv,
                             std::size_t n) {
    Vec y(n);
    double norm_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = signed_sqrt(v_raw[i]);
        norm_sq += y[i] * y[i];
    }
    double norm = std::max(std::sqrt(norm_sq), 1e-12);
    double dot_zy = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot_zy += upstream[i] * y[i] / norm;
    for (std::size_t i = 0; i < n; ++i) {
        double dy = (upstream[i] - (y[i] / norm) * dot_zy) / norm;
        dv[i] += dy / (2.0 * std::sqrt(std::abs(v_raw[i]) + kSqrtEps));
    }
}

FeatureMap Sketcher::normalized_map(const FeatureMap& f) {
    FeatureMap out = f;
    const std::size_t c = static_cast<std::size_t>(f.ch);
    for (int i = 0; i < f.h; ++i)
        for (int j = 0; j < f.w; ++j) signed_sqrt_l2(out.loc(i, j), c);
    return out;
}

FeatureMap Sketcher::normalized_map_backward(const FeatureMap& raw, const FeatureMap& dnorm) {
    FeatureMap out(raw.h, raw.w, raw.ch);
    const std::size_t c = static_cast<std::size_t>(raw.ch);
    for (int i = 0; i < raw.h; ++i)
        for (int j = 0; j < raw.w; ++j)
            signed_sqrt_l2_backward(raw.loc(i, j), dnorm.loc(i, j), out.loc(i, j), c);
    return out;
}

}  // namespace kerl::cbp
