#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "kerl/error.hpp"

namespace kerl {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec a;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

    double* row(std::size_t i) { return a.data() + i * cols; }
    const double* row(std::size_t i) const { return a.data() + i * cols; }
    double& at(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
    std::size_t size() const { return a.size(); }
    void zero() { std::fill(a.begin(), a.end(), 0.0); }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

// Spatial grid of per-location channel vectors, channel-last so each
// location is a contiguous span.
struct FeatureMap {
    int h = 0;
    int w = 0;
    int ch = 0;
    Vec v;

    FeatureMap() = default;
    FeatureMap(int h_, int w_, int c_, double fill = 0.0)
        : h(h_), w(w_), ch(c_), v(static_cast<std::size_t>(h_) * w_ * c_, fill) {}

    double* loc(int i, int j) { return v.data() + (static_cast<std::size_t>(i) * w + j) * ch; }
    const double* loc(int i, int j) const {
        return v.data() + (static_cast<std::size_t>(i) * w + j) * ch;
    }
    int locations() const { return h * w; }
    void zero() { std::fill(v.begin(), v.end(), 0.0); }
};

inline bool all_finite(const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(x[i])) return false;
    return true;
}

inline bool all_finite(const Vec& v) { return all_finite(v.data(), v.size()); }
inline bool all_finite(const Mat& m) { return all_finite(m.a); }

}  // namespace kerl
