#if defined(__aarch64__)

#include <arm_neon.h>

#include "kerl/kernels.hpp"

namespace kerl::kernels {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    }
    for (; i + 2 <= n; i += 2) acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    double s = vaddvq_f64(acc0) + vaddvq_f64(acc1);
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
    float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void scal_neon(double alpha, double* x, std::size_t n) {
    float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_f64(va, vld1q_f64(x + i)));
    for (; i < n; ++i) x[i] *= alpha;
}

void had_acc_neon(const double* x, const double* y, double* z, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2)
        vst1q_f64(z + i, vfmaq_f64(vld1q_f64(z + i), vld1q_f64(x + i), vld1q_f64(y + i)));
    for (; i < n; ++i) z[i] += x[i] * y[i];
}

void matvec_neon(const double* A, const double* x, double* y, std::size_t m, std::size_t n,
                 bool acc) {
    for (std::size_t i = 0; i < m; ++i) {
        double s = dot_neon(A + i * n, x, n);
        y[i] = acc ? y[i] + s : s;
    }
}

void matvec_t_neon(const double* A, const double* x, double* y, std::size_t m, std::size_t n,
                   bool acc) {
    if (!acc)
        for (std::size_t j = 0; j < n; ++j) y[j] = 0.0;
    for (std::size_t i = 0; i < m; ++i) axpy_neon(x[i], A + i * n, y, n);
}

void ger_neon(const double* x, const double* y, double* A, std::size_t m, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) axpy_neon(x[i], y, A + i * n, n);
}

// one complex value per 128-bit vector; scalar math, vector loads add little here
void cmul_had_acc_neon(const double* a, const double* b, double* z, std::size_t n, bool conj_b) {
    for (std::size_t k = 0; k < n; ++k) {
        double ar = a[2 * k], ai = a[2 * k + 1];
        double br = b[2 * k], bi = conj_b ? -b[2 * k + 1] : b[2 * k + 1];
        z[2 * k] += ar * br - ai * bi;
        z[2 * k + 1] += ar * bi + ai * br;
    }
}

double sum_neon(const double* x, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
    double s = vaddvq_f64(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

}  // namespace

const Ops& neon_ops_impl() {
    static const Ops k = {
        "neon",       dot_neon,      axpy_neon, scal_neon,         had_acc_neon,
        matvec_neon,  matvec_t_neon, ger_neon,  cmul_had_acc_neon, sum_neon,
    };
    return k;
}

}  // namespace kerl::kernels

#endif  // aarch64
