#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include "kerl/kernels.hpp"

namespace kerl::kernels {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void scal_avx2(double alpha, double* x, std::size_t n) {
    __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) x[i] *= alpha;
}

void had_acc_avx2(const double* x, const double* y, double* z, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vz = _mm256_loadu_pd(z + i);
        vz = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), vz);
        _mm256_storeu_pd(z + i, vz);
    }
    for (; i < n; ++i) z[i] += x[i] * y[i];
}

void matvec_avx2(const double* A, const double* x, double* y, std::size_t m, std::size_t n,
                 bool acc) {
    for (std::size_t i = 0; i < m; ++i) {
        double s = dot_avx2(A + i * n, x, n);
        y[i] = acc ? y[i] + s : s;
    }
}

void matvec_t_avx2(const double* A, const double* x, double* y, std::size_t m, std::size_t n,
                   bool acc) {
    if (!acc)
        for (std::size_t j = 0; j < n; ++j) y[j] = 0.0;
    for (std::size_t i = 0; i < m; ++i) axpy_avx2(x[i], A + i * n, y, n);
}

void ger_avx2(const double* x, const double* y, double* A, std::size_t m, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) axpy_avx2(x[i], y, A + i * n, n);
}

// 2 interleaved complex values per 256-bit vector
void cmul_had_acc_avx2(const double* a, const double* b, double* z, std::size_t n, bool conj_b) {
    std::size_t k = 0;
    for (; k + 2 <= n; k += 2) {
        __m256d va = _mm256_loadu_pd(a + 2 * k);
        __m256d vb = _mm256_loadu_pd(b + 2 * k);
        __m256d b_re = _mm256_movedup_pd(vb);           // [br0 br0 br1 br1]
        __m256d b_im = _mm256_permute_pd(vb, 0xF);      // [bi0 bi0 bi1 bi1]
        __m256d a_sw = _mm256_permute_pd(va, 0x5);      // [ai0 ar0 ai1 ar1]
        __m256d cross = _mm256_mul_pd(a_sw, b_im);
        // even lanes get re, odd lanes get im of a*b
        __m256d prod = conj_b ? _mm256_fmsubadd_pd(va, b_re, cross)
                              : _mm256_fmaddsub_pd(va, b_re, cross);
        _mm256_storeu_pd(z + 2 * k, _mm256_add_pd(_mm256_loadu_pd(z + 2 * k), prod));
    }
    for (; k < n; ++k) {
        double ar = a[2 * k], ai = a[2 * k + 1];
        double br = b[2 * k], bi = conj_b ? -b[2 * k + 1] : b[2 * k + 1];
        z[2 * k] += ar * br - ai * bi;
        z[2 * k + 1] += ar * bi + ai * br;
    }
}

double sum_avx2(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double s = hsum(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

}  // namespace

const Ops& avx2_ops_impl() {
    static const Ops k = {
        "avx2",       dot_avx2,      axpy_avx2, scal_avx2,         had_acc_avx2,
        matvec_avx2,  matvec_t_avx2, ger_avx2,  cmul_had_acc_avx2, sum_avx2,
    };
    return k;
}

}  // namespace kerl::kernels

#endif  // x86-64
