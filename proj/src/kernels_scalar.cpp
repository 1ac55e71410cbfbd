#include "kerl/kernels.hpp"

// Reference implementations. Every SIMD backend is equivalence-tested
// against these.

namespace kerl::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scal_scalar(double alpha, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void had_acc_scalar(const double* x, const double* y, double* z, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) z[i] += x[i] * y[i];
}

void matvec_scalar(const double* A, const double* x, double* y, std::size_t m, std::size_t n,
                   bool acc) {
    for (std::size_t i = 0; i < m; ++i) {
        double s = dot_scalar(A + i * n, x, n);
        y[i] = acc ? y[i] + s : s;
    }
}

void matvec_t_scalar(const double* A, const double* x, double* y, std::size_t m, std::size_t n,
                     bool acc) {
    if (!acc)
        for (std::size_t j = 0; j < n; ++j) y[j] = 0.0;
    for (std::size_t i = 0; i < m; ++i) axpy_scalar(x[i], A + i * n, y, n);
}

void ger_scalar(const double* x, const double* y, double* A, std::size_t m, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) axpy_scalar(x[i], y, A + i * n, n);
}

void cmul_had_acc_scalar(const double* a, const double* b, double* z, std::size_t n, bool conj_b) {
    for (std::size_t k = 0; k < n; ++k) {
        double ar = a[2 * k], ai = a[2 * k + 1];
        double br = b[2 * k], bi = conj_b ? -b[2 * k + 1] : b[2 * k + 1];
        z[2 * k] += ar * br - ai * bi;
        z[2 * k + 1] += ar * bi + ai * br;
    }
}

double sum_scalar(const double* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops k = {
        "scalar",       dot_scalar, axpy_scalar,         scal_scalar, had_acc_scalar,
        matvec_scalar,  matvec_t_scalar, ger_scalar,     cmul_had_acc_scalar, sum_scalar,
    };
    return k;
}

}  // namespace kerl::kernels
