#pragma once

#include <cstddef>
#include <string>
#include <vector>

// Arithmetic inner loops used by every numeric module. Each operation has a
// scalar reference implementation and, where the hardware allows, a SIMD
// variant (AVX2+FMA on x86-64, NEON on aarch64). The backend is picked once
// at startup from CPUID, overridable with KERL_KERNELS=scalar|avx2|neon.
// SIMD variants reassociate reductions, so they match the scalar reference
// to rounding error, not bit-exactly; see tests/test_kernels.cpp.

namespace kerl::kernels {

struct Ops {
    const char* name;

    // sum_i a[i]*b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);
    // y[i] += alpha*x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // x[i] *= alpha
    void (*scal)(double alpha, double* x, std::size_t n);
    // z[i] += x[i]*y[i]
    void (*had_acc)(const double* x, const double* y, double* z, std::size_t n);
    // y = A x (acc=false) or y += A x (acc=true); A row-major m x n
    void (*matvec)(const double* A, const double* x, double* y, std::size_t m, std::size_t n,
                   bool acc);
    // y = A^T x or y += A^T x; A row-major m x n, x length m, y length n
    void (*matvec_t)(const double* A, const double* x, double* y, std::size_t m, std::size_t n,
                     bool acc);
    // A += x y^T; A row-major m x n
    void (*ger)(const double* x, const double* y, double* A, std::size_t m, std::size_t n);
    // interleaved complex: z[k] += a[k]*b[k], or a[k]*conj(b[k]); n complex elements
    void (*cmul_had_acc)(const double* a, const double* b, double* z, std::size_t n, bool conj_b);
    // sum_i x[i]
    double (*sum)(const double* x, std::size_t n);
};

// Backend selected for this process (stable for the process lifetime).
const Ops& ops();

const Ops& scalar_ops();

// All backends usable on this machine (scalar first); for equivalence tests.
std::vector<const Ops*> available_backends();

}  // namespace kerl::kernels
