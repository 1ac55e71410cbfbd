#include <doctest.h>

#include <cmath>
#include <vector>

#include "kerl/kernels.hpp"
#include "kerl/rng.hpp"
#include "kerl/tensor.hpp"

using namespace kerl;

namespace {

// SIMD reductions reassociate, so backends agree to rounding error only.
bool close(double a, double b, double tol = 1e-12) {
    return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

Vec rand_vec(std::size_t n, Rng& rng) {
    Vec v(n);
    for (double& x : v) x = rng.uniform(-2.0, 2.0);
    return v;
}

const std::vector<std::size_t> kLens{0, 1, 2, 3, 4, 5, 7, 8, 9, 15, 16, 17, 31, 32, 33, 100};

}  // namespace

TEST_CASE("kernels: scalar backend is always available and listed first") {
    const auto backends = kernels::available_backends();
    REQUIRE(!backends.empty());
    CHECK(std::string(backends.front()->name) == "scalar");
    CHECK(std::string(kernels::scalar_ops().name) == "scalar");
    // the active backend is one of the listed ones
    bool found = false;
    for (const auto* b : backends)
        if (std::string(b->name) == kernels::ops().name) found = true;
    CHECK(found);
}

TEST_CASE("kernels: dot hand oracle") {
    const double a[] = {1.0, 2.0, 3.0};
    const double b[] = {4.0, 5.0, 6.0};
    for (const auto* ops : kernels::available_backends())
        CHECK(ops->dot(a, b, 3) == doctest::Approx(32.0).epsilon(1e-15));
}

TEST_CASE("kernels: elementwise ops match the scalar reference at all lengths") {
    Rng rng(41);
    const auto& ref = kernels::scalar_ops();
    for (const auto* ops : kernels::available_backends()) {
        for (std::size_t n : kLens) {
            const Vec x = rand_vec(n, rng);
            const Vec y = rand_vec(n, rng);

            CHECK(close(ops->dot(x.data(), y.data(), n), ref.dot(x.data(), y.data(), n)));
            CHECK(close(ops->sum(x.data(), n), ref.sum(x.data(), n)));

            Vec a = y, b = y;
            ops->axpy(1.7, x.data(), a.data(), n);
            ref.axpy(1.7, x.data(), b.data(), n);
            for (std::size_t i = 0; i < n; ++i) CHECK(close(a[i], b[i]));

            a = x;
            b = x;
            ops->scal(-0.3, a.data(), n);
            ref.scal(-0.3, b.data(), n);
            for (std::size_t i = 0; i < n; ++i) CHECK(close(a[i], b[i]));

            a = y;
            b = y;
            ops->had_acc(x.data(), y.data(), a.data(), n);
            ref.had_acc(x.data(), y.data(), b.data(), n);
            for (std::size_t i = 0; i < n; ++i) CHECK(close(a[i], b[i]));
        }
    }
}

TEST_CASE("kernels: matvec / matvec_t / ger match the scalar reference") {
    Rng rng(42);
    const auto& ref = kernels::scalar_ops();
    const std::vector<std::pair<std::size_t, std::size_t>> shapes{
        {1, 1}, {2, 3}, {4, 4}, {5, 7}, {8, 16}, {17, 5}, {3, 33}};
    for (const auto* ops : kernels::available_backends()) {
        for (auto [m, n] : shapes) {
            const Vec A = rand_vec(m * n, rng);
            const Vec x = rand_vec(n, rng);
            const Vec xt = rand_vec(m, rng);
            const Vec y0m = rand_vec(m, rng);
            const Vec y0n = rand_vec(n, rng);

            for (bool acc : {false, true}) {
                Vec a = y0m, b = y0m;
                ops->matvec(A.data(), x.data(), a.data(), m, n, acc);
                ref.matvec(A.data(), x.data(), b.data(), m, n, acc);
                for (std::size_t i = 0; i < m; ++i) CHECK(close(a[i], b[i]));

                Vec c = y0n, d = y0n;
                ops->matvec_t(A.data(), xt.data(), c.data(), m, n, acc);
                ref.matvec_t(A.data(), xt.data(), d.data(), m, n, acc);
                for (std::size_t i = 0; i < n; ++i) CHECK(close(c[i], d[i]));
            }

            Vec Ga = A, Gb = A;
            ops->ger(xt.data(), x.data(), Ga.data(), m, n);
            ref.ger(xt.data(), x.data(), Gb.data(), m, n);
            for (std::size_t i = 0; i < m * n; ++i) CHECK(close(Ga[i], Gb[i]));
        }
    }
}

TEST_CASE("kernels: matvec oracle and accumulate flag") {
    // [[1,2],[3,4]] * [5,6] = [17,39]
    const double A[] = {1, 2, 3, 4};
    const double x[] = {5, 6};
    for (const auto* ops : kernels::available_backends()) {
        double y[2] = {100, 200};
        ops->matvec(A, x, y, 2, 2, false);
        CHECK(y[0] == doctest::Approx(17));
        CHECK(y[1] == doctest::Approx(39));
        ops->matvec(A, x, y, 2, 2, true);
        CHECK(y[0] == doctest::Approx(34));
        CHECK(y[1] == doctest::Approx(78));

        // A^T * [1,1] = [4,6]
        double z[2] = {0, 0};
        const double ones[] = {1, 1};
        ops->matvec_t(A, ones, z, 2, 2, false);
        CHECK(z[0] == doctest::Approx(4));
        CHECK(z[1] == doctest::Approx(6));
    }
}

TEST_CASE("kernels: ger rank-1 oracle") {
    for (const auto* ops : kernels::available_backends()) {
        double A[6] = {0};
        const double x[] = {1, 2};       // m = 2
        const double y[] = {3, 4, 5};    // n = 3
        ops->ger(x, y, A, 2, 3);
        const double want[] = {3, 4, 5, 6, 8, 10};
        for (int i = 0; i < 6; ++i) CHECK(A[i] == doctest::Approx(want[i]));
    }
}

TEST_CASE("kernels: complex hadamard accumulate with and without conjugation") {
    Rng rng(43);
    const auto& ref = kernels::scalar_ops();
    for (const auto* ops : kernels::available_backends()) {
        for (std::size_t n : {1u, 2u, 3u, 4u, 8u, 9u, 17u}) {
            const Vec a = rand_vec(2 * n, rng);
            const Vec b = rand_vec(2 * n, rng);
            const Vec z0 = rand_vec(2 * n, rng);
            for (bool conj : {false, true}) {
                Vec za = z0, zb = z0;
                ops->cmul_had_acc(a.data(), b.data(), za.data(), n, conj);
                ref.cmul_had_acc(a.data(), b.data(), zb.data(), n, conj);
                for (std::size_t i = 0; i < 2 * n; ++i) CHECK(close(za[i], zb[i]));
            }
        }
    }
}

TEST_CASE("kernels: complex hadamard oracle (1+2i)(3+4i)") {
    for (const auto* ops : kernels::available_backends()) {
        double z[2] = {0, 0};
        const double a[] = {1, 2};
        const double b[] = {3, 4};
        ops->cmul_had_acc(a, b, z, 1, false);
        CHECK(z[0] == doctest::Approx(-5));  // 3 - 8
        CHECK(z[1] == doctest::Approx(10));  // 4 + 6
        double zc[2] = {0, 0};
        ops->cmul_had_acc(a, b, zc, 1, true);  // (1+2i)(3-4i) = 11 + 2i
        CHECK(zc[0] == doctest::Approx(11));
        CHECK(zc[1] == doctest::Approx(2));
    }
}
