#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "gqe/linalg.hpp"

using namespace gqe::linalg;

namespace {

std::vector<double> random_symmetric(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> a(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) a[i * n + j] = a[j * n + i] = gauss(rng);
    return a;
}

}  // namespace

TEST_CASE("symmetric_eigen on a hand 2x2") {
    // [[2,1],[1,2]] -> eigenvalues 1, 3
    auto eig = symmetric_eigen({2, 1, 1, 2}, 2);
    CHECK(eig.eigenvalues[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(eig.eigenvalues[1] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("symmetric_eigen residuals and orthonormality") {
    for (std::size_t n : {3u, 8u, 25u, 60u}) {
        auto a = random_symmetric(n, 1000 + n);
        auto eig = symmetric_eigen(a, n);
        for (std::size_t k = 0; k < n; ++k) {
            double res = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double av = 0.0;
                for (std::size_t j = 0; j < n; ++j)
                    av += a[i * n + j] * eig.eigenvectors[j * n + k];
                double r = av - eig.eigenvalues[k] * eig.eigenvectors[i * n + k];
                res += r * r;
            }
            CHECK(std::sqrt(res) < 1e-9);
        }
        // trace identity
        double trace = 0.0, esum = 0.0;
        for (std::size_t i = 0; i < n; ++i) trace += a[i * n + i];
        for (double v : eig.eigenvalues) esum += v;
        CHECK(trace == doctest::Approx(esum).epsilon(1e-10));
        // ascending
        for (std::size_t k = 1; k < n; ++k)
            CHECK(eig.eigenvalues[k - 1] <= eig.eigenvalues[k] + 1e-12);
    }
}

TEST_CASE("lanczos_smallest matches dense on random matrices") {
    for (std::size_t n : {80u, 200u}) {
        auto a = random_symmetric(n, 42 + n);
        auto matvec = [&](const double* x, double* y) {
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) acc += a[i * n + j] * x[j];
                y[i] = acc;
            }
        };
        auto dense = symmetric_eigen(a, n);
        auto lz = lanczos_smallest(matvec, n, 1e-9, 500);
        CHECK(lz.converged);
        CHECK(lz.eigenvalue == doctest::Approx(dense.eigenvalues[0]).epsilon(1e-8));
        CHECK(lz.residual < 1e-9);
    }
}

TEST_CASE("lanczos on a diagonal matrix with degenerate ground level") {
    const std::size_t n = 100;
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = (i < 2) ? -5.0 : static_cast<double>(i);
    auto matvec = [&](const double* x, double* y) {
        for (std::size_t i = 0; i < n; ++i) y[i] = d[i] * x[i];
    };
    auto lz = lanczos_smallest(matvec, n, 1e-9, 500);
    CHECK(lz.eigenvalue == doctest::Approx(-5.0).epsilon(1e-9));
}
