#include "gqe/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>

namespace gqe::linalg {

namespace {

double hypot2(double a, double b) { return std::sqrt(a * a + b * b); }

// Householder reduction of a (row-major, symmetric) to tridiagonal form.
// On exit a holds the accumulated orthogonal transform Q (column-major per
// the classic tred2 convention: z[i*n+k] is component i of vector k).
void tridiagonalize(std::vector<double>& a, std::size_t n, std::vector<double>& d,
                    std::vector<double>& e) {
    d.assign(n, 0.0);
    e.assign(n, 0.0);
    for (std::size_t i = n - 1; i > 0; --i) {
        std::size_t l = i - 1;
        double h = 0.0, scale = 0.0;
        if (l > 0) {
            for (std::size_t k = 0; k <= l; ++k) scale += std::abs(a[i * n + k]);
            if (scale == 0.0) {
                e[i] = a[i * n + l];
            } else {
                for (std::size_t k = 0; k <= l; ++k) {
                    a[i * n + k] /= scale;
                    h += a[i * n + k] * a[i * n + k];
                }
                double f = a[i * n + l];
                double g = f >= 0.0 ? -std::sqrt(h) : std::sqrt(h);
                e[i] = scale * g;
                h -= f * g;
                a[i * n + l] = f - g;
                f = 0.0;
                for (std::size_t j = 0; j <= l; ++j) {
                    a[j * n + i] = a[i * n + j] / h;
                    g = 0.0;
                    for (std::size_t k = 0; k <= j; ++k) g += a[j * n + k] * a[i * n + k];
                    for (std::size_t k = j + 1; k <= l; ++k) g += a[k * n + j] * a[i * n + k];
                    e[j] = g / h;
                    f += e[j] * a[i * n + j];
                }
                double hh = f / (h + h);
                for (std::size_t j = 0; j <= l; ++j) {
                    f = a[i * n + j];
                    e[j] = g = e[j] - hh * f;
                    for (std::size_t k = 0; k <= j; ++k)
                        a[j * n + k] -= f * e[k] + g * a[i * n + k];
                }
            }
        } else {
            e[i] = a[i * n + l];
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t l = i;
        if (d[i] != 0.0) {
            for (std::size_t j = 0; j < l; ++j) {
                double g = 0.0;
                for (std::size_t k = 0; k < l; ++k) g += a[i * n + k] * a[k * n + j];
                for (std::size_t k = 0; k < l; ++k) a[k * n + j] -= g * a[k * n + i];
            }
        }
        d[i] = a[i * n + i];
        a[i * n + i] = 1.0;
        for (std::size_t j = 0; j < l; ++j) a[j * n + i] = a[i * n + j] = 0.0;
    }
}

// Implicit-shift QL on a tridiagonal (d, e); z accumulates eigenvectors.
void tql_implicit(std::vector<double>& d, std::vector<double>& e, std::vector<double>& z,
                  std::size_t n) {
    for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        int iter = 0;
        std::size_t m;
        do {
            for (m = l; m + 1 < n; ++m) {
                double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= 1e-300 || std::abs(e[m]) <= 2.3e-16 * dd) break;
            }
            if (m != l) {
                if (++iter > 50) throw std::runtime_error("symmetric_eigen: QL did not converge");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = hypot2(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::abs(r) : -std::abs(r)));
                double s = 1.0, c = 1.0, p = 0.0;
                for (std::size_t i = m; i-- > l;) {
                    double f = s * e[i];
                    double b = c * e[i];
                    r = hypot2(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    for (std::size_t k = 0; k < n; ++k) {
                        f = z[k * n + i + 1];
                        z[k * n + i + 1] = s * z[k * n + i] + c * f;
                        z[k * n + i] = c * z[k * n + i] - s * f;
                    }
                }
                if (r == 0.0 && m - l > 1) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
}

}  // namespace

SymmetricEigen symmetric_eigen(std::vector<double> a, std::size_t n) {
    if (n == 0) return {};
    if (a.size() != n * n) throw std::invalid_argument("symmetric_eigen: bad matrix size");
    if (n == 1) return {{a[0]}, {1.0}};

    std::vector<double> d, e;
    tridiagonalize(a, n, d, e);
    tql_implicit(d, e, a, n);

    // Sort ascending, permuting eigenvector columns.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return d[x] < d[y];
    });
    SymmetricEigen out;
    out.eigenvalues.resize(n);
    out.eigenvectors.resize(n * n);
    for (std::size_t k = 0; k < n; ++k) {
        out.eigenvalues[k] = d[order[k]];
        for (std::size_t i = 0; i < n; ++i) out.eigenvectors[i * n + k] = a[i * n + order[k]];
    }
    return out;
}

LanczosResult lanczos_smallest(const MatVec& apply, std::size_t n, double tol, int max_iter,
                               std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("lanczos_smallest: empty problem");
    max_iter = std::min<int>(max_iter, static_cast<int>(n));

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::vector<double>> basis;  // orthonormal Krylov vectors
    std::vector<double> alpha, beta;

    std::vector<double> v(n);
    for (auto& x : v) x = gauss(rng);
    double nrm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    for (auto& x : v) x /= nrm;
    basis.push_back(v);

    std::vector<double> w(n);
    double best_residual = std::numeric_limits<double>::infinity();
    LanczosResult result;

    for (int k = 0; k < max_iter; ++k) {
        apply(basis[k].data(), w.data());
        double a_k = std::inner_product(w.begin(), w.end(), basis[k].begin(), 0.0);
        alpha.push_back(a_k);

        // Full reorthogonalization, twice for stability.
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& q : basis) {
                double proj = std::inner_product(w.begin(), w.end(), q.begin(), 0.0);
                for (std::size_t i = 0; i < n; ++i) w[i] -= proj * q[i];
            }

        // Solve the (k+1)x(k+1) tridiagonal Ritz problem.
        std::size_t m = alpha.size();
        std::vector<double> t(m * m, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            t[i * m + i] = alpha[i];
            if (i + 1 < m) t[i * m + i + 1] = t[(i + 1) * m + i] = beta[i];
        }
        auto eig = symmetric_eigen(std::move(t), m);
        std::vector<double> ritz(n, 0.0);
        for (std::size_t j = 0; j < m; ++j) {
            double c = eig.eigenvectors[j * m + 0];
            for (std::size_t i = 0; i < n; ++i) ritz[i] += c * basis[j][i];
        }
        double lambda = eig.eigenvalues[0];
        std::vector<double> hr(n);
        apply(ritz.data(), hr.data());
        double res = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double r = hr[i] - lambda * ritz[i];
            res += r * r;
        }
        res = std::sqrt(res);
        if (res < best_residual) {
            best_residual = res;
            result.eigenvalue = lambda;
            result.eigenvector = ritz;
        }
        result.iterations = k + 1;
        if (res < tol) {
            result.residual = res;
            result.converged = true;
            return result;
        }

        double b_k = std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0));
        if (b_k < 1e-14) {
            // Krylov space exhausted; the Ritz pair of an invariant subspace is exact.
            result.residual = res;
            result.converged = res < tol;
            if (result.converged) return result;
            break;
        }
        beta.push_back(b_k);
        for (auto& x : w) x /= b_k;
        basis.push_back(w);
    }
    throw LanczosError("lanczos_smallest: no convergence after " +
                           std::to_string(result.iterations) + " iterations",
                       best_residual);
}

}  // namespace gqe::linalg
