#pragma once

// Brute-force oracles for tests. Everything here recomputes results through
// dense matrices or direct enumeration, independent of the library kernels
// under test.

#include <algorithm>
#include <array>
#include <bit>
#include <cassert>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "gqe/fermion.hpp"
#include "gqe/pauli.hpp"
#include "gqe/statevector.hpp"

namespace oracle {

using Complex = std::complex<double>;
using CVec = std::vector<Complex>;

/// Row-major dense complex matrix.
struct CMat {
    std::size_t n = 0;
    CVec a;
    CMat() = default;
    explicit CMat(std::size_t dim) : n(dim), a(dim * dim, Complex{0, 0}) {}
    Complex& at(std::size_t i, std::size_t j) { return a[i * n + j]; }
    const Complex& at(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

inline CMat matmul(const CMat& x, const CMat& y) {
    CMat z(x.n);
    for (std::size_t i = 0; i < x.n; ++i)
        for (std::size_t k = 0; k < x.n; ++k) {
            Complex v = x.at(i, k);
            if (v == Complex{0, 0}) continue;
            for (std::size_t j = 0; j < x.n; ++j) z.at(i, j) += v * y.at(k, j);
        }
    return z;
}

inline CVec mat_apply(const CMat& m, const CVec& v) {
    CVec out(m.n, Complex{0, 0});
    for (std::size_t i = 0; i < m.n; ++i)
        for (std::size_t j = 0; j < m.n; ++j) out[i] += m.at(i, j) * v[j];
    return out;
}

/// Dense 2^n x 2^n matrix of a Pauli string (qubit 0 = LSB of the index).
inline CMat pauli_matrix(const gqe::PauliString& s, unsigned n_qubits) {
    const Complex I{0, 1};
    auto single = [&](unsigned q) -> std::array<Complex, 4> {
        auto it = s.find(q);
        if (it == s.end()) return {Complex{1, 0}, {0, 0}, {0, 0}, {1, 0}};
        switch (it->second) {
            case gqe::Pauli::X: return {Complex{0, 0}, {1, 0}, {1, 0}, {0, 0}};
            case gqe::Pauli::Y: return {Complex{0, 0}, -I, I, {0, 0}};
            default: return {Complex{1, 0}, {0, 0}, {0, 0}, {-1, 0}};
        }
    };
    CMat m(1);
    m.at(0, 0) = 1.0;
    for (int q = static_cast<int>(n_qubits) - 1; q >= 0; --q) {
        auto g = single(static_cast<unsigned>(q));
        CMat next(m.n * 2);
        for (std::size_t i = 0; i < m.n; ++i)
            for (std::size_t j = 0; j < m.n; ++j) {
                if (m.at(i, j) == Complex{0, 0}) continue;
                for (int bi = 0; bi < 2; ++bi)
                    for (int bj = 0; bj < 2; ++bj)
                        next.at(i * 2 + bi, j * 2 + bj) = m.at(i, j) * g[bi * 2 + bj];
            }
        m = std::move(next);
    }
    return m;
}

inline CMat dense_operator(const gqe::QubitOperator& op, unsigned n_qubits) {
    CMat m(std::size_t(1) << n_qubits);
    for (const auto& [paulis, coeff] : op.terms()) {
        CMat p = pauli_matrix(paulis, n_qubits);
        for (std::size_t i = 0; i < m.a.size(); ++i) m.a[i] += coeff * p.a[i];
    }
    return m;
}

/// exp(M) v by plain Taylor on the vector.
inline CVec expm_apply(const CMat& m, CVec v, int max_terms = 80) {
    CVec acc = v;
    for (int k = 1; k <= max_terms; ++k) {
        v = mat_apply(m, v);
        double biggest = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] /= static_cast<double>(k);
            acc[i] += v[i];
            biggest = std::max(biggest, std::abs(v[i]));
        }
        if (biggest < 1e-16) break;
    }
    return acc;
}

/// All bitmasks over n_so bits with the requested electron count and ms2
/// (interleaved spin convention), ascending.
inline std::vector<std::uint64_t> sector_masks(unsigned n_so, unsigned n_electrons, int ms2) {
    std::vector<std::uint64_t> out;
    const std::uint64_t alpha = 0x5555555555555555ull;
    for (std::uint64_t bits = 0; bits < (std::uint64_t(1) << n_so); ++bits) {
        if (std::popcount(bits) != static_cast<int>(n_electrons)) continue;
        int m = std::popcount(bits & alpha) - std::popcount(bits & ~alpha);
        if (m == ms2) out.push_back(bits);
    }
    return out;
}

/// Dense operator restricted to the listed basis states: out[i][j] = <b_i|M|b_j>.
inline std::vector<double> restrict_real(const CMat& m, const std::vector<std::uint64_t>& basis,
                                         double imag_tol = 1e-10) {
    std::vector<double> out(basis.size() * basis.size());
    for (std::size_t i = 0; i < basis.size(); ++i)
        for (std::size_t j = 0; j < basis.size(); ++j) {
            Complex v = m.at(basis[i], basis[j]);
            assert(std::abs(v.imag()) < imag_tol);
            out[i * basis.size() + j] = v.real();
        }
    return out;
}

inline CVec to_cvec(const gqe::Statevector& s) { return s.amplitudes; }

inline double fidelity_distance(const CVec& a, const CVec& b) {
    // min over global phase of ||a - e^{i phi} b||_inf
    Complex overlap{0, 0};
    for (std::size_t i = 0; i < a.size(); ++i) overlap += std::conj(b[i]) * a[i];
    Complex phase = std::abs(overlap) > 1e-14 ? overlap / std::abs(overlap) : Complex{1, 0};
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a[i] - phase * b[i]));
    return worst;
}

inline gqe::Statevector random_state(unsigned n_qubits, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    gqe::Statevector s;
    s.n_qubits = n_qubits;
    s.amplitudes.resize(std::size_t(1) << n_qubits);
    double nrm = 0.0;
    for (auto& a : s.amplitudes) {
        a = {gauss(rng), gauss(rng)};
        nrm += std::norm(a);
    }
    nrm = std::sqrt(nrm);
    for (auto& a : s.amplitudes) a /= nrm;
    return s;
}

/// Central finite difference of a scalar function.
inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-5) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace oracle
