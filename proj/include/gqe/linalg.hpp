#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace gqe::linalg {

struct SymmetricEigen {
    std::vector<double> eigenvalues;   // ascending
    std::vector<double> eigenvectors;  // column k at [i*n + k]
};

/// Dense symmetric eigensolver: Householder tridiagonalization followed by
/// implicit-shift QL. Input is the full n*n row-major matrix.
SymmetricEigen symmetric_eigen(std::vector<double> a, std::size_t n);

using MatVec = std::function<void(const double* x, double* y)>;

struct LanczosResult {
    double eigenvalue = 0.0;
    std::vector<double> eigenvector;
    double residual = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct LanczosError : std::runtime_error {
    LanczosError(const std::string& message, double best_residual)
        : std::runtime_error(message), residual(best_residual) {}
    double residual;
};

/// Smallest eigenpair via Lanczos with full reorthogonalization.
/// Converged when ||A v - lambda v|| < tol. Throws LanczosError (carrying the
/// best residual) if max_iter Krylov vectors are exhausted first.
LanczosResult lanczos_smallest(const MatVec& apply, std::size_t n, double tol = 1e-9,
                               int max_iter = 500, std::uint64_t seed = 0x5eed);

}  // namespace gqe::linalg
