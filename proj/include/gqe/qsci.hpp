#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "gqe/fermion.hpp"
#include "gqe/statevector.hpp"

namespace gqe {

struct Sector {
    unsigned n_electrons = 0;
    int ms2 = 0;
};

enum class Provenance { FrequencyRanked, SymmetryCompleted, ExactSector };

struct SubspaceSelection {
    std::vector<Determinant> determinants;
    std::size_t d_max = 0;
    Provenance provenance = Provenance::FrequencyRanked;
};

struct EmptySubspaceError : std::runtime_error {
    EmptySubspaceError() : std::runtime_error("no in-sector determinants were sampled") {}
};

/// Sector-filter sampled bitstrings, rank by count (descending, ties by
/// ascending bitstring value), optionally extend with the Cartesian product of
/// observed alpha x beta strings (completions ranked after originals), then
/// truncate to d_max. Throws EmptySubspaceError when nothing survives.
SubspaceSelection select_subspace(const MeasurementRecord& record, std::size_t d_max,
                                  Sector sector, unsigned n_spin_orbitals,
                                  bool complete_symmetry);

/// <bra|H|ket> by the Slater-Condon rules; fermionic phases follow the
/// occupied-orbitals-below convention (matching the Jordan-Wigner encoding).
double slater_condon_element(const MolecularIntegrals& ints, const Determinant& bra,
                             const Determinant& ket);

struct SubspaceResult {
    double energy = 0.0;
    std::vector<double> ground_vector;
    std::size_t dimension = 0;
};

/// Dense symmetric solve for d <= 64, Lanczos (full reorthogonalization,
/// residual < 1e-9, <= 500 iterations) above; falls back to dense for
/// d <= 4096 if Lanczos fails to converge.
SubspaceResult solve_subspace(const MolecularIntegrals& ints,
                              const SubspaceSelection& selection);

std::vector<Determinant> enumerate_sector(unsigned n_spin_orbitals, Sector sector);

/// Exact diagonalization over the full sector; the error baseline.
double casci_reference(const MolecularIntegrals& ints, Sector sector);

inline double reward(const SubspaceResult& result) { return -result.energy; }

}  // namespace gqe
