#pragma once

#include <complex>
#include <cstdint>
#include <map>
#include <vector>

#include "gqe/pauli.hpp"

namespace gqe {

/// Dense complex amplitude vector over 2^n basis states, qubit 0 = LSB of the
/// basis index; basis index bit q is the occupation of spin orbital q.
struct Statevector {
    std::vector<std::complex<double>> amplitudes;
    unsigned n_qubits = 0;

    static constexpr unsigned kMaxQubits = 24;

    double norm_sq() const;
};

/// Measurement outcomes: determinant bitmask -> count. In exact mode the
/// "counts" are exact probabilities and total_shots sums to ~1.
struct MeasurementRecord {
    std::map<std::uint64_t, double> counts;
    double total_shots = 0.0;
    bool exact = false;
};

/// Computational basis state with the listed qubits set to 1.
Statevector prepare_reference(unsigned n_qubits, const std::vector<unsigned>& occupied);

/// state <- exp(-i*angle/2 * P) state, in place over amplitude pairs.
/// The term's coefficient is ignored (precondition: unit coefficient).
void apply_pauli_rotation(Statevector& state, const PauliTerm& term, double angle);
void apply_pauli_rotation(Statevector& state, const PauliString& paulis, double angle);

/// Re<psi|op|psi>; asserts the imaginary residue is < 1e-9 for Hermitian ops.
double expectation(const Statevector& state, const QubitOperator& op);

/// Multinomial draw from |amplitudes|^2, deterministic for a fixed seed.
MeasurementRecord sample(const Statevector& state, std::uint64_t n_shots, std::uint64_t rng_seed);

/// Noiseless alternative: every basis state with probability >= p_floor.
MeasurementRecord exact_distribution(const Statevector& state, double p_floor = 1e-12);

}  // namespace gqe
