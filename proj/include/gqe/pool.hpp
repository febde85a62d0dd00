#pragma once

#include <span>
#include <vector>

#include "gqe/fermion.hpp"
#include "gqe/pauli.hpp"

namespace gqe {

/// Anti-Hermitian UCCSD excitation generator G = T - T^dagger together with
/// its Jordan-Wigner image i * sum_m c_m P_m (real c_m, mutually commuting P_m).
struct ExcitationGenerator {
    enum class Kind { Single, Double };

    Kind kind;
    std::vector<unsigned> annihilated;  // occupied spin orbitals, ascending
    std::vector<unsigned> created;      // virtual spin orbitals, ascending
    FermionOperator generator;
    std::vector<std::pair<double, PauliString>> qubit_terms;
    unsigned n_qubits = 0;
};

/// All spin-conserving singles (occ -> virt, same spin) and Sz-preserving
/// doubles over distinct pairs, deduplicated, singles first, each group in
/// lexicographic orbital order. The reference fills the lowest n_electrons
/// spin orbitals in interleaved order.
std::vector<ExcitationGenerator> enumerate_uccsd(unsigned n_spatial, unsigned n_electrons);

/// Same pool over an explicit reference occupation (for sectors whose
/// reference is not the first-n filling).
std::vector<ExcitationGenerator> enumerate_uccsd(unsigned n_spatial,
                                                 const Determinant& reference);

/// Token vocabulary: Cartesian product generators x angle grid, generator-major.
/// Token ids run 0..|G|-1; the start token is |G| and is never emitted.
class Vocabulary {
  public:
    Vocabulary() = default;
    Vocabulary(std::vector<ExcitationGenerator> generators, std::vector<double> angle_grid);

    int size() const { return static_cast<int>(generators_.size() * angle_grid_.size()); }
    int start_token() const { return size(); }
    std::pair<int, double> token(int id) const;  // (generator index, angle)
    int token_id(int generator_index, int angle_index) const;

    const std::vector<ExcitationGenerator>& generators() const { return generators_; }
    const std::vector<double>& angle_grid() const { return angle_grid_; }
    unsigned n_qubits() const { return n_qubits_; }

  private:
    std::vector<ExcitationGenerator> generators_;
    std::vector<double> angle_grid_;
    unsigned n_qubits_ = 0;
};

inline Vocabulary build_vocabulary(std::vector<ExcitationGenerator> generators,
                                   std::vector<double> angle_grid) {
    return Vocabulary(std::move(generators), std::move(angle_grid));
}

struct RotationGate {
    PauliString paulis;
    double angle;
};

/// Exact compilation: product of the rotations equals exp(theta * G) because
/// the JW terms of one excitation mutually commute.
std::vector<RotationGate> compile_token(const Vocabulary& vocab, int token);
std::vector<RotationGate> compile_sequence(const Vocabulary& vocab, std::span<const int> tokens);

struct GateCountReport {
    long two_qubit = 0;        // CX
    long single_rotation = 0;  // arbitrary-angle single-qubit rotations
    long clifford = 0;         // single-qubit Cliffords (basis changes)
    long total = 0;
};

/// Per rotation of weight w: 2(w-1) CX, one Rz, and two Cliffords per X/Y letter.
GateCountReport count_gates(std::span<const int> tokens, const Vocabulary& vocab);
GateCountReport count_gates(const std::vector<RotationGate>& gates);

}  // namespace gqe
