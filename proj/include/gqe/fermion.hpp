#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "gqe/pauli.hpp"

namespace gqe {

// Spin-orbital convention used throughout: interleaved (a,b,a,b,...),
// spin orbital for spatial p and spin s in {0=alpha,1=beta} is 2p+s,
// and qubit q == spin orbital q.
inline unsigned spin_orbital(unsigned spatial, unsigned spin) { return 2 * spatial + spin; }
inline unsigned spatial_of(unsigned so) { return so / 2; }
inline unsigned spin_of(unsigned so) { return so % 2; }

/// One-/two-electron integrals in chemist notation (ij|kl), spatial-orbital
/// indices, 8-fold permutation symmetry stored via a canonical representative.
struct MolecularIntegrals {
    unsigned n_orbitals = 0;
    unsigned n_electrons = 0;
    int ms2 = 0;
    double core_energy = 0.0;

    double one_body(unsigned i, unsigned j) const;
    double two_body(unsigned i, unsigned j, unsigned k, unsigned l) const;
    void set_one_body(unsigned i, unsigned j, double value);
    void set_two_body(unsigned i, unsigned j, unsigned k, unsigned l, double value);

    unsigned n_spin_orbitals() const { return 2 * n_orbitals; }
    unsigned n_alpha() const { return (n_electrons + ms2) / 2; }
    unsigned n_beta() const { return (n_electrons - ms2) / 2; }

    const std::unordered_map<std::uint64_t, double>& two_body_entries() const { return h2_; }
    const std::vector<double>& one_body_matrix() const { return h1_; }
    void resize(unsigned n_orbitals);

  private:
    std::vector<double> h1_;                            // K*K row-major
    std::unordered_map<std::uint64_t, double> h2_;      // canonical key -> value
};

/// Occupation bitmask over 2K spin orbitals; bit q set <=> spin orbital q occupied.
struct Determinant {
    std::uint64_t bits = 0;
    unsigned n_spin_orbitals = 0;

    bool occupied(unsigned q) const { return (bits >> q) & 1u; }
    unsigned electron_count() const;
    int ms2() const;  // n_alpha - n_beta under the interleaved convention
    auto operator<=>(const Determinant&) const = default;
};

struct FermionFactor {
    unsigned index;  // spin orbital
    bool create;
};

struct FermionTerm {
    std::complex<double> coefficient;
    std::vector<FermionFactor> factors;  // applied right-to-left to a ket
};

/// Sum of creation/annihilation monomials.
class FermionOperator {
  public:
    void add_term(std::complex<double> coefficient, std::vector<FermionFactor> factors);
    const std::vector<FermionTerm>& terms() const { return terms_; }
    FermionOperator adjoint() const;
    FermionOperator& operator+=(const FermionOperator& other);
    FermionOperator& operator-=(const FermionOperator& other);
    unsigned max_index() const;

  private:
    std::vector<FermionTerm> terms_;
};

struct ParseError : std::runtime_error {
    ParseError(const std::string& message, int line)
        : std::runtime_error("line " + std::to_string(line) + ": " + message), line_number(line) {}
    int line_number;
};

/// Molpro FCIDUMP reader. Body lines are `value i j k l`, 1-based;
/// `v i j 0 0` fills h1, `v 0 0 0 0` sets the core energy, `v i 0 0 0`
/// (orbital energies) is accepted and ignored. ORBSYM/ISYM are parsed
/// but ignored.
MolecularIntegrals parse_fcidump(std::istream& in);
MolecularIntegrals parse_fcidump_file(const std::string& path);

/// Emitter matching parse_fcidump: %.16E values, 1-based indices, one entry
/// per line (two-body block, then one-body, then core energy).
void write_fcidump(const MolecularIntegrals& ints, std::ostream& out);

/// Open-boundary Hubbard chain at half filling: h1[i][i+1] = -t, (ii|ii) = u.
MolecularIntegrals build_hubbard(unsigned n_sites, double t, double u);

/// H = E_core + sum h1[p][q] a+_{ps} a_{qs} + 1/2 sum (pq|rs) a+_{ps} a+_{rt} a_{st} a_{qs}.
FermionOperator second_quantized_hamiltonian(const MolecularIntegrals& ints);

/// a_p -> (prod_{q<p} Z_q)(X_p + iY_p)/2, products expanded and canonicalized.
QubitOperator jordan_wigner(const FermionOperator& op, unsigned n_qubits);

}  // namespace gqe
