#pragma once

#include <complex>
#include <cstdint>
#include <map>
#include <string>

namespace gqe {

enum class Pauli : std::uint8_t { X, Y, Z };

/// Sparse Pauli string: qubit index -> letter, identity everywhere else.
using PauliString = std::map<unsigned, Pauli>;

struct PauliTerm {
    std::complex<double> coefficient{1.0, 0.0};
    PauliString paulis;
    unsigned n_qubits = 0;

    unsigned weight() const { return static_cast<unsigned>(paulis.size()); }
    std::string to_string() const;
};

/// Product of two single-qubit Paulis: returns (phase, letter), letter absent for identity.
/// X*Y = iZ, Y*Z = iX, Z*X = iY, P*P = I.
std::pair<std::complex<double>, bool> multiply_single(Pauli a, Pauli b, Pauli& out);

/// String product a*b with accumulated phase.
std::pair<std::complex<double>, PauliString> multiply_strings(const PauliString& a,
                                                              const PauliString& b);

std::string pauli_string_to_text(const PauliString& s);

/// Linear combination of Pauli strings, canonicalized: one entry per string,
/// terms below the merge epsilon dropped on compress().
class QubitOperator {
  public:
    static constexpr double kMergeEpsilon = 1e-12;

    QubitOperator() = default;
    explicit QubitOperator(unsigned n_qubits) : n_qubits_(n_qubits) {}

    void add(std::complex<double> coefficient, const PauliString& paulis);
    void add(const PauliTerm& term) { add(term.coefficient, term.paulis); }
    QubitOperator& operator+=(const QubitOperator& other);

    /// Drops terms with |coefficient| < eps.
    void compress(double eps = kMergeEpsilon);

    const std::map<PauliString, std::complex<double>>& terms() const { return terms_; }
    std::size_t size() const { return terms_.size(); }
    unsigned n_qubits() const { return n_qubits_; }
    void set_n_qubits(unsigned n) { n_qubits_ = n; }

    std::complex<double> coefficient_of(const PauliString& s) const;
    double max_abs_imag() const;
    bool is_hermitian(double tol = kMergeEpsilon) const { return max_abs_imag() < tol; }

    std::string to_string() const;

  private:
    std::map<PauliString, std::complex<double>> terms_;
    unsigned n_qubits_ = 0;
};

}  // namespace gqe
