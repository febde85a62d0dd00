#include "gqe/pauli.hpp"

#include <cmath>
#include <sstream>

namespace gqe {

namespace {
constexpr std::complex<double> kI{0.0, 1.0};
}

std::pair<std::complex<double>, bool> multiply_single(Pauli a, Pauli b, Pauli& out) {
    if (a == b) return {1.0, false};  // identity
    // cyclic: XY=iZ, YZ=iX, ZX=iY; reversed order picks up a minus sign
    auto third = [](Pauli p, Pauli q) {
        int missing = 3 - static_cast<int>(p) - static_cast<int>(q);
        return static_cast<Pauli>(missing);
    };
    out = third(a, b);
    const int ai = static_cast<int>(a), bi = static_cast<int>(b);
    const bool forward = (bi - ai + 3) % 3 == 1;  // X->Y->Z->X
    return {forward ? kI : -kI, true};
}

std::pair<std::complex<double>, PauliString> multiply_strings(const PauliString& a,
                                                              const PauliString& b) {
    PauliString result = a;
    std::complex<double> phase{1.0, 0.0};
    for (const auto& [q, pb] : b) {
        auto it = result.find(q);
        if (it == result.end()) {
            result.emplace(q, pb);
            continue;
        }
        Pauli prod;
        auto [ph, nontrivial] = multiply_single(it->second, pb, prod);
        phase *= ph;
        if (nontrivial) {
            it->second = prod;
        } else {
            result.erase(it);
        }
    }
    return {phase, std::move(result)};
}

std::string pauli_string_to_text(const PauliString& s) {
    if (s.empty()) return "I";
    std::ostringstream out;
    bool first = true;
    for (const auto& [q, p] : s) {
        if (!first) out << ' ';
        out << "XYZ"[static_cast<int>(p)] << q;
        first = false;
    }
    return out.str();
}

std::string PauliTerm::to_string() const {
    std::ostringstream out;
    out << coefficient << " * " << pauli_string_to_text(paulis);
    return out.str();
}

void QubitOperator::add(std::complex<double> coefficient, const PauliString& paulis) {
    auto [it, inserted] = terms_.try_emplace(paulis, coefficient);
    if (!inserted) it->second += coefficient;
    if (!paulis.empty()) {
        unsigned top = paulis.rbegin()->first + 1;
        if (top > n_qubits_) n_qubits_ = top;
    }
}

QubitOperator& QubitOperator::operator+=(const QubitOperator& other) {
    for (const auto& [s, c] : other.terms_) add(c, s);
    if (other.n_qubits_ > n_qubits_) n_qubits_ = other.n_qubits_;
    return *this;
}

void QubitOperator::compress(double eps) {
    for (auto it = terms_.begin(); it != terms_.end();) {
        if (std::abs(it->second) < eps) {
            it = terms_.erase(it);
        } else {
            ++it;
        }
    }
}

std::complex<double> QubitOperator::coefficient_of(const PauliString& s) const {
    auto it = terms_.find(s);
    return it == terms_.end() ? std::complex<double>{0.0, 0.0} : it->second;
}

double QubitOperator::max_abs_imag() const {
    double worst = 0.0;
    for (const auto& [s, c] : terms_) worst = std::max(worst, std::abs(c.imag()));
    return worst;
}

std::string QubitOperator::to_string() const {
    std::ostringstream out;
    bool first = true;
    for (const auto& [s, c] : terms_) {
        if (!first) out << " + ";
        out << "(" << c.real() << (c.imag() < 0 ? "" : "+") << c.imag() << "i) "
            << pauli_string_to_text(s);
        first = false;
    }
    if (first) out << "0";
    return out.str();
}

}  // namespace gqe
