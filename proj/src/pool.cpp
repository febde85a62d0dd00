#include "gqe/pool.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gqe {

namespace {

// Singles and doubles commute term-by-term after JW; assert it anyway since
// compile_token relies on exactness of the factorized product.
void check_commuting(const std::vector<std::pair<double, PauliString>>& terms) {
    for (std::size_t i = 0; i < terms.size(); ++i)
        for (std::size_t j = i + 1; j < terms.size(); ++j) {
            auto [ph_ab, ab] = multiply_strings(terms[i].second, terms[j].second);
            auto [ph_ba, ba] = multiply_strings(terms[j].second, terms[i].second);
            if (ab != ba || std::abs(ph_ab - ph_ba) > 1e-12)
                throw std::logic_error("excitation generator terms do not commute");
        }
}

ExcitationGenerator make_generator(ExcitationGenerator::Kind kind,
                                   std::vector<unsigned> annihilated,
                                   std::vector<unsigned> created, unsigned n_qubits) {
    ExcitationGenerator gen;
    gen.kind = kind;
    gen.annihilated = std::move(annihilated);
    gen.created = std::move(created);
    gen.n_qubits = n_qubits;

    // T = a+_c1 (a+_c2) a_o2 a_o1 with descending annihilation order.
    std::vector<FermionFactor> factors;
    for (unsigned c : gen.created) factors.push_back({c, true});
    for (auto it = gen.annihilated.rbegin(); it != gen.annihilated.rend(); ++it)
        factors.push_back({*it, false});
    FermionOperator t;
    t.add_term(1.0, factors);
    FermionOperator g = t;
    g -= t.adjoint();
    gen.generator = g;

    QubitOperator image = jordan_wigner(g, n_qubits);
    gen.qubit_terms.reserve(image.size());
    for (const auto& [paulis, coeff] : image.terms()) {
        // Anti-Hermitian image: coefficients are purely imaginary; store c_m
        // with the factor i implied (image = i * sum c_m P_m).
        if (std::abs(coeff.real()) > 1e-12)
            throw std::logic_error("excitation generator image has a real component");
        gen.qubit_terms.emplace_back(coeff.imag(), paulis);
    }
    check_commuting(gen.qubit_terms);
    return gen;
}

}  // namespace

std::vector<ExcitationGenerator> enumerate_uccsd(unsigned n_spatial, unsigned n_electrons) {
    if (n_electrons > 2 * n_spatial)
        throw std::invalid_argument("enumerate_uccsd: too many electrons");
    Determinant ref;
    ref.n_spin_orbitals = 2 * n_spatial;
    for (unsigned q = 0; q < n_electrons; ++q) ref.bits |= std::uint64_t(1) << q;
    return enumerate_uccsd(n_spatial, ref);
}

std::vector<ExcitationGenerator> enumerate_uccsd(unsigned n_spatial,
                                                 const Determinant& reference) {
    const unsigned n_so = 2 * n_spatial;
    std::vector<unsigned> occ, virt;
    for (unsigned q = 0; q < n_so; ++q)
        (reference.occupied(q) ? occ : virt).push_back(q);

    auto sz = [](unsigned q) { return spin_of(q) == 0 ? 1 : -1; };

    std::vector<ExcitationGenerator> pool;
    for (unsigned i : occ)
        for (unsigned a : virt)
            if (spin_of(i) == spin_of(a))
                pool.push_back(
                    make_generator(ExcitationGenerator::Kind::Single, {i}, {a}, n_so));

    for (std::size_t oi = 0; oi < occ.size(); ++oi)
        for (std::size_t oj = oi + 1; oj < occ.size(); ++oj)
            for (std::size_t va = 0; va < virt.size(); ++va)
                for (std::size_t vb = va + 1; vb < virt.size(); ++vb) {
                    unsigned i = occ[oi], j = occ[oj], a = virt[va], b = virt[vb];
                    if (sz(i) + sz(j) != sz(a) + sz(b)) continue;
                    pool.push_back(make_generator(ExcitationGenerator::Kind::Double, {i, j},
                                                  {a, b}, n_so));
                }
    return pool;
}

Vocabulary::Vocabulary(std::vector<ExcitationGenerator> generators,
                       std::vector<double> angle_grid)
    : generators_(std::move(generators)), angle_grid_(std::move(angle_grid)) {
    if (angle_grid_.empty()) throw std::invalid_argument("Vocabulary: empty angle grid");
    for (const auto& g : generators_) n_qubits_ = std::max(n_qubits_, g.n_qubits);
}

std::pair<int, double> Vocabulary::token(int id) const {
    if (id < 0 || id >= size()) throw std::invalid_argument("Vocabulary: bad token id");
    const int n_angles = static_cast<int>(angle_grid_.size());
    return {id / n_angles, angle_grid_[id % n_angles]};
}

int Vocabulary::token_id(int generator_index, int angle_index) const {
    return generator_index * static_cast<int>(angle_grid_.size()) + angle_index;
}

std::vector<RotationGate> compile_token(const Vocabulary& vocab, int token) {
    if (token == vocab.start_token())
        throw std::invalid_argument("compile_token: start token is not compilable");
    auto [gen_index, theta] = vocab.token(token);
    const auto& gen = vocab.generators()[gen_index];
    std::vector<RotationGate> gates;
    gates.reserve(gen.qubit_terms.size());
    // exp(theta * i * c_m * P_m) = exp(-i * (-2 theta c_m)/2 * P_m)
    for (const auto& [c, paulis] : gen.qubit_terms)
        gates.push_back({paulis, -2.0 * theta * c});
    return gates;
}

std::vector<RotationGate> compile_sequence(const Vocabulary& vocab,
                                           std::span<const int> tokens) {
    std::vector<RotationGate> gates;
    for (int t : tokens) {
        auto g = compile_token(vocab, t);
        gates.insert(gates.end(), g.begin(), g.end());
    }
    return gates;
}

GateCountReport count_gates(const std::vector<RotationGate>& gates) {
    GateCountReport report;
    for (const auto& gate : gates) {
        const long w = static_cast<long>(gate.paulis.size());
        long xy = 0;
        for (const auto& [q, p] : gate.paulis)
            if (p != Pauli::Z) ++xy;
        report.two_qubit += 2 * (w - 1);
        report.single_rotation += 1;
        report.clifford += 2 * xy;
    }
    report.total = report.two_qubit + report.single_rotation + report.clifford;
    return report;
}

GateCountReport count_gates(std::span<const int> tokens, const Vocabulary& vocab) {
    return count_gates(compile_sequence(vocab, tokens));
}

}  // namespace gqe
