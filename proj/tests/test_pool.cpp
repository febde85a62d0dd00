#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <random>
#include <set>

#include "gqe/pool.hpp"
#include "gqe/statevector.hpp"
#include "oracles.hpp"

using namespace gqe;

namespace {

const std::vector<double> kGrid = {M_PI / 2,  -M_PI / 2,  M_PI / 4,  -M_PI / 4,
                                   M_PI / 8,  -M_PI / 8,  M_PI / 16, -M_PI / 16};

// Independent enumeration of the distinct spin-conserving excitation index
// sets over a filled-lowest reference.
std::set<std::pair<std::vector<unsigned>, std::vector<unsigned>>> enumeration_oracle(
    unsigned n_spatial, unsigned n_electrons) {
    std::set<std::pair<std::vector<unsigned>, std::vector<unsigned>>> out;
    const unsigned n_so = 2 * n_spatial;
    auto sz = [](unsigned q) { return q % 2 == 0 ? 1 : -1; };
    for (unsigned i = 0; i < n_electrons; ++i)
        for (unsigned a = n_electrons; a < n_so; ++a)
            if (i % 2 == a % 2) out.insert({{i}, {a}});
    for (unsigned i = 0; i < n_electrons; ++i)
        for (unsigned j = i + 1; j < n_electrons; ++j)
            for (unsigned a = n_electrons; a < n_so; ++a)
                for (unsigned b = a + 1; b < n_so; ++b)
                    if (sz(i) + sz(j) == sz(a) + sz(b)) out.insert({{i, j}, {a, b}});
    return out;
}

Statevector apply_gates(const std::vector<RotationGate>& gates, Statevector s) {
    for (const auto& g : gates) apply_pauli_rotation(s, g.paulis, g.angle);
    return s;
}

// exp(theta*G) |psi> through the dense JW image of the generator.
oracle::CVec exact_evolution(const ExcitationGenerator& gen, double theta,
                             const Statevector& s) {
    QubitOperator scaled(gen.n_qubits);
    for (const auto& [c, p] : gen.qubit_terms)
        scaled.add(std::complex<double>{0.0, theta * c}, p);
    auto m = oracle::dense_operator(scaled, gen.n_qubits);
    return oracle::expm_apply(m, s.amplitudes);
}

}  // namespace

TEST_CASE("enumerate_uccsd matches the enumeration oracle at K=2") {
    auto pool = enumerate_uccsd(2, 2);
    auto expected = enumeration_oracle(2, 2);
    CHECK(pool.size() == expected.size());
    CHECK(pool.size() == 3);  // 2 singles + 1 double over {0,1} -> {2,3}
    int singles = 0, doubles = 0;
    for (const auto& g : pool) {
        CHECK(expected.count({g.annihilated, g.created}) == 1);
        (g.kind == ExcitationGenerator::Kind::Single ? singles : doubles)++;
    }
    CHECK(singles == 2);
    CHECK(doubles == 1);
}

TEST_CASE("enumerate_uccsd matches the enumeration oracle at K=4") {
    auto pool = enumerate_uccsd(4, 4);
    auto expected = enumeration_oracle(4, 4);
    CHECK(pool.size() == expected.size());
    std::set<std::pair<std::vector<unsigned>, std::vector<unsigned>>> got;
    for (const auto& g : pool) got.insert({g.annihilated, g.created});
    CHECK(got == expected);
}

TEST_CASE("no virtuals, empty pool") { CHECK(enumerate_uccsd(1, 2).empty()); }

TEST_CASE("too many electrons is an argument error") {
    CHECK_THROWS_AS(enumerate_uccsd(2, 5), std::invalid_argument);
}

TEST_CASE("pool ordering is deterministic: singles first, lexicographic") {
    auto pool = enumerate_uccsd(3, 2);
    bool seen_double = false;
    for (const auto& g : pool) {
        if (g.kind == ExcitationGenerator::Kind::Double) seen_double = true;
        if (seen_double) CHECK(g.kind == ExcitationGenerator::Kind::Double);
    }
}

TEST_CASE("JW term counts: 2 for singles, 8 for doubles, real coefficients") {
    for (const auto& g : enumerate_uccsd(3, 2)) {
        if (g.kind == ExcitationGenerator::Kind::Single) CHECK(g.qubit_terms.size() == 2);
        if (g.kind == ExcitationGenerator::Kind::Double) CHECK(g.qubit_terms.size() == 8);
    }
}

TEST_CASE("vocabulary layout and round trip") {
    auto pool = enumerate_uccsd(3, 2);  // 4 singles + some doubles
    auto vocab = build_vocabulary(pool, kGrid);
    CHECK(vocab.size() == static_cast<int>(pool.size() * kGrid.size()));
    CHECK(vocab.token(0) == std::pair<int, double>{0, kGrid[0]});
    for (int id = 0; id < vocab.size(); ++id) {
        auto [g, angle] = vocab.token(id);
        int angle_index = id % static_cast<int>(kGrid.size());
        CHECK(vocab.token_id(g, angle_index) == id);
    }
    CHECK(vocab.start_token() == vocab.size());
    CHECK_THROWS_AS(build_vocabulary(pool, {}), std::invalid_argument);
    CHECK_THROWS_AS(compile_token(vocab, vocab.start_token()), std::invalid_argument);
}

TEST_CASE("five generators with an eight-angle grid give |G| = 40") {
    auto pool = enumerate_uccsd(3, 4);  // 2 occupied spatial, 1 virtual
    // whatever the pool size, |G| = n_gen * n_angles
    auto vocab = build_vocabulary(pool, kGrid);
    CHECK(vocab.size() == static_cast<int>(pool.size()) * 8);
}

TEST_CASE("compiled tokens match the exact exponential") {
    auto pool = enumerate_uccsd(2, 2);
    auto vocab = build_vocabulary(pool, kGrid);
    for (int id = 0; id < vocab.size(); ++id) {
        auto [gi, theta] = vocab.token(id);
        auto state = oracle::random_state(4, 400 + id);
        auto compiled = apply_gates(compile_token(vocab, id), state);
        auto exact = exact_evolution(vocab.generators()[gi], theta, state);
        CHECK(oracle::fidelity_distance(compiled.amplitudes, exact) < 1e-10);
    }
}

TEST_CASE("compiled generator matches the exponential on 8 qubits") {
    auto pool = enumerate_uccsd(4, 4);
    auto vocab = build_vocabulary(pool, {0.37, -0.37});
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 6; ++trial) {
        int id = static_cast<int>(rng() % vocab.size());
        auto [gi, theta] = vocab.token(id);
        auto state = oracle::random_state(8, 800 + trial);
        auto compiled = apply_gates(compile_token(vocab, id), state);
        auto exact = exact_evolution(vocab.generators()[gi], theta, state);
        CHECK(oracle::fidelity_distance(compiled.amplitudes, exact) < 1e-10);
    }
}

TEST_CASE("zero angle compiles to the identity") {
    auto pool = enumerate_uccsd(2, 2);
    auto vocab = build_vocabulary(pool, {0.0, 0.5});
    auto state = oracle::random_state(4, 9);
    auto out = apply_gates(compile_token(vocab, 0), state);
    double worst = 0.0;
    for (std::size_t i = 0; i < out.amplitudes.size(); ++i)
        worst = std::max(worst, std::abs(out.amplitudes[i] - state.amplitudes[i]));
    CHECK(worst < 1e-12);
}

TEST_CASE("inverse property: -theta then +theta is the identity") {
    auto pool = enumerate_uccsd(2, 2);
    auto vocab = build_vocabulary(pool, {0.31, -0.31});
    auto state = oracle::random_state(4, 10);
    for (std::size_t g = 0; g < pool.size(); ++g) {
        auto fwd = apply_gates(compile_token(vocab, vocab.token_id(g, 0)), state);
        auto back = apply_gates(compile_token(vocab, vocab.token_id(g, 1)), fwd);
        double worst = 0.0;
        for (std::size_t i = 0; i < back.amplitudes.size(); ++i)
            worst = std::max(worst, std::abs(back.amplitudes[i] - state.amplitudes[i]));
        CHECK(worst < 1e-10);
    }
}

TEST_CASE("compiled tokens conserve particle number") {
    auto pool = enumerate_uccsd(3, 2);
    auto vocab = build_vocabulary(pool, kGrid);
    auto state = prepare_reference(6, {0, 1});
    std::mt19937_64 rng(12);
    for (int step = 0; step < 10; ++step) {
        int id = static_cast<int>(rng() % vocab.size());
        state = apply_gates(compile_token(vocab, id), state);
    }
    for (std::uint64_t x = 0; x < state.amplitudes.size(); ++x)
        if (std::abs(state.amplitudes[x]) > 1e-12) CHECK(std::popcount(x) == 2);
}

TEST_CASE("gate counts for hand-decomposed cases") {
    SUBCASE("weight-1 Z rotation") {
        auto r = count_gates({RotationGate{{{0, Pauli::Z}}, 0.5}});
        CHECK(r.two_qubit == 0);
        CHECK(r.single_rotation == 1);
        CHECK(r.clifford == 0);
        CHECK(r.total == 1);
    }
    SUBCASE("weight-4 XYZX string") {
        auto r = count_gates({RotationGate{
            {{0, Pauli::X}, {1, Pauli::Y}, {2, Pauli::Z}, {3, Pauli::X}}, 0.5}});
        CHECK(r.two_qubit == 6);
        CHECK(r.single_rotation == 1);
        CHECK(r.clifford == 6);
        CHECK(r.total == 13);
    }
}

TEST_CASE("gate counts are additive over concatenation") {
    auto pool = enumerate_uccsd(3, 2);
    auto vocab = build_vocabulary(pool, kGrid);
    std::vector<int> a = {0, 5, 9}, b = {3, 1};
    std::vector<int> ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    auto ra = count_gates(std::span<const int>(a), vocab);
    auto rb = count_gates(std::span<const int>(b), vocab);
    auto rab = count_gates(std::span<const int>(ab), vocab);
    CHECK(rab.two_qubit == ra.two_qubit + rb.two_qubit);
    CHECK(rab.single_rotation == ra.single_rotation + rb.single_rotation);
    CHECK(rab.clifford == ra.clifford + rb.clifford);
    CHECK(rab.total == ra.total + rb.total);
}

TEST_CASE("H4-scale sequence lands in the expected gate-count regime") {
    auto pool = enumerate_uccsd(4, 4);
    auto vocab = build_vocabulary(pool, kGrid);
    std::mt19937_64 rng(88);
    std::vector<int> tokens;
    for (int i = 0; i < 20; ++i) tokens.push_back(static_cast<int>(rng() % vocab.size()));
    auto r = count_gates(std::span<const int>(tokens), vocab);
    // order-of-magnitude check for an L=20 circuit on 8 qubits
    CHECK(r.two_qubit > 20);
    CHECK(r.two_qubit < 2000);
    CHECK(r.total == r.two_qubit + r.single_rotation + r.clifford);
}
