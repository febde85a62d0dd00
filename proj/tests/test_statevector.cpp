#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "gqe/fermion.hpp"
#include "gqe/linalg.hpp"
#include "gqe/qsci.hpp"
#include "gqe/statevector.hpp"
#include "oracles.hpp"

using namespace gqe;

namespace {
const std::string kH2Path = std::string(GQE_FIXTURE_DIR) + "/h2_sto3g.fcidump";
}

TEST_CASE("prepare_reference basis states") {
    auto s = prepare_reference(2, {0});
    CHECK(std::abs(s.amplitudes[0b01] - std::complex<double>{1, 0}) < 1e-15);
    CHECK(s.norm_sq() == doctest::Approx(1.0));

    auto zero = prepare_reference(1, {});
    QubitOperator z(1);
    z.add(1.0, {{0, Pauli::Z}});
    CHECK(expectation(zero, z) == doctest::Approx(1.0));

    CHECK_THROWS_AS(prepare_reference(2, {0, 0}), std::invalid_argument);
    CHECK_THROWS_AS(prepare_reference(2, {5}), std::invalid_argument);
}

TEST_CASE("HF reference expectation equals the Slater-Condon diagonal") {
    auto ints = parse_fcidump_file(kH2Path);
    auto h = jordan_wigner(second_quantized_hamiltonian(ints), 4);
    auto hf = prepare_reference(4, {0, 1});
    Determinant d{0b0011, 4};
    CHECK(expectation(hf, h) ==
          doctest::Approx(slater_condon_element(ints, d, d)).epsilon(1e-12));
}

TEST_CASE("pauli rotation basics") {
    SUBCASE("Z rotation leaves probabilities alone") {
        auto s = prepare_reference(1, {});
        apply_pauli_rotation(s, PauliString{{0, Pauli::Z}}, M_PI);
        CHECK(std::norm(s.amplitudes[0]) == doctest::Approx(1.0).epsilon(1e-12));
        // global phase e^{-i pi/2} = -i
        CHECK(s.amplitudes[0].imag() == doctest::Approx(-1.0).epsilon(1e-12));
    }
    SUBCASE("Y rotation rotates <Z> to cos(theta)") {
        auto s = prepare_reference(1, {});
        apply_pauli_rotation(s, PauliString{{0, Pauli::Y}}, 0.3);
        QubitOperator z(1);
        z.add(1.0, {{0, Pauli::Z}});
        CHECK(expectation(s, z) == doctest::Approx(0.955336489).epsilon(1e-8));
    }
    SUBCASE("XX pi rotation maps |00> to -i|11>") {
        auto s = prepare_reference(2, {});
        apply_pauli_rotation(s, PauliString{{0, Pauli::X}, {1, Pauli::X}}, M_PI);
        CHECK(std::abs(s.amplitudes[0b11] - std::complex<double>{0, -1}) < 1e-12);
    }
}

TEST_CASE("rotation matches the dense exponential oracle") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> letter(0, 2);
    std::uniform_real_distribution<double> angle(-M_PI, M_PI);
    for (int trial = 0; trial < 100; ++trial) {
        unsigned n = 2 + trial % 5;  // up to 6 qubits
        PauliString p;
        for (unsigned q = 0; q < n; ++q)
            if (rng() % 2) p.emplace(q, static_cast<Pauli>(letter(rng)));
        if (p.empty()) p.emplace(0, Pauli::Z);
        double theta = angle(rng);

        auto state = oracle::random_state(n, 1234 + trial);
        auto expected = state;

        apply_pauli_rotation(state, p, theta);

        // exp(-i theta/2 P) via Taylor on the dense matrix
        QubitOperator op(n);
        op.add(std::complex<double>{0.0, -theta / 2.0}, p);
        auto m = oracle::dense_operator(op, n);
        auto ref = oracle::expm_apply(m, expected.amplitudes);

        double worst = 0.0;
        for (std::size_t i = 0; i < ref.size(); ++i)
            worst = std::max(worst, std::abs(ref[i] - state.amplitudes[i]));
        CHECK(worst < 1e-10);
    }
}

TEST_CASE("norm preserved over long rotation sequences") {
    auto s = oracle::random_state(5, 17);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> angle(-M_PI, M_PI);
    std::uniform_int_distribution<int> letter(0, 2);
    for (int i = 0; i < 1000; ++i) {
        PauliString p;
        for (unsigned q = 0; q < 5; ++q)
            if (rng() % 2) p.emplace(q, static_cast<Pauli>(letter(rng)));
        if (p.empty()) continue;
        apply_pauli_rotation(s, p, angle(rng));
    }
    CHECK(std::abs(s.norm_sq() - 1.0) < 1e-9);
}

TEST_CASE("expectation of scaled identity") {
    auto s = oracle::random_state(3, 3);
    QubitOperator op(3);
    op.add(2.5, {});
    CHECK(expectation(s, op) == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("argument errors") {
    auto s = prepare_reference(2, {});
    QubitOperator wide(5);
    wide.add(1.0, {{4, Pauli::Z}});
    CHECK_THROWS_AS(expectation(s, wide), std::invalid_argument);
    CHECK_THROWS_AS(sample(s, 0, 1), std::invalid_argument);
}

TEST_CASE("exact ground eigenvector reproduces the oracle eigenvalue") {
    auto ints = parse_fcidump_file(kH2Path);
    auto h = jordan_wigner(second_quantized_hamiltonian(ints), 4);
    auto dense = oracle::dense_operator(h, 4);
    auto basis = oracle::sector_masks(4, 2, 0);
    auto restricted = oracle::restrict_real(dense, basis);
    auto eig = linalg::symmetric_eigen(restricted, basis.size());

    Statevector s;
    s.n_qubits = 4;
    s.amplitudes.assign(16, {0, 0});
    for (std::size_t i = 0; i < basis.size(); ++i)
        s.amplitudes[basis[i]] = eig.eigenvectors[i * basis.size()];
    CHECK(expectation(s, h) == doctest::Approx(eig.eigenvalues[0]).epsilon(1e-12));
}

TEST_CASE("sampling a basis state is deterministic") {
    auto s = prepare_reference(3, {0, 2});
    auto rec = sample(s, 777, 42);
    CHECK(rec.counts.size() == 1);
    CHECK(rec.counts.at(0b101) == doctest::Approx(777.0));
    CHECK(rec.total_shots == doctest::Approx(777.0));
}

TEST_CASE("uniform two-qubit state sampled within 5 sigma") {
    Statevector s;
    s.n_qubits = 2;
    s.amplitudes.assign(4, {0.5, 0.0});
    const std::uint64_t shots = 100000;
    auto rec = sample(s, shots, 7);
    const double p = 0.25;
    const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(shots));
    for (std::uint64_t x = 0; x < 4; ++x) {
        double freq = rec.counts.at(x) / static_cast<double>(shots);
        CHECK(std::abs(freq - p) < 5 * sigma);
    }
}

TEST_CASE("fixed seed reproduces the same record") {
    auto s = oracle::random_state(4, 11);
    auto a = sample(s, 5000, 123);
    auto b = sample(s, 5000, 123);
    CHECK(a.counts == b.counts);
}

TEST_CASE("exact mode on a Bell state") {
    Statevector s;
    s.n_qubits = 2;
    s.amplitudes.assign(4, {0, 0});
    s.amplitudes[0b00] = s.amplitudes[0b11] = 1.0 / std::sqrt(2.0);
    auto rec = exact_distribution(s);
    CHECK(rec.exact);
    CHECK(rec.counts.size() == 2);
    CHECK(rec.counts.at(0b00) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rec.counts.at(0b11) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("sampling converges in total variation on 4 qubits") {
    auto s = oracle::random_state(4, 21);
    auto rec = sample(s, 100000, 31);
    double tv = 0.0;
    for (std::uint64_t x = 0; x < 16; ++x) {
        double p = std::norm(s.amplitudes[x]);
        double q = rec.counts.count(x) ? rec.counts.at(x) / rec.total_shots : 0.0;
        tv += std::abs(p - q);
    }
    CHECK(tv / 2.0 < 0.02);
}
