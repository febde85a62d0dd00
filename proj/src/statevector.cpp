#include "gqe/statevector.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <stdexcept>

namespace gqe {

double Statevector::norm_sq() const {
    double s = 0.0;
    for (const auto& a : amplitudes) s += std::norm(a);
    return s;
}

Statevector prepare_reference(unsigned n_qubits, const std::vector<unsigned>& occupied) {
    if (n_qubits > Statevector::kMaxQubits)
        throw std::invalid_argument("prepare_reference: qubit count above configured maximum");
    std::uint64_t index = 0;
    for (unsigned q : occupied) {
        if (q >= n_qubits) throw std::invalid_argument("prepare_reference: index out of range");
        if ((index >> q) & 1u)
            throw std::invalid_argument("prepare_reference: duplicate qubit index");
        index |= std::uint64_t(1) << q;
    }
    Statevector state;
    state.n_qubits = n_qubits;
    state.amplitudes.assign(std::uint64_t(1) << n_qubits, {0.0, 0.0});
    state.amplitudes[index] = {1.0, 0.0};
    return state;
}

void apply_pauli_rotation(Statevector& state, const PauliString& paulis, double angle) {
    std::uint64_t flip = 0, y_mask = 0, z_like = 0;
    unsigned n_y = 0;
    for (const auto& [q, p] : paulis) {
        if (q >= state.n_qubits)
            throw std::invalid_argument("apply_pauli_rotation: qubit out of range");
        switch (p) {
            case Pauli::X: flip |= std::uint64_t(1) << q; break;
            case Pauli::Y:
                flip |= std::uint64_t(1) << q;
                y_mask |= std::uint64_t(1) << q;
                ++n_y;
                break;
            case Pauli::Z: z_like |= std::uint64_t(1) << q; break;
        }
    }
    z_like |= y_mask;  // Y contributes (-1)^bit like Z, on top of the flip

    const double c = std::cos(angle / 2.0), s = std::sin(angle / 2.0);
    const std::complex<double> minus_i_s{0.0, -s};
    // i^{n_y} for the phase P|x> = i^{n_y} (-1)^{popcount(x & z_like)} |x ^ flip>
    static const std::complex<double> i_pow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    const std::complex<double> y_phase = i_pow[n_y % 4];

    auto& amp = state.amplitudes;
    const std::uint64_t dim = amp.size();

    if (flip == 0) {
        // Diagonal string: amplitude-wise phase exp(-i*angle/2 * (+/-1)).
        const std::complex<double> e_minus{c, -s}, e_plus{c, s};
        for (std::uint64_t x = 0; x < dim; ++x)
            amp[x] *= (std::popcount(x & z_like) & 1) ? e_plus : e_minus;
        return;
    }

    for (std::uint64_t x = 0; x < dim; ++x) {
        const std::uint64_t y = x ^ flip;
        if (y < x) continue;  // handle each pair once
        // phase of P mapping |y> -> |x> and |x> -> |y>
        const std::complex<double> ph_y =
            (std::popcount(y & z_like) & 1) ? -y_phase : y_phase;
        const std::complex<double> ph_x =
            (std::popcount(x & z_like) & 1) ? -y_phase : y_phase;
        const auto ax = amp[x], ay = amp[y];
        amp[x] = c * ax + minus_i_s * ph_y * ay;
        amp[y] = c * ay + minus_i_s * ph_x * ax;
    }
}

void apply_pauli_rotation(Statevector& state, const PauliTerm& term, double angle) {
    apply_pauli_rotation(state, term.paulis, angle);
}

double expectation(const Statevector& state, const QubitOperator& op) {
    if (op.n_qubits() > state.n_qubits)
        throw std::invalid_argument("expectation: qubit count mismatch");
    std::complex<double> acc{0.0, 0.0};
    const auto& amp = state.amplitudes;
    const std::uint64_t dim = amp.size();
    for (const auto& [paulis, coeff] : op.terms()) {
        std::uint64_t flip = 0, z_like = 0;
        unsigned n_y = 0;
        for (const auto& [q, p] : paulis) {
            if (p != Pauli::Z) flip |= std::uint64_t(1) << q;
            if (p != Pauli::X) z_like |= std::uint64_t(1) << q;
            if (p == Pauli::Y) ++n_y;
        }
        static const std::complex<double> i_pow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
        const std::complex<double> y_phase = i_pow[n_y % 4];
        std::complex<double> term_val{0.0, 0.0};
        for (std::uint64_t x = 0; x < dim; ++x) {
            const std::uint64_t y = x ^ flip;
            const std::complex<double> ph =
                (std::popcount(y & z_like) & 1) ? -y_phase : y_phase;
            term_val += std::conj(amp[x]) * ph * amp[y];
        }
        acc += coeff * term_val;
    }
    if (op.is_hermitian() && std::abs(acc.imag()) >= 1e-9)
        throw std::runtime_error("expectation: imaginary residue above tolerance");
    return acc.real();
}

MeasurementRecord sample(const Statevector& state, std::uint64_t n_shots,
                         std::uint64_t rng_seed) {
    if (n_shots < 1) throw std::invalid_argument("sample: n_shots must be >= 1");
    // Cumulative distribution over nonzero probabilities.
    std::vector<std::pair<double, std::uint64_t>> cdf;
    double acc = 0.0;
    for (std::uint64_t x = 0; x < state.amplitudes.size(); ++x) {
        double p = std::norm(state.amplitudes[x]);
        if (p > 0.0) {
            acc += p;
            cdf.emplace_back(acc, x);
        }
    }
    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> uni(0.0, acc);
    MeasurementRecord record;
    record.total_shots = static_cast<double>(n_shots);
    for (std::uint64_t shot = 0; shot < n_shots; ++shot) {
        double u = uni(rng);
        auto it = std::lower_bound(cdf.begin(), cdf.end(), u,
                                   [](const auto& e, double v) { return e.first < v; });
        if (it == cdf.end()) --it;
        record.counts[it->second] += 1.0;
    }
    return record;
}

MeasurementRecord exact_distribution(const Statevector& state, double p_floor) {
    MeasurementRecord record;
    record.exact = true;
    for (std::uint64_t x = 0; x < state.amplitudes.size(); ++x) {
        double p = std::norm(state.amplitudes[x]);
        if (p >= p_floor) {
            record.counts[x] = p;
            record.total_shots += p;
        }
    }
    return record;
}

}  // namespace gqe
