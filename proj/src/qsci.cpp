#include "gqe/qsci.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <set>

#include "gqe/linalg.hpp"

namespace gqe {

namespace {

constexpr std::uint64_t kAlphaMask = 0x5555555555555555ull;

int sector_ms2_of(std::uint64_t bits) {
    return std::popcount(bits & kAlphaMask) - std::popcount(bits & ~kAlphaMask);
}

bool in_sector(std::uint64_t bits, Sector sector) {
    return std::popcount(bits) == static_cast<int>(sector.n_electrons) &&
           sector_ms2_of(bits) == sector.ms2;
}

// (new bits, Jordan-Wigner phase); zero phase when the action annihilates.
std::pair<std::uint64_t, int> annihilate(std::uint64_t bits, unsigned q) {
    const std::uint64_t mask = std::uint64_t(1) << q;
    if (!(bits & mask)) return {bits, 0};
    int sign = (std::popcount(bits & (mask - 1)) & 1) ? -1 : 1;
    return {bits & ~mask, sign};
}

std::pair<std::uint64_t, int> create(std::uint64_t bits, unsigned q) {
    const std::uint64_t mask = std::uint64_t(1) << q;
    if (bits & mask) return {bits, 0};
    int sign = (std::popcount(bits & (mask - 1)) & 1) ? -1 : 1;
    return {bits | mask, sign};
}

std::vector<unsigned> occupied_list(std::uint64_t bits) {
    std::vector<unsigned> occ;
    while (bits) {
        occ.push_back(static_cast<unsigned>(std::countr_zero(bits)));
        bits &= bits - 1;
    }
    return occ;
}

// Chemist-notation spin-orbital integral (pq|rs) with spin deltas.
double so_two_body(const MolecularIntegrals& ints, unsigned p, unsigned q, unsigned r,
                   unsigned s) {
    if (spin_of(p) != spin_of(q) || spin_of(r) != spin_of(s)) return 0.0;
    return ints.two_body(spatial_of(p), spatial_of(q), spatial_of(r), spatial_of(s));
}

double so_one_body(const MolecularIntegrals& ints, unsigned p, unsigned q) {
    if (spin_of(p) != spin_of(q)) return 0.0;
    return ints.one_body(spatial_of(p), spatial_of(q));
}

}  // namespace

SubspaceSelection select_subspace(const MeasurementRecord& record, std::size_t d_max,
                                  Sector sector, unsigned n_spin_orbitals,
                                  bool complete_symmetry) {
    if (record.counts.empty()) throw EmptySubspaceError();

    std::vector<std::pair<std::uint64_t, double>> kept;
    for (const auto& [bits, count] : record.counts)
        if (in_sector(bits, sector)) kept.emplace_back(bits, count);
    if (kept.empty()) throw EmptySubspaceError();

    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    std::vector<std::uint64_t> ordered;
    ordered.reserve(kept.size());
    for (const auto& [bits, count] : kept) ordered.push_back(bits);

    if (complete_symmetry) {
        std::map<std::uint64_t, double> alpha_strings, beta_strings;
        std::set<std::uint64_t> present(ordered.begin(), ordered.end());
        for (const auto& [bits, count] : kept) {
            alpha_strings[bits & kAlphaMask] += count;
            beta_strings[bits & ~kAlphaMask] += count;
        }
        std::vector<std::pair<double, std::uint64_t>> completions;
        for (const auto& [ab, ac] : alpha_strings)
            for (const auto& [bb, bc] : beta_strings) {
                const std::uint64_t bits = ab | bb;
                if (!in_sector(bits, sector)) continue;
                if (present.count(bits)) continue;
                completions.emplace_back(ac * bc, bits);
            }
        std::sort(completions.begin(), completions.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        for (const auto& [score, bits] : completions) ordered.push_back(bits);
    }

    if (ordered.size() > d_max) ordered.resize(d_max);

    SubspaceSelection selection;
    selection.d_max = d_max;
    selection.provenance =
        complete_symmetry ? Provenance::SymmetryCompleted : Provenance::FrequencyRanked;
    selection.determinants.reserve(ordered.size());
    for (std::uint64_t bits : ordered)
        selection.determinants.push_back(Determinant{bits, n_spin_orbitals});
    return selection;
}

double slater_condon_element(const MolecularIntegrals& ints, const Determinant& bra,
                             const Determinant& ket) {
    if (bra.electron_count() != ket.electron_count() || bra.ms2() != ket.ms2())
        throw std::invalid_argument("slater_condon_element: sector mismatch");

    const std::uint64_t diff = bra.bits ^ ket.bits;
    const int n_diff = std::popcount(diff);
    if (n_diff > 4) return 0.0;

    if (n_diff == 0) {
        auto occ = occupied_list(ket.bits);
        double e = ints.core_energy;
        for (unsigned p : occ) e += so_one_body(ints, p, p);
        for (std::size_t i = 0; i < occ.size(); ++i)
            for (std::size_t j = i + 1; j < occ.size(); ++j) {
                unsigned p = occ[i], s = occ[j];
                e += so_two_body(ints, p, p, s, s) - so_two_body(ints, p, s, s, p);
            }
        return e;
    }

    if (n_diff == 2) {
        const unsigned p = static_cast<unsigned>(std::countr_zero(diff & ket.bits));
        const unsigned q = static_cast<unsigned>(std::countr_zero(diff & bra.bits));
        auto [b1, g1] = annihilate(ket.bits, p);
        auto [b2, g2] = create(b1, q);
        const double sign = g1 * g2;
        double e = so_one_body(ints, q, p);
        for (unsigned w : occupied_list(b1))  // common occupied orbitals
            e += so_two_body(ints, q, p, w, w) - so_two_body(ints, q, w, w, p);
        return sign * e;
    }

    // n_diff == 4: ket-only {p1 < p2}, bra-only {q1 < q2}
    auto ket_only = occupied_list(diff & ket.bits);
    auto bra_only = occupied_list(diff & bra.bits);
    const unsigned p1 = ket_only[0], p2 = ket_only[1];
    const unsigned q1 = bra_only[0], q2 = bra_only[1];
    auto [b1, g1] = annihilate(ket.bits, p1);
    auto [b2, g2] = annihilate(b1, p2);
    auto [b3, g3] = create(b2, q2);
    auto [b4, g4] = create(b3, q1);
    const double sign = g1 * g2 * g3 * g4;
    return sign * (so_two_body(ints, q1, p1, q2, p2) - so_two_body(ints, q1, p2, q2, p1));
}

SubspaceResult solve_subspace(const MolecularIntegrals& ints,
                              const SubspaceSelection& selection) {
    const std::size_t d = selection.determinants.size();
    if (d == 0) throw std::invalid_argument("solve_subspace: empty selection");

    std::vector<double> h(d * d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
            double v = slater_condon_element(ints, selection.determinants[i],
                                             selection.determinants[j]);
            h[i * d + j] = h[j * d + i] = v;
        }

    SubspaceResult result;
    result.dimension = d;

    auto dense_solve = [&]() {
        auto eig = linalg::symmetric_eigen(h, d);
        result.energy = eig.eigenvalues[0];
        result.ground_vector.resize(d);
        for (std::size_t i = 0; i < d; ++i) result.ground_vector[i] = eig.eigenvectors[i * d];
    };

    if (d <= 64) {
        dense_solve();
    } else {
        auto matvec = [&](const double* x, double* y) {
            for (std::size_t i = 0; i < d; ++i) {
                double acc = 0.0;
                const double* row = &h[i * d];
                for (std::size_t j = 0; j < d; ++j) acc += row[j] * x[j];
                y[i] = acc;
            }
        };
        try {
            auto lz = linalg::lanczos_smallest(matvec, d, 1e-9, 500);
            result.energy = lz.eigenvalue;
            result.ground_vector = std::move(lz.eigenvector);
        } catch (const linalg::LanczosError&) {
            if (d > 4096) throw;
            dense_solve();
        }
    }

    // Normalize; fix an overall sign for determinism.
    double nrm = 0.0;
    for (double c : result.ground_vector) nrm += c * c;
    nrm = std::sqrt(nrm);
    double lead = 0.0;
    for (double c : result.ground_vector)
        if (std::abs(c) > std::abs(lead)) lead = c;
    const double flip = lead < 0.0 ? -1.0 : 1.0;
    for (double& c : result.ground_vector) c *= flip / nrm;
    return result;
}

std::vector<Determinant> enumerate_sector(unsigned n_spin_orbitals, Sector sector) {
    const unsigned k = n_spin_orbitals / 2;
    const int n_alpha_i = (static_cast<int>(sector.n_electrons) + sector.ms2) / 2;
    const int n_beta_i = static_cast<int>(sector.n_electrons) - n_alpha_i;
    std::vector<Determinant> out;
    if ((static_cast<int>(sector.n_electrons) + sector.ms2) % 2 != 0) return out;
    if (n_alpha_i < 0 || n_beta_i < 0 || n_alpha_i > static_cast<int>(k) ||
        n_beta_i > static_cast<int>(k))
        return out;
    const unsigned n_alpha = static_cast<unsigned>(n_alpha_i);
    const unsigned n_beta = static_cast<unsigned>(n_beta_i);

    auto spatial_masks = [k](unsigned n_occ) {
        std::vector<std::uint64_t> masks;
        if (n_occ == 0) {
            masks.push_back(0);
            return masks;
        }
        std::uint64_t m = (std::uint64_t(1) << n_occ) - 1;
        const std::uint64_t limit = std::uint64_t(1) << k;
        while (m < limit) {
            masks.push_back(m);
            std::uint64_t c = m & -m, r = m + c;  // Gosper's hack
            m = (((r ^ m) >> 2) / c) | r;
        }
        return masks;
    };
    auto spread = [](std::uint64_t spatial, unsigned offset) {
        std::uint64_t out_bits = 0;
        while (spatial) {
            unsigned p = static_cast<unsigned>(std::countr_zero(spatial));
            out_bits |= std::uint64_t(1) << (2 * p + offset);
            spatial &= spatial - 1;
        }
        return out_bits;
    };

    for (std::uint64_t am : spatial_masks(n_alpha))
        for (std::uint64_t bm : spatial_masks(n_beta))
            out.push_back(Determinant{spread(am, 0) | spread(bm, 1), n_spin_orbitals});
    std::sort(out.begin(), out.end());
    return out;
}

double casci_reference(const MolecularIntegrals& ints, Sector sector) {
    auto dets = enumerate_sector(ints.n_spin_orbitals(), sector);
    if (dets.empty()) throw std::invalid_argument("casci_reference: empty sector");
    if (dets.size() > 100000) throw std::runtime_error("casci_reference: sector too large");
    SubspaceSelection selection;
    selection.determinants = std::move(dets);
    selection.d_max = selection.determinants.size();
    selection.provenance = Provenance::ExactSector;
    return solve_subspace(ints, selection).energy;
}

}  // namespace gqe
