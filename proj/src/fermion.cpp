#include "gqe/fermion.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace gqe {

namespace {

std::uint64_t canonical_h2_key(unsigned i, unsigned j, unsigned k, unsigned l) {
    auto pack = [](unsigned a, unsigned b, unsigned c, unsigned d) {
        return (std::uint64_t(a) << 48) | (std::uint64_t(b) << 32) | (std::uint64_t(c) << 16) |
               std::uint64_t(d);
    };
    std::uint64_t best = ~0ull;
    const unsigned perms[8][4] = {{i, j, k, l}, {j, i, k, l}, {i, j, l, k}, {j, i, l, k},
                                  {k, l, i, j}, {l, k, i, j}, {k, l, j, i}, {l, k, j, i}};
    for (const auto& p : perms) best = std::min(best, pack(p[0], p[1], p[2], p[3]));
    return best;
}

}  // namespace

void MolecularIntegrals::resize(unsigned norb) {
    n_orbitals = norb;
    h1_.assign(std::size_t(norb) * norb, 0.0);
    h2_.clear();
}

double MolecularIntegrals::one_body(unsigned i, unsigned j) const {
    return h1_[std::size_t(i) * n_orbitals + j];
}

void MolecularIntegrals::set_one_body(unsigned i, unsigned j, double value) {
    h1_[std::size_t(i) * n_orbitals + j] = value;
    h1_[std::size_t(j) * n_orbitals + i] = value;
}

double MolecularIntegrals::two_body(unsigned i, unsigned j, unsigned k, unsigned l) const {
    auto it = h2_.find(canonical_h2_key(i, j, k, l));
    return it == h2_.end() ? 0.0 : it->second;
}

void MolecularIntegrals::set_two_body(unsigned i, unsigned j, unsigned k, unsigned l,
                                      double value) {
    h2_[canonical_h2_key(i, j, k, l)] = value;
}

unsigned Determinant::electron_count() const {
    return static_cast<unsigned>(std::popcount(bits));
}

int Determinant::ms2() const {
    constexpr std::uint64_t kAlphaMask = 0x5555555555555555ull;
    int na = std::popcount(bits & kAlphaMask);
    int nb = std::popcount(bits & ~kAlphaMask);
    return na - nb;
}

void FermionOperator::add_term(std::complex<double> coefficient,
                               std::vector<FermionFactor> factors) {
    terms_.push_back(FermionTerm{coefficient, std::move(factors)});
}

FermionOperator FermionOperator::adjoint() const {
    FermionOperator out;
    for (const auto& term : terms_) {
        std::vector<FermionFactor> rev(term.factors.rbegin(), term.factors.rend());
        for (auto& f : rev) f.create = !f.create;
        out.add_term(std::conj(term.coefficient), std::move(rev));
    }
    return out;
}

FermionOperator& FermionOperator::operator+=(const FermionOperator& other) {
    for (const auto& t : other.terms_) terms_.push_back(t);
    return *this;
}

FermionOperator& FermionOperator::operator-=(const FermionOperator& other) {
    for (const auto& t : other.terms_) terms_.push_back(FermionTerm{-t.coefficient, t.factors});
    return *this;
}

unsigned FermionOperator::max_index() const {
    unsigned top = 0;
    for (const auto& t : terms_)
        for (const auto& f : t.factors) top = std::max(top, f.index);
    return top;
}

// ------------------------------ FCIDUMP ------------------------------------

namespace {

// Reads the &FCI ... &END (or "/") namelist, returns the remaining stream
// position at the first body line. Keys other than NORB/NELEC/MS2 ignored.
struct Namelist {
    int norb = -1, nelec = -1, ms2 = 0;
};

Namelist parse_namelist(std::istream& in, int& line_number) {
    std::string line;
    std::string header;
    bool started = false, done = false;
    while (!done && std::getline(in, line)) {
        ++line_number;
        std::string upper = line;
        std::transform(upper.begin(), upper.end(), upper.begin(),
                       [](unsigned char c) { return std::toupper(c); });
        if (!started) {
            auto pos = upper.find("&FCI");
            if (pos == std::string::npos)
                throw ParseError("expected &FCI namelist", line_number);
            started = true;
            upper = upper.substr(pos + 4);
        }
        auto endpos = upper.find("&END");
        if (endpos == std::string::npos) endpos = upper.find('/');
        if (endpos != std::string::npos) {
            upper = upper.substr(0, endpos);
            done = true;
        }
        header += ' ' + upper;
    }
    if (!started || !done) throw ParseError("unterminated &FCI namelist", line_number);

    Namelist out;
    auto grab_int = [&](const std::string& key, int& target) {
        auto pos = header.find(key);
        if (pos == std::string::npos) return false;
        pos += key.size();
        while (pos < header.size() && (header[pos] == ' ' || header[pos] == '=')) ++pos;
        std::size_t used = 0;
        try {
            target = std::stoi(header.substr(pos), &used);
        } catch (const std::exception&) {
            throw ParseError("malformed value for " + key, line_number);
        }
        return true;
    };
    if (!grab_int("NORB", out.norb)) throw ParseError("missing NORB", line_number);
    if (!grab_int("NELEC", out.nelec)) throw ParseError("missing NELEC", line_number);
    grab_int("MS2", out.ms2);
    return out;
}

}  // namespace

MolecularIntegrals parse_fcidump(std::istream& in) {
    int line_number = 0;
    Namelist nl = parse_namelist(in, line_number);
    if (nl.norb <= 0) throw ParseError("NORB must be positive", line_number);
    if (nl.nelec <= 0 || nl.nelec > 2 * nl.norb)
        throw ParseError("NELEC out of range", line_number);

    MolecularIntegrals ints;
    ints.resize(static_cast<unsigned>(nl.norb));
    ints.n_electrons = static_cast<unsigned>(nl.nelec);
    ints.ms2 = nl.ms2;

    // Track first-seen values to flag conflicting duplicates.
    std::unordered_map<std::uint64_t, double> seen_h2;
    std::vector<char> seen_h1(std::size_t(nl.norb) * nl.norb, 0);
    bool seen_core = false;

    std::string line;
    while (std::getline(in, line)) {
        ++line_number;
        std::istringstream ls(line);
        double value;
        long i, j, k, l;
        if (!(ls >> value)) {
            // blank lines are tolerated
            std::string rest;
            if (ls.clear(), std::getline(ls, rest); rest.find_first_not_of(" \t\r") ==
                                                        std::string::npos)
                continue;
            throw ParseError("malformed body line", line_number);
        }
        if (!(ls >> i >> j >> k >> l)) throw ParseError("expected four indices", line_number);
        for (long idx : {i, j, k, l})
            if (idx < 0 || idx > nl.norb)
                throw ParseError("orbital index out of range", line_number);

        if (i == 0 && j == 0 && k == 0 && l == 0) {
            if (seen_core && std::abs(ints.core_energy - value) > 1e-10)
                throw ParseError("conflicting core energy", line_number);
            ints.core_energy = value;
            seen_core = true;
        } else if (i > 0 && j == 0 && k == 0 && l == 0) {
            // orbital energy record, ignored
        } else if (i > 0 && j > 0 && k == 0 && l == 0) {
            unsigned a = unsigned(i) - 1, b = unsigned(j) - 1;
            std::size_t flat = std::size_t(std::min(a, b)) * nl.norb + std::max(a, b);
            if (seen_h1[flat] && std::abs(ints.one_body(a, b) - value) > 1e-10)
                throw ParseError("conflicting one-electron integral", line_number);
            ints.set_one_body(a, b, value);
            seen_h1[flat] = 1;
        } else if (i == 0 || j == 0 || k == 0 || l == 0) {
            throw ParseError("mixed zero/nonzero indices", line_number);
        } else {
            unsigned a = unsigned(i) - 1, b = unsigned(j) - 1, c = unsigned(k) - 1,
                     d = unsigned(l) - 1;
            std::uint64_t key = canonical_h2_key(a, b, c, d);
            auto it = seen_h2.find(key);
            if (it != seen_h2.end() && std::abs(it->second - value) > 1e-10)
                throw ParseError("conflicting two-electron integral", line_number);
            seen_h2[key] = value;
            ints.set_two_body(a, b, c, d, value);
        }
    }
    return ints;
}

MolecularIntegrals parse_fcidump_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open FCIDUMP file: " + path);
    return parse_fcidump(in);
}

void write_fcidump(const MolecularIntegrals& ints, std::ostream& out) {
    char buf[64];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof buf, "%.16E", v);
        return std::string(buf);
    };
    out << "&FCI NORB=" << ints.n_orbitals << ",NELEC=" << ints.n_electrons
        << ",MS2=" << ints.ms2 << ",\n ORBSYM=";
    for (unsigned i = 0; i < ints.n_orbitals; ++i) out << "1,";
    out << "\n ISYM=1,\n&END\n";

    // Deterministic order: sorted canonical keys.
    std::vector<std::pair<std::uint64_t, double>> entries(ints.two_body_entries().begin(),
                                                          ints.two_body_entries().end());
    std::sort(entries.begin(), entries.end());
    for (const auto& [key, value] : entries) {
        unsigned i = unsigned(key >> 48) & 0xffff, j = unsigned(key >> 32) & 0xffff,
                 k = unsigned(key >> 16) & 0xffff, l = unsigned(key) & 0xffff;
        out << fmt(value) << ' ' << i + 1 << ' ' << j + 1 << ' ' << k + 1 << ' ' << l + 1
            << '\n';
    }
    for (unsigned i = 0; i < ints.n_orbitals; ++i)
        for (unsigned j = 0; j <= i; ++j)
            if (ints.one_body(i, j) != 0.0)
                out << fmt(ints.one_body(i, j)) << ' ' << i + 1 << ' ' << j + 1 << " 0 0\n";
    out << fmt(ints.core_energy) << " 0 0 0 0\n";
}

MolecularIntegrals build_hubbard(unsigned n_sites, double t, double u) {
    if (n_sites < 2) throw std::invalid_argument("build_hubbard: n_sites must be >= 2");
    MolecularIntegrals ints;
    ints.resize(n_sites);
    ints.n_electrons = n_sites;  // half filling
    ints.ms2 = static_cast<int>(n_sites % 2);
    for (unsigned i = 0; i + 1 < n_sites; ++i) ints.set_one_body(i, i + 1, -t);
    for (unsigned i = 0; i < n_sites; ++i)
        if (u != 0.0) ints.set_two_body(i, i, i, i, u);
    return ints;
}

FermionOperator second_quantized_hamiltonian(const MolecularIntegrals& ints) {
    FermionOperator h;
    if (ints.core_energy != 0.0) h.add_term(ints.core_energy, {});
    const unsigned K = ints.n_orbitals;
    for (unsigned p = 0; p < K; ++p)
        for (unsigned q = 0; q < K; ++q) {
            double v = ints.one_body(p, q);
            if (v == 0.0) continue;
            for (unsigned s = 0; s < 2; ++s)
                h.add_term(v, {{spin_orbital(p, s), true}, {spin_orbital(q, s), false}});
        }
    for (unsigned p = 0; p < K; ++p)
        for (unsigned q = 0; q < K; ++q)
            for (unsigned r = 0; r < K; ++r)
                for (unsigned s = 0; s < K; ++s) {
                    double v = ints.two_body(p, q, r, s);
                    if (v == 0.0) continue;
                    for (unsigned s1 = 0; s1 < 2; ++s1)
                        for (unsigned s2 = 0; s2 < 2; ++s2)
                            h.add_term(0.5 * v, {{spin_orbital(p, s1), true},
                                                 {spin_orbital(r, s2), true},
                                                 {spin_orbital(s, s2), false},
                                                 {spin_orbital(q, s1), false}});
                }
    return h;
}

QubitOperator jordan_wigner(const FermionOperator& op, unsigned n_qubits) {
    QubitOperator out(n_qubits);
    for (const auto& term : op.terms()) {
        // Expand the product of (Z-string)*(X +/- iY)/2 factors.
        std::vector<std::pair<std::complex<double>, PauliString>> partial{
            {term.coefficient, {}}};
        for (const auto& factor : term.factors) {
            PauliString zs;
            for (unsigned q = 0; q < factor.index; ++q) zs.emplace(q, Pauli::Z);
            PauliString with_x = zs, with_y = zs;
            with_x.emplace(factor.index, Pauli::X);
            with_y.emplace(factor.index, Pauli::Y);
            const std::complex<double> y_coeff =
                factor.create ? std::complex<double>{0.0, -0.5} : std::complex<double>{0.0, 0.5};

            std::vector<std::pair<std::complex<double>, PauliString>> next;
            next.reserve(partial.size() * 2);
            for (const auto& [coeff, str] : partial) {
                auto [ph_x, prod_x] = multiply_strings(str, with_x);
                next.emplace_back(coeff * 0.5 * ph_x, std::move(prod_x));
                auto [ph_y, prod_y] = multiply_strings(str, with_y);
                next.emplace_back(coeff * y_coeff * ph_y, std::move(prod_y));
            }
            partial = std::move(next);
        }
        for (auto& [coeff, str] : partial) out.add(coeff, str);
    }
    out.compress();
    if (out.n_qubits() < n_qubits) out.set_n_qubits(n_qubits);
    return out;
}

}  // namespace gqe
