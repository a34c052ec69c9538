#pragma once

/*
/   Builders that turn classical decision problems into common eigenspace
/   instances, and back them with checkable certificates.
/
/     from_three_coloring   graph -> d = 3 instance, three projectors per
/                           edge forbidding equal endpoint colors.
/     from_three_cnf        3-CNF -> qubit projector rows, one per clause,
/                           pinned to the clause's falsifying pattern.
/     from_commuting_hamiltonian
/                           commuting local terms plus an energy window ->
/                           instance over the original space extended by one
/                           value qubit per spectral projector; clause checks
/                           on the value qubits accept exactly the strings
/                           whose recorded energy clears the lower threshold.
/     make_energy_witness   per-term eigenvalue list plus a joint eigenvector;
/                           the verifier checks the eigenvalue sum against the
/                           threshold and the state against every term.
/     cluster_instance      the paired-qubit chain with its Z-X-Z checks, the
/                           worked example with a one-dimensional answer.
/
/   Text formats accepted here: graphs as "u v" edge lines, formulas as
/   DIMACS-style clause lines. Both are deliberately small subsets.
*/

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ces/errors.hpp"
#include "ces/instance.hpp"
#include "ces/linalg.hpp"
#include "ces/oracle.hpp"
#include "ces/twolocal.hpp"

namespace ces::reductions {

using ces::ComplexMatrix;
using ces::ComplexVector;
using instance::CesInstance;
using instance::CheckOperator;
using instance::FactorTable;

// ---------------------------------------------------------------------------
// Graph coloring

struct Graph {
    int vertices = 0;
    std::vector<std::pair<int, int>> edges;  // u < v, deduplicated
};

// One "u v" pair per line; blank lines and lines starting with '#' are
// skipped. Vertex count is the largest index seen plus one.
inline Graph parse_edge_list(const std::string& text) {
    Graph g;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream row(line);
        std::string first;
        if (!(row >> first) || first[0] == '#') continue;
        long u, v;
        std::istringstream head(first);
        std::string extra;
        if (!(head >> u) || (head >> extra) || !(row >> v) || (row >> extra))
            throw ParseError("edge list line " + std::to_string(lineno) +
                             ": expected two vertex indices");
        if (u < 0 || v < 0)
            throw ParseError("edge list line " + std::to_string(lineno) +
                             ": vertex indices must be non-negative");
        if (u == v)
            throw ParseError("edge list line " + std::to_string(lineno) + ": self-loop");
        if (u > v) std::swap(u, v);
        g.vertices = std::max(g.vertices, static_cast<int>(v) + 1);
        std::pair<int, int> e{static_cast<int>(u), static_cast<int>(v)};
        if (std::find(g.edges.begin(), g.edges.end(), e) == g.edges.end()) g.edges.push_back(e);
    }
    return g;
}

// Three-level particle per vertex; for every edge and every level c, the
// projector onto |c,c> with target zero forbids that level on both ends at
// once. The answer space is spanned by the proper colorings.
inline CesInstance from_three_coloring(const Graph& g) {
    if (g.vertices < 1) throw ShapeMismatch("from_three_coloring: graph has no vertices");
    CesInstance x;
    x.dims.assign(g.vertices, 3);
    for (auto [u, v] : g.edges) {
        if (u < 0 || v < 0 || u >= g.vertices || v >= g.vertices)
            throw ShapeMismatch("from_three_coloring: edge endpoint out of range");
        if (u == v) throw ShapeMismatch("from_three_coloring: self-loop");
        for (int c = 0; c < 3; ++c) {
            ComplexMatrix p = ComplexMatrix::Zero(9, 9);
            p(4 * c, 4 * c) = 1.0;  // |c,c> has the composite index 3c + c
            x.checks.push_back(CheckOperator::local_term({u, v}, p));
            x.lambdas.push_back(0.0);
        }
    }
    return x;
}

// ---------------------------------------------------------------------------
// 3-CNF

struct CnfClause {
    std::array<int, 3> literals{};  // DIMACS signed, 1-based
};

struct CnfFormula {
    int variables = 0;
    std::vector<CnfClause> clauses;
};

// DIMACS-style text: optional "p cnf V C" header, comment lines starting
// with 'c', then one clause per line as three signed literals terminated by
// a 0. A '%' line ends the input (some archives append one).
inline CnfFormula parse_dimacs(const std::string& text) {
    CnfFormula f;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream row(line);
        std::string head;
        if (!(row >> head)) continue;
        if (head == "c") continue;
        if (head == "%") break;
        if (head == "p") {
            std::string fmt;
            int declared_clauses;
            if (!(row >> fmt >> f.variables >> declared_clauses) || fmt != "cnf")
                throw ParseError("line " + std::to_string(lineno) + ": malformed problem line");
            continue;
        }
        std::vector<int> lits;
        std::istringstream again(line);
        int v;
        while (again >> v) {
            if (v == 0) break;
            lits.push_back(v);
        }
        if (again.fail() && !again.eof())
            throw ParseError("line " + std::to_string(lineno) + ": expected integers");
        if (lits.size() != 3)
            throw MalformedClause("line " + std::to_string(lineno) +
                                  ": a clause must have exactly three literals");
        CnfClause cl;
        std::copy(lits.begin(), lits.end(), cl.literals.begin());
        f.clauses.push_back(cl);
        for (int l : lits) f.variables = std::max(f.variables, std::abs(l));
    }
    return f;
}

// One projector row per clause: each literal contributes the basis projector
// onto its falsifying value at its variable. A variable repeated with both
// signs zeroes the cell, which is correct: a tautological clause constrains
// nothing.
inline FactorTable three_cnf_table(const CnfFormula& f) {
    if (f.variables < 1) throw ShapeMismatch("three_cnf_table: formula has no variables");
    if (f.variables > 14)
        throw TooLarge("three_cnf_table: more than 14 variables");
    FactorTable t;
    t.dims.assign(f.variables, 2);
    for (const auto& cl : f.clauses) {
        std::vector<ComplexMatrix> row(f.variables, ComplexMatrix::Identity(2, 2));
        for (int l : cl.literals) {
            if (l == 0 || std::abs(l) > f.variables)
                throw MalformedClause("literal " + std::to_string(l) + " out of range");
            ComplexMatrix p = ComplexMatrix::Zero(2, 2);
            p(l > 0 ? 0 : 1, l > 0 ? 0 : 1) = 1.0;
            row[std::abs(l) - 1] = row[std::abs(l) - 1] * p;
        }
        t.cells.push_back(std::move(row));
        t.lambdas.push_back(0.0);
    }
    return t;
}

inline CesInstance from_three_cnf(const CnfFormula& f) {
    return instance::to_instance(three_cnf_table(f));
}

// ---------------------------------------------------------------------------
// Commuting local Hamiltonian against an energy window

// A sum of commuting local terms; no targets, the energy window supplies
// the question.
struct HamiltonianTerms {
    std::vector<int> dims;
    std::vector<CheckOperator> terms;
};

struct EnergyBit {
    int term = 0;         // which input term this value qubit records
    double energy = 0.0;  // eigenvalue of the recorded spectral projector
};

struct HamiltonianReduction {
    CesInstance instance;
    int system_particles = 0;
    std::vector<EnergyBit> bits;  // value qubits, in particle order after the system
    int aux_bits = 0;             // clause-splitting qubits after the value qubits
    // Some bit string's energy lies strictly inside (eps_l, eps_u]; such
    // strings are outside the promise and the clauses reject them.
    bool gap_violation = false;
    long gap_strings = 0;
};

namespace detail {

struct SpectralPart {
    double energy = 0.0;
    ComplexMatrix projector;
};

// Eigendecompose a Hermitian local matrix and merge eigenvalues into
// clusters split at the spectral resolution. Cluster energies sitting next
// to an integer are snapped to it so that hand-built integer spectra survive
// the eigensolver exactly.
inline std::vector<SpectralPart> spectral_parts(const ComplexMatrix& m,
                                                const ToleranceContext& tol) {
    auto eig = linalg::hermitian_eigendecomposition(m, tol);
    double scale = 1.0;
    for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i)
        scale = std::max(scale, std::abs(eig.eigenvalues(i)));
    std::vector<SpectralPart> parts;
    for (Eigen::Index first = 0; first < eig.eigenvalues.size();) {
        Eigen::Index last = first;
        while (last + 1 < eig.eigenvalues.size() &&
               eig.eigenvalues(last + 1) - eig.eigenvalues(last) <=
                   instance::kSpectrumWindow * scale)
            ++last;
        double e = 0.0;
        for (Eigen::Index i = first; i <= last; ++i) e += eig.eigenvalues(i);
        e /= static_cast<double>(last - first + 1);
        if (std::abs(e - std::round(e)) <= 1e-9 * scale) e = std::round(e);
        ComplexMatrix b = eig.vectors.middleCols(first, last - first + 1);
        parts.push_back({e, b * b.adjoint()});
        first = last + 1;
    }
    return parts;
}

// Options for one clause over qubit particles: satisfied when some listed
// particle holds its listed value.
struct BitClause {
    std::vector<std::pair<int, int>> want;
};

// Diagonal projector onto the satisfying assignments, on the clause's own
// particles in ascending order.
inline CheckOperator clause_check(const BitClause& cl) {
    std::vector<int> supp;
    for (auto [q, b] : cl.want)
        if (std::find(supp.begin(), supp.end(), q) == supp.end()) supp.push_back(q);
    std::sort(supp.begin(), supp.end());
    const int w = static_cast<int>(supp.size());
    ComplexMatrix m = ComplexMatrix::Zero(1 << w, 1 << w);
    for (long idx = 0; idx < (1 << w); ++idx) {
        bool sat = false;
        for (auto [q, b] : cl.want) {
            int pos = static_cast<int>(std::find(supp.begin(), supp.end(), q) - supp.begin());
            if (((idx >> (w - 1 - pos)) & 1) == b) {
                sat = true;
                break;
            }
        }
        if (sat) m(idx, idx) = 1.0;
    }
    return CheckOperator::local_term(supp, m);
}

}  // namespace detail

// Records each spectral projector's yes/no into its own value qubit, then
// constrains the value string to energies at or below eps_l. The string
// constraint is built by walking the prefix tree of value assignments:
// whenever no completion of a prefix can reach the threshold, that prefix
// is forbidden by one clause (its minimal such prefixes, so the clause set
// accepts exactly the strings with small enough energy). Clauses wider than
// three bits are chained through fresh auxiliary qubits.
inline HamiltonianReduction from_commuting_hamiltonian(const HamiltonianTerms& h, double eps_l,
                                                       double eps_u,
                                                       const ToleranceContext& tol) {
    if (h.dims.empty()) throw ShapeMismatch("from_commuting_hamiltonian: no particles");
    if (!(eps_u > eps_l))
        throw GapViolation("from_commuting_hamiltonian: the window (eps_l, eps_u] is empty");
    for (const auto& t : h.terms)
        if (t.kind != instance::CheckKind::Local)
            throw ShapeMismatch("from_commuting_hamiltonian: terms must be local operators");
    for (std::size_t a = 0; a < h.terms.size(); ++a)
        for (std::size_t b = a + 1; b < h.terms.size(); ++b)
            if (!instance::checks_commute(h.terms[a], h.terms[b], h.dims, tol))
                throw NonCommutingTerms("terms " + std::to_string(a) + " and " +
                                        std::to_string(b) + " do not commute");

    HamiltonianReduction out;
    out.system_particles = static_cast<int>(h.dims.size());

    std::vector<ComplexMatrix> projectors;
    for (std::size_t a = 0; a < h.terms.size(); ++a)
        for (const auto& part : detail::spectral_parts(h.terms[a].local, tol)) {
            out.bits.push_back({static_cast<int>(a), part.energy});
            projectors.push_back(part.projector);
        }
    const int nbits = static_cast<int>(out.bits.size());
    if (nbits > 16)
        throw TooLarge("from_commuting_hamiltonian: " + std::to_string(nbits) +
                       " spectral projectors");

    // The system with its value register must fit the dense cap before any
    // splitting qubits are added; checking with a running product keeps huge
    // registers from overflowing the count.
    auto capped_dim = [](const std::vector<int>& dims) {
        long total = 1;
        for (int d : dims) {
            total *= d;
            if (total > instance::kMaxTotalDim) return -1L;
        }
        return total;
    };
    {
        std::vector<int> base = h.dims;
        base.insert(base.end(), nbits, 2);
        if (capped_dim(base) < 0)
            throw TooLarge("from_commuting_hamiltonian: system with value register exceeds " +
                           std::to_string(instance::kMaxTotalDim));
    }

    // Every value string's energy, for the promise audit.
    for (long y = 0; y < (1L << nbits); ++y) {
        double e = 0.0;
        for (int i = 0; i < nbits; ++i)
            if ((y >> i) & 1) e += out.bits[i].energy;
        if (e > eps_l && e <= eps_u) ++out.gap_strings;
    }
    out.gap_violation = out.gap_strings > 0;

    // Minimal forbidden prefixes of the value string. Each one is then
    // shrunk further: a fixed bit whose removal keeps the best completion
    // above the threshold contributes nothing and is dropped, which usually
    // collapses threshold clauses to one or two literals.
    std::vector<double> suffix_min(nbits + 1, 0.0);
    for (int i = nbits - 1; i >= 0; --i)
        suffix_min[i] = suffix_min[i + 1] + std::min(out.bits[i].energy, 0.0);
    auto infeasible = [&](const std::vector<std::pair<int, int>>& fixed) {
        double best = 0.0;
        std::vector<char> is_fixed(nbits, 0);
        for (auto [i, v] : fixed) {
            is_fixed[i] = 1;
            best += v * out.bits[i].energy;
        }
        for (int i = 0; i < nbits; ++i)
            if (!is_fixed[i]) best += std::min(out.bits[i].energy, 0.0);
        return best > eps_l;
    };
    std::vector<detail::BitClause> clauses;
    const int first_bit = out.system_particles;
    if (suffix_min[0] > eps_l) {
        // Nothing reaches the threshold; pin one qubit both ways.
        int q = nbits > 0 ? first_bit : first_bit + out.aux_bits++;
        clauses.push_back({{{q, 0}}});
        clauses.push_back({{{q, 1}}});
    } else {
        std::set<std::vector<std::pair<int, int>>> seen;
        std::vector<int> prefix;
        auto walk = [&](auto&& self, int t, double e) -> void {
            if (e + suffix_min[t] > eps_l) {
                std::vector<std::pair<int, int>> fixed;
                for (int i = 0; i < t; ++i) fixed.push_back({i, prefix[i]});
                for (std::size_t i = 0; i < fixed.size();) {
                    auto dropped = fixed;
                    dropped.erase(dropped.begin() + i);
                    if (infeasible(dropped)) fixed = std::move(dropped);
                    else ++i;
                }
                if (seen.insert(fixed).second) {
                    detail::BitClause cl;
                    for (auto [i, v] : fixed) cl.want.push_back({first_bit + i, 1 - v});
                    clauses.push_back(std::move(cl));
                }
                return;
            }
            if (t == nbits) return;
            for (int b : {0, 1}) {
                prefix.push_back(b);
                self(self, t + 1, e + b * out.bits[t].energy);
                prefix.pop_back();
            }
        };
        walk(walk, 0, 0.0);
    }

    // Chain-split wide clauses through fresh qubits.
    std::vector<detail::BitClause> split;
    for (const auto& cl : clauses) {
        if (cl.want.size() <= 3) {
            split.push_back(cl);
            continue;
        }
        int prev = -1;
        std::size_t i = 0;
        // Pending width counts the chain literal carried from the previous
        // link; stop once the remainder fits in one three-bit clause.
        while (cl.want.size() - i + (prev >= 0 ? 1 : 0) > 3) {
            int fresh = first_bit + nbits + out.aux_bits++;
            detail::BitClause link;
            if (prev >= 0) link.want.push_back({prev, 0});
            link.want.push_back(cl.want[i++]);
            if (prev < 0) link.want.push_back(cl.want[i++]);
            link.want.push_back({fresh, 1});
            split.push_back(std::move(link));
            prev = fresh;
        }
        detail::BitClause tail;
        if (prev >= 0) tail.want.push_back({prev, 0});
        for (; i < cl.want.size(); ++i) tail.want.push_back(cl.want[i]);
        split.push_back(std::move(tail));
    }

    CesInstance& x = out.instance;
    x.dims = h.dims;
    x.dims.insert(x.dims.end(), nbits + out.aux_bits, 2);
    if (capped_dim(x.dims) < 0)
        throw TooLarge("from_commuting_hamiltonian: extended space with " +
                       std::to_string(out.aux_bits) + " splitting qubits exceeds " +
                       std::to_string(instance::kMaxTotalDim));

    ComplexMatrix k0 = ComplexMatrix::Zero(2, 2), k1 = ComplexMatrix::Zero(2, 2);
    k0(0, 0) = 1.0;
    k1(1, 1) = 1.0;
    for (int i = 0; i < nbits; ++i) {
        const CheckOperator& term = h.terms[out.bits[i].term];
        const ComplexMatrix& p = projectors[i];
        ComplexMatrix tied =
            linalg::tensor(p, k1) +
            linalg::tensor(ComplexMatrix(ComplexMatrix::Identity(p.rows(), p.cols()) - p), k0);
        std::vector<int> supp = term.support;
        supp.push_back(first_bit + i);
        x.checks.push_back(CheckOperator::local_term(std::move(supp), std::move(tied)));
        x.lambdas.push_back(1.0);
    }
    for (const auto& cl : split) {
        x.checks.push_back(detail::clause_check(cl));
        x.lambdas.push_back(1.0);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Energy witness bundles

// Claim "the term sum has an eigenvalue at most eps_l", certified by one
// eigenvalue per term and a joint eigenvector realizing them.
struct EnergyWitness {
    std::vector<double> lambdas;
    double energy = 0.0;
    ComplexVector state;  // empty when no joint eigenvector was found
};

// Solve the eigenvalue-list instance to extract the certifying state: the
// pairwise solver when every check touches at most two particles, the dense
// engine otherwise.
inline EnergyWitness make_energy_witness(const HamiltonianTerms& h,
                                         const std::vector<double>& lambdas,
                                         const ToleranceContext& tol) {
    if (lambdas.size() != h.terms.size())
        throw ShapeMismatch("make_energy_witness: one eigenvalue per term required");
    EnergyWitness w;
    w.lambdas = lambdas;
    for (double l : lambdas) w.energy += l;
    CesInstance x{h.dims, h.terms, lambdas};
    try {
        auto sol = twolocal::solve(x, tol, true);
        if (sol.positive) w.state = sol.model_state;
    } catch (const NotTwoLocal&) {
        auto res = oracle::common_eigenspace(x, tol);
        if (res.dimension > 0) w.state = res.basis.col(0);
    }
    return w;
}

struct WitnessCheck {
    bool accepted = false;
    std::string reason;
};

// The two acceptance steps: the eigenvalue sum clears the threshold, and
// the state is a unit joint eigenvector with the stated eigenvalues.
inline WitnessCheck verify_energy_witness(const HamiltonianTerms& h, double eps_l,
                                          const EnergyWitness& w, const ToleranceContext& tol) {
    if (w.lambdas.size() != h.terms.size())
        throw ShapeMismatch("verify_energy_witness: one eigenvalue per term required");
    WitnessCheck out;
    double sum = 0.0;
    for (double l : w.lambdas) sum += l;
    if (std::abs(sum - w.energy) > 1e-9 * std::max(1.0, std::abs(sum))) {
        out.reason = "stated energy differs from the eigenvalue sum";
        return out;
    }
    if (sum > eps_l) {
        out.reason = "eigenvalue sum exceeds the acceptance threshold";
        return out;
    }
    if (w.state.size() != linalg::total_dim(h.dims)) {
        out.reason = "witness state is missing or has the wrong dimension";
        return out;
    }
    if (std::abs(w.state.norm() - 1.0) > 1e-8) {
        out.reason = "witness state is not normalized";
        return out;
    }
    for (std::size_t a = 0; a < h.terms.size(); ++a) {
        ComplexMatrix col = w.state;
        ComplexMatrix applied = instance::apply_check(h.terms[a], h.dims, col);
        double scale = std::max({1.0, std::abs(w.lambdas[a]),
                                 instance::check_norm(h.terms[a], tol)});
        if ((applied - w.lambdas[a] * col).norm() > 1e-7 * scale) {
            out.reason = "state is not an eigenvector of term " + std::to_string(a) +
                         " with the stated eigenvalue";
            return out;
        }
    }
    out.accepted = true;
    return out;
}

// ---------------------------------------------------------------------------
// The paired-qubit chain

namespace detail {

inline ComplexMatrix one_qubit(char letter) {
    ComplexMatrix m(2, 2);
    switch (letter) {
        case 'X': m << 0, 1, 1, 0; break;
        case 'Z': m << 1, 0, 0, -1; break;
        default: m = ComplexMatrix::Identity(2, 2);
    }
    return m;
}

// The Z-X-Z check centered on one qubit of the periodic chain, assembled on
// the two four-level particles it touches.
inline CheckOperator chain_check(int center, int n_qubits) {
    std::vector<char> letters(n_qubits, 'I');
    letters[(center - 1 + n_qubits) % n_qubits] = 'Z';
    letters[center] = 'X';
    letters[(center + 1) % n_qubits] = 'Z';
    std::vector<int> supp;
    for (int q = 0; q < n_qubits; ++q)
        if (letters[q] != 'I' &&
            std::find(supp.begin(), supp.end(), q / 2) == supp.end())
            supp.push_back(q / 2);
    std::sort(supp.begin(), supp.end());
    ComplexMatrix m = ComplexMatrix::Identity(1, 1);
    for (int j : supp)
        m = linalg::tensor(m, linalg::tensor(one_qubit(letters[2 * j]),
                                             one_qubit(letters[2 * j + 1])));
    return CheckOperator::local_term(std::move(supp), std::move(m));
}

}  // namespace detail

// Periodic chain of 2n qubits grouped into n four-level particles, one
// Z-X-Z check per qubit, every target +1. The answer space is a single
// state.
inline CesInstance cluster_instance(int particles) {
    if (particles % 2 != 0) throw OddSize("cluster_instance: particle count must be even");
    if (particles < 2) throw ShapeMismatch("cluster_instance: at least two particles");
    if (2 * particles > 12) throw TooLarge("cluster_instance: more than 12 qubits");
    CesInstance x;
    x.dims.assign(particles, 4);
    for (int q = 0; q < 2 * particles; ++q) {
        x.checks.push_back(detail::chain_check(q, 2 * particles));
        x.lambdas.push_back(1.0);
    }
    return x;
}

// The matching Hamiltonian: minus one Z-X-Z term per qubit, so the chain
// state sits at energy minus the qubit count.
inline HamiltonianTerms cluster_hamiltonian(int particles) {
    CesInstance x = cluster_instance(particles);
    HamiltonianTerms h;
    h.dims = x.dims;
    for (auto& c : x.checks) {
        c.local = -c.local;
        h.terms.push_back(std::move(c));
    }
    return h;
}

}  // namespace ces::reductions
