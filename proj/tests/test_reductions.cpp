// Exercises the classical-to-quantum builders: graph coloring and 3-CNF
// instances checked against brute-force counters, the spectral-recording
// construction for commuting Hamiltonians checked against dense spectra,
// energy witness bundles through both acceptance steps and every rejection,
// and the paired-qubit chain together with its disentangling circuit.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>
#include <string>
#include <vector>

#include "ces/errors.hpp"
#include "ces/factorized.hpp"
#include "ces/instance.hpp"
#include "ces/linalg.hpp"
#include "ces/oracle.hpp"
#include "ces/projectors2.hpp"
#include "ces/reductions.hpp"
#include "ces/twolocal.hpp"
#include "corpus.hpp"

using namespace ces;
using instance::CesInstance;
using instance::CheckOperator;
using reductions::CnfClause;
using reductions::CnfFormula;
using reductions::Graph;
using reductions::HamiltonianTerms;

namespace {

// Brute-force proper coloring count, the reference for every coloring
// instance: the answer space is spanned by the proper colorings, so its
// dimension must equal this number exactly.
long proper_colorings(const Graph& g) {
    long total = 1;
    for (int v = 0; v < g.vertices; ++v) total *= 3;
    long count = 0;
    for (long a = 0; a < total; ++a) {
        long rest = a;
        std::vector<int> color(g.vertices);
        for (int v = 0; v < g.vertices; ++v) {
            color[v] = static_cast<int>(rest % 3);
            rest /= 3;
        }
        bool ok = true;
        for (auto [u, v] : g.edges) ok = ok && color[u] != color[v];
        if (ok) ++count;
    }
    return count;
}

bool clause_satisfied(const CnfClause& cl, long bits) {
    for (int l : cl.literals) {
        int val = static_cast<int>((bits >> (std::abs(l) - 1)) & 1);
        if ((l > 0 && val == 1) || (l < 0 && val == 0)) return true;
    }
    return false;
}

// Model count by full enumeration; the formula instances must match it.
long satisfying_assignments(const CnfFormula& f) {
    long count = 0;
    for (long bits = 0; bits < (1L << f.variables); ++bits) {
        bool ok = true;
        for (const auto& cl : f.clauses) ok = ok && clause_satisfied(cl, bits);
        if (ok) ++count;
    }
    return count;
}

// Full spectrum of the term sum, assembled densely. Everything the spectral
// recording claims about energies is measured against this.
Eigen::VectorXd dense_spectrum(const HamiltonianTerms& h, const ToleranceContext& tol) {
    const long d = linalg::total_dim(h.dims);
    ComplexMatrix hd = ComplexMatrix::Zero(d, d);
    for (const auto& t : h.terms)
        hd += instance::apply_check(t, h.dims, ComplexMatrix::Identity(d, d));
    return linalg::hermitian_eigendecomposition(hd, tol).eigenvalues;
}

long states_at_or_below(const Eigen::VectorXd& spectrum, double e) {
    long count = 0;
    for (Eigen::Index i = 0; i < spectrum.size(); ++i)
        if (spectrum(i) <= e) ++count;
    return count;
}

ComplexMatrix pauli_letter(int x, int z) {
    ComplexMatrix m(2, 2);
    if (x && z)
        m << 0.0, std::complex<double>(0.0, -1.0), std::complex<double>(0.0, 1.0), 0.0;
    else if (x)
        m << 0, 1, 1, 0;
    else if (z)
        m << 1, 0, 0, -1;
    else
        m = ComplexMatrix::Identity(2, 2);
    return m;
}

// A signed Pauli string as a local Hamiltonian term on its nontrivial sites.
CheckOperator pauli_term(const ces::factorized::PauliTerm& t, double coeff) {
    std::vector<int> supp;
    ComplexMatrix m = ComplexMatrix::Identity(1, 1);
    m *= coeff * static_cast<double>(t.sign);
    for (std::size_t j = 0; j < t.x.size(); ++j)
        if (t.x[j] || t.z[j]) {
            supp.push_back(static_cast<int>(j));
            m = linalg::tensor(m, pauli_letter(t.x[j], t.z[j]));
        }
    return CheckOperator::local_term(std::move(supp), std::move(m));
}

ComplexMatrix two_qubit(const ComplexMatrix& a, const ComplexMatrix& b) {
    return linalg::tensor(a, b);
}

// Reduced density matrix of one qubit pair, big-endian qubit indexing.
ComplexMatrix pair_marginal(const ComplexMatrix& s, int qa, int qb, int n_qubits) {
    ComplexMatrix rho = ComplexMatrix::Zero(4, 4);
    const long d = 1L << n_qubits;
    auto bit = [&](long i, int q) { return (i >> (n_qubits - 1 - q)) & 1L; };
    const long keep = (1L << (n_qubits - 1 - qa)) | (1L << (n_qubits - 1 - qb));
    for (long i = 0; i < d; ++i)
        for (long j = 0; j < d; ++j) {
            if ((i & ~keep) != (j & ~keep)) continue;
            rho(2 * bit(i, qa) + bit(i, qb), 2 * bit(j, qa) + bit(j, qb)) +=
                s(i, 0) * std::conj(s(j, 0));
        }
    return rho;
}

CheckOperator z_at(int site) {
    ComplexMatrix z(2, 2);
    z << 1, 0, 0, -1;
    return CheckOperator::local_term({site}, z);
}

CheckOperator zz_at(int a, int b) {
    ComplexMatrix z(2, 2);
    z << 1, 0, 0, -1;
    return CheckOperator::local_term({a, b}, linalg::tensor(z, z));
}

}  // namespace

TEST_CASE("edge lists parse, deduplicate, and reject junk") {
    Graph g = reductions::parse_edge_list("0 1\n1 2\n\n# comment line\n0 2\n");
    CHECK(g.vertices == 3);
    REQUIRE(g.edges.size() == 3);
    CHECK(g.edges[0] == std::pair<int, int>{0, 1});
    CHECK(g.edges[2] == std::pair<int, int>{0, 2});

    Graph h = reductions::parse_edge_list("2 0\n0 2\n");
    CHECK(h.edges.size() == 1);
    CHECK(h.edges[0] == std::pair<int, int>{0, 2});

    // An isolated top vertex still raises the count.
    CHECK(reductions::parse_edge_list("0 5\n").vertices == 6);

    CHECK_THROWS_AS(reductions::parse_edge_list("0 0\n"), ParseError);
    CHECK_THROWS_AS(reductions::parse_edge_list("1 2 3\n"), ParseError);
    CHECK_THROWS_AS(reductions::parse_edge_list("a 1\n"), ParseError);
    CHECK_THROWS_AS(reductions::parse_edge_list("1 -2\n"), ParseError);
    CHECK_THROWS_AS(reductions::parse_edge_list("12abc 3\n"), ParseError);
    CHECK_THROWS_AS(reductions::parse_edge_list("1 3x\n"), ParseError);
}

TEST_CASE("triangle coloring instance has a six-dimensional answer space") {
    ToleranceContext tol;
    Graph g = reductions::parse_edge_list("0 1\n1 2\n0 2\n");
    CesInstance x = reductions::from_three_coloring(g);
    CHECK(x.dims == std::vector<int>{3, 3, 3});
    CHECK(x.checks.size() == 9);
    REQUIRE(instance::validate(x, tol).valid);

    long expected = proper_colorings(g);
    CHECK(expected == 6);
    CHECK(oracle::common_eigenspace(x, tol).dimension == expected);
}

TEST_CASE("coloring reductions count proper colorings exactly") {
    ToleranceContext tol;

    SECTION("complete graph on four vertices is uncolorable") {
        Graph k4{4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};
        CHECK(proper_colorings(k4) == 0);
        CHECK(oracle::common_eigenspace(reductions::from_three_coloring(k4), tol).dimension == 0);
    }

    SECTION("edgeless graph leaves the whole space") {
        Graph free3{3, {}};
        CesInstance x = reductions::from_three_coloring(free3);
        CHECK(x.checks.empty());
        CHECK(oracle::common_eigenspace(x, tol).dimension == 27);
    }

    SECTION("random graphs") {
        std::mt19937_64 rng(61243);
        std::uniform_int_distribution<int> nv(3, 5);
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        for (int trial = 0; trial < 10; ++trial) {
            Graph g;
            g.vertices = nv(rng);
            for (int u = 0; u < g.vertices; ++u)
                for (int v = u + 1; v < g.vertices; ++v)
                    if (coin(rng) < 0.45) g.edges.push_back({u, v});
            CesInstance x = reductions::from_three_coloring(g);
            REQUIRE(instance::validate(x, tol).valid);
            CHECK(oracle::common_eigenspace(x, tol).dimension == proper_colorings(g));
        }
    }

    SECTION("bad shapes") {
        CHECK_THROWS_AS(reductions::from_three_coloring(Graph{}), ShapeMismatch);
        CHECK_THROWS_AS(reductions::from_three_coloring(Graph{2, {{0, 5}}}), ShapeMismatch);
        CHECK_THROWS_AS(reductions::from_three_coloring(Graph{2, {{1, 1}}}), ShapeMismatch);
    }
}

TEST_CASE("clause tables pin falsifying patterns") {
    ToleranceContext tol;

    SECTION("one clause forbids exactly its falsifying assignment") {
        CnfFormula f{3, {CnfClause{{1, 2, 3}}}};
        instance::FactorTable t = reductions::three_cnf_table(f);
        REQUIRE(t.cells.size() == 1);
        for (int j = 0; j < 3; ++j) {
            CHECK(std::abs(t.cells[0][j](0, 0) - 1.0) < 1e-12);
            CHECK(std::abs(t.cells[0][j](1, 1)) < 1e-12);
        }
        CesInstance x = reductions::from_three_cnf(f);
        REQUIRE(instance::validate(x, tol).valid);
        CHECK(satisfying_assignments(f) == 7);
        CHECK(oracle::common_eigenspace(x, tol).dimension == 7);
    }

    SECTION("a contradiction empties the space") {
        CnfFormula f{1, {CnfClause{{1, 1, 1}}, CnfClause{{-1, -1, -1}}}};
        CHECK(satisfying_assignments(f) == 0);
        CesInstance x = reductions::from_three_cnf(f);
        REQUIRE(instance::validate(x, tol).valid);
        CHECK(oracle::common_eigenspace(x, tol).dimension == 0);
        CHECK_FALSE(projectors2::solve_projectors_qubits(reductions::three_cnf_table(f), tol)
                        .positive);
    }

    SECTION("a tautological clause constrains nothing") {
        CnfFormula f{2, {CnfClause{{1, -1, 2}}}};
        instance::FactorTable t = reductions::three_cnf_table(f);
        CHECK(t.cells[0][0].norm() < 1e-12);  // both projectors at one variable
        CHECK(oracle::common_eigenspace(reductions::from_three_cnf(f), tol).dimension == 4);
    }

    SECTION("bad formulas") {
        CHECK_THROWS_AS(reductions::three_cnf_table(CnfFormula{}), ShapeMismatch);
        CHECK_THROWS_AS(reductions::three_cnf_table(CnfFormula{15, {CnfClause{{1, 2, 3}}}}),
                        TooLarge);
        CHECK_THROWS_AS(reductions::three_cnf_table(CnfFormula{2, {CnfClause{{1, 2, 5}}}}),
                        MalformedClause);
    }
}

TEST_CASE("dimacs parsing accepts headers and rejects malformed clauses") {
    CnfFormula f = reductions::parse_dimacs(
        "c a comment\n"
        "p cnf 5 2\n"
        "1 -2 3 0\n"
        "-1 4 5 0\n"
        "%\n"
        "ignored after the percent line\n");
    CHECK(f.variables == 5);
    REQUIRE(f.clauses.size() == 2);
    CHECK(f.clauses[0].literals == std::array<int, 3>{1, -2, 3});
    CHECK(f.clauses[1].literals == std::array<int, 3>{-1, 4, 5});

    // Without a header the variable count follows the literals.
    CHECK(reductions::parse_dimacs("1 -7 2 0\n").variables == 7);

    CHECK_THROWS_AS(reductions::parse_dimacs("1 2 0\n"), MalformedClause);
    CHECK_THROWS_AS(reductions::parse_dimacs("1 2 3 4 0\n"), MalformedClause);
    CHECK_THROWS_AS(reductions::parse_dimacs("1 2 three 0\n"), ParseError);
    CHECK_THROWS_AS(reductions::parse_dimacs("p dnf 3 1\n"), ParseError);
}

TEST_CASE("formula instances agree with the qubit projector solver and count models") {
    ToleranceContext tol;
    std::mt19937_64 rng(90217);

    auto random_formula = [&](int variables, int clauses) {
        std::uniform_int_distribution<int> var(1, variables);
        std::uniform_int_distribution<int> sign(0, 1);
        CnfFormula f;
        f.variables = variables;
        for (int c = 0; c < clauses; ++c) {
            CnfClause cl;
            for (int i = 0; i < 3; ++i) cl.literals[i] = var(rng) * (sign(rng) ? 1 : -1);
            f.clauses.push_back(cl);
        }
        return f;
    };

    SECTION("six variables, exact dimension three ways") {
        std::uniform_int_distribution<int> nclauses(4, 26);
        for (int trial = 0; trial < 10; ++trial) {
            CnfFormula f = random_formula(6, nclauses(rng));
            long models = satisfying_assignments(f);
            CesInstance x = reductions::from_three_cnf(f);
            REQUIRE(instance::validate(x, tol).valid);
            CHECK(oracle::common_eigenspace(x, tol).dimension == models);

            instance::FactorTable t = reductions::three_cnf_table(f);
            auto fac = factorized::solve_factorized(t, tol);
            if (fac.dimension >= 0) CHECK(fac.dimension == models);
            CHECK((fac.outcome == factorized::Outcome::Positive) == (models > 0));

            auto q = projectors2::solve_projectors_qubits(t, tol);
            CHECK(q.positive == (models > 0));
            if (q.positive) CHECK(projectors2::verify_projector_witness(t, *q.witness, tol));
        }
    }

    SECTION("ten variables, satisfiability with verified strings") {
        std::uniform_int_distribution<int> nclauses(10, 44);
        int positives = 0, negatives = 0;
        for (int trial = 0; trial < 8; ++trial) {
            CnfFormula f = random_formula(10, nclauses(rng));
            long models = satisfying_assignments(f);
            (models > 0 ? positives : negatives) += 1;

            instance::FactorTable t = reductions::three_cnf_table(f);
            auto q = projectors2::solve_projectors_qubits(t, tol);
            CHECK(q.positive == (models > 0));
            if (q.positive) CHECK(projectors2::verify_projector_witness(t, *q.witness, tol));
            CHECK(oracle::common_eigenspace(reductions::from_three_cnf(f), tol).dimension ==
                  models);
        }
        // The clause range straddles the satisfiability threshold, so both
        // outcomes should appear.
        CHECK(positives >= 1);
        CHECK(negatives >= 1);
    }
}

TEST_CASE("spectral recording accepts exactly the low-energy strings") {
    ToleranceContext tol;
    HamiltonianTerms h{{2}, {z_at(0)}};

    auto red = reductions::from_commuting_hamiltonian(h, -1.0, 0.0, tol);
    REQUIRE(red.bits.size() == 2);
    CHECK(red.bits[0].term == 0);
    CHECK(red.bits[0].energy == -1.0);  // snapped, so exact
    CHECK(red.bits[1].energy == 1.0);
    CHECK(red.system_particles == 1);
    CHECK(red.aux_bits == 0);
    CHECK(red.instance.dims == std::vector<int>{2, 2, 2});

    // The strings 00 and 11 both sit at energy zero, inside the window.
    CHECK(red.gap_violation);
    CHECK(red.gap_strings == 2);

    REQUIRE(instance::validate(red.instance, tol).valid);
    // Unique solution: the spin-down state with value string 10.
    CHECK(oracle::common_eigenspace(red.instance, tol).dimension == 1);

    // A window placed below every recordable energy flags nothing.
    CHECK_FALSE(reductions::from_commuting_hamiltonian(h, -1.0, -0.5, tol).gap_violation);

    CHECK_THROWS_AS(reductions::from_commuting_hamiltonian(h, -1.0, -1.0, tol), GapViolation);
    CHECK_THROWS_AS(reductions::from_commuting_hamiltonian(h, 0.0, -2.0, tol), GapViolation);
    CHECK_THROWS_AS(reductions::from_commuting_hamiltonian(HamiltonianTerms{}, -1.0, 0.0, tol),
                    ShapeMismatch);

    HamiltonianTerms clash{{2}, {z_at(0), CheckOperator::local_term({0}, pauli_letter(1, 0))}};
    CHECK_THROWS_AS(reductions::from_commuting_hamiltonian(clash, -1.0, 0.0, tol),
                    NonCommutingTerms);
}

TEST_CASE("frustrated triangle stays above the threshold") {
    ToleranceContext tol;
    HamiltonianTerms h{{2, 2, 2}, {zz_at(0, 1), zz_at(1, 2), zz_at(0, 2)}};

    Eigen::VectorXd spec = dense_spectrum(h, tol);
    CHECK(spec(0) == Catch::Approx(-1.0));  // frustration: one bond always pays

    auto red = reductions::from_commuting_hamiltonian(h, -3.0, -1.0, tol);
    REQUIRE(instance::validate(red.instance, tol).valid);
    CHECK(red.bits.size() == 6);
    CHECK(red.aux_bits == 0);

    // Only the never-realized all-minus string clears the threshold, so the
    // answer space is empty even though the clauses accept that string.
    CHECK(oracle::common_eigenspace(red.instance, tol).dimension == 0);

    // Window audit against a direct enumeration of the recorded energies.
    long in_gap = 0;
    for (long y = 0; y < 64; ++y) {
        double e = 0.0;
        for (int i = 0; i < 6; ++i)
            if ((y >> i) & 1) e += red.bits[i].energy;
        if (e > -3.0 && e <= -1.0) ++in_gap;
    }
    CHECK(red.gap_strings == in_gap);
    CHECK(in_gap == 21);
}

TEST_CASE("threshold sweep on a small chain tracks the dense spectrum") {
    ToleranceContext tol;
    HamiltonianTerms h{{2, 2}, {zz_at(0, 1), z_at(0)}};
    Eigen::VectorXd spec = dense_spectrum(h, tol);
    CHECK(spec(0) == Catch::Approx(-2.0));

    for (double eps_l : {-2.0, -1.5, -0.5, 0.5, 1.5}) {
        auto red = reductions::from_commuting_hamiltonian(h, eps_l, eps_l + 0.25, tol);
        REQUIRE(instance::validate(red.instance, tol).valid);
        long dim = oracle::common_eigenspace(red.instance, tol).dimension;
        long expected = states_at_or_below(spec, eps_l);
        if (red.aux_bits == 0) {
            // Without splitting qubits the reduced dimension counts the
            // eigenstates below the threshold, one value string per sector.
            CHECK(dim == expected);
        } else {
            CHECK((dim > 0) == (expected > 0));
        }
        // Every clause stays within three particles and every energy check
        // touches one particle more than its term.
        for (const auto& c : red.instance.checks)
            CHECK(c.support.size() <= 3);
    }

    // Too many spectral projectors for the value register.
    HamiltonianTerms wide;
    wide.dims.assign(9, 2);
    for (int j = 0; j < 9; ++j) wide.terms.push_back(z_at(j));
    CHECK_THROWS_AS(reductions::from_commuting_hamiltonian(wide, -1.0, 0.0, tol), TooLarge);

    // Value register within its own bound, but system plus register is too big.
    HamiltonianTerms tall;
    tall.dims = {2, 2};
    for (int j = 0; j < 8; ++j) tall.terms.push_back(z_at(j % 2));
    CHECK_THROWS_AS(reductions::from_commuting_hamiltonian(tall, -1.0, 0.0, tol), TooLarge);

    // Here even the register fits, but the threshold sits where the clause
    // set needs wide clauses, and the splitting qubits overflow the space.
    HamiltonianTerms crowded;
    crowded.dims = {2};
    for (int j = 0; j < 6; ++j) crowded.terms.push_back(z_at(0));
    CHECK_THROWS_AS(reductions::from_commuting_hamiltonian(crowded, -1.0, 0.0, tol), TooLarge);
}

TEST_CASE("commuting Pauli Hamiltonians reduce with matching answers") {
    ToleranceContext tol;
    std::mt19937_64 rng(415901);
    std::uniform_int_distribution<int> nq(2, 3);
    std::uniform_int_distribution<int> mag(0, 2);
    const double mags[3] = {0.5, 1.0, 2.0};

    int checked = 0;
    for (int trial = 0; trial < 8; ++trial) {
        int n = nq(rng);
        corpus::PauliSet gens = corpus::random_stabilizer_generators(rng, n, 2);
        if (gens.terms.size() < 2) continue;
        HamiltonianTerms h;
        h.dims.assign(n, 2);
        for (const auto& t : gens.terms) h.terms.push_back(pauli_term(t, mags[mag(rng)]));

        Eigen::VectorXd spec = dense_spectrum(h, tol);
        const double ground = spec(0);

        auto low = reductions::from_commuting_hamiltonian(h, ground + 0.01, ground + 0.02, tol);
        REQUIRE(instance::validate(low.instance, tol).valid);
        long dim = oracle::common_eigenspace(low.instance, tol).dimension;
        CHECK(dim > 0);
        if (low.aux_bits == 0) CHECK(dim == states_at_or_below(spec, ground + 0.01));

        auto none = reductions::from_commuting_hamiltonian(h, ground - 0.01, ground, tol);
        REQUIRE(instance::validate(none.instance, tol).valid);
        CHECK(oracle::common_eigenspace(none.instance, tol).dimension == 0);
        ++checked;
    }
    CHECK(checked >= 6);
}

TEST_CASE("energy witnesses certify the chain ground state") {
    ToleranceContext tol;
    HamiltonianTerms h = reductions::cluster_hamiltonian(4);
    std::vector<double> lambdas(h.terms.size(), -1.0);

    auto w = reductions::make_energy_witness(h, lambdas, tol);
    CHECK(w.energy == Catch::Approx(-8.0));
    REQUIRE(w.state.size() == 256);

    auto ok = reductions::verify_energy_witness(h, -8.0, w, tol);
    CHECK(ok.accepted);
    CHECK(ok.reason.empty());

    SECTION("threshold rejections") {
        auto r = reductions::verify_energy_witness(h, -8.5, w, tol);
        CHECK_FALSE(r.accepted);
        CHECK(r.reason.find("exceeds") != std::string::npos);

        auto bad = w;
        bad.energy = -7.0;
        auto r2 = reductions::verify_energy_witness(h, -8.0, bad, tol);
        CHECK_FALSE(r2.accepted);
        CHECK(r2.reason.find("differs") != std::string::npos);
    }

    SECTION("an unrealizable eigenvalue list yields no state") {
        auto off = lambdas;
        off[0] = 0.5;  // outside the term's two-point spectrum
        auto w2 = reductions::make_energy_witness(h, off, tol);
        CHECK(w2.state.size() == 0);
        auto r = reductions::verify_energy_witness(h, -6.5, w2, tol);
        CHECK_FALSE(r.accepted);
        CHECK(r.reason.find("missing") != std::string::npos);
    }

    SECTION("state tampering is caught") {
        auto bad = w;
        bad.state(0) += 0.1;
        bad.state.normalize();
        auto r = reductions::verify_energy_witness(h, -8.0, bad, tol);
        CHECK_FALSE(r.accepted);
        CHECK(r.reason.find("eigenvector") != std::string::npos);

        auto unnorm = w;
        unnorm.state *= 2.0;
        auto r2 = reductions::verify_energy_witness(h, -8.0, unnorm, tol);
        CHECK_FALSE(r2.accepted);
        CHECK(r2.reason.find("normalized") != std::string::npos);
    }

    SECTION("shape guards") {
        CHECK_THROWS_AS(reductions::make_energy_witness(h, {-1.0}, tol), ShapeMismatch);
        auto short_w = w;
        short_w.lambdas.pop_back();
        CHECK_THROWS_AS(reductions::verify_energy_witness(h, -8.0, short_w, tol), ShapeMismatch);
    }

    SECTION("wide terms fall back to the dense engine") {
        ComplexMatrix z(2, 2);
        z << 1, 0, 0, -1;
        ComplexMatrix zzz = linalg::tensor(z, linalg::tensor(z, z));
        HamiltonianTerms h3{{2, 2, 2}, {CheckOperator::local_term({0, 1, 2}, zzz)}};
        auto w3 = reductions::make_energy_witness(h3, {-1.0}, tol);
        REQUIRE(w3.state.size() == 8);
        CHECK(reductions::verify_energy_witness(h3, -1.0, w3, tol).accepted);
    }
}

TEST_CASE("the paired-qubit chain pins a single state") {
    ToleranceContext tol;
    CesInstance x = reductions::cluster_instance(4);
    CHECK(x.dims == std::vector<int>{4, 4, 4, 4});
    CHECK(x.checks.size() == 8);
    REQUIRE(instance::validate(x, tol).valid);
    CHECK(oracle::common_eigenspace(x, tol).dimension == 1);

    auto sol = twolocal::solve(x, tol, true);
    REQUIRE(sol.positive);
    CHECK(sol.dimension == 1);
    REQUIRE(sol.model_state.size() == 256);

    SECTION("intra-particle phase gates disentangle it into bond pairs") {
        const std::vector<int> qdims(8, 2);
        ComplexMatrix cz = ComplexMatrix::Identity(4, 4);
        cz(3, 3) = -1.0;
        ComplexMatrix s = sol.model_state;
        for (int j = 0; j < 4; ++j) s = linalg::apply_local(cz, {2 * j, 2 * j + 1}, qdims, s);

        ComplexMatrix sx = pauli_letter(1, 0), sz = pauli_letter(0, 1);
        for (int j = 0; j < 4; ++j) {
            int right = 2 * j + 1, next_left = (2 * j + 2) % 8;
            // Each bond pair is pure and a joint +1 eigenstate of the two
            // crossed checks, which pins it completely.
            ComplexMatrix rho = pair_marginal(s, right, next_left, 8);
            CHECK(std::abs((rho * rho).trace().real() - 1.0) < 1e-8);
            for (const auto& op : {two_qubit(sx, sz), two_qubit(sz, sx)}) {
                ComplexMatrix moved = linalg::apply_local(op, {right, next_left}, qdims, s);
                CHECK((s.adjoint() * moved)(0, 0).real() == Catch::Approx(1.0));
            }
        }
    }

    SECTION("matching Hamiltonian reaches minus the qubit count") {
        HamiltonianTerms h = reductions::cluster_hamiltonian(2);
        CHECK(dense_spectrum(h, tol)(0) == Catch::Approx(-4.0));
    }

    SECTION("size guards") {
        CHECK_THROWS_AS(reductions::cluster_instance(3), OddSize);
        CHECK_THROWS_AS(reductions::cluster_instance(0), ShapeMismatch);
        CHECK_THROWS_AS(reductions::cluster_instance(8), TooLarge);
    }
}
