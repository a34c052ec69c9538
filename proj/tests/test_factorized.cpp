// Covers the factor-table solver end to end: signed Pauli arithmetic and
// stabilizer dimensions checked against dense kernels, the Pauli normal
// form, table simplification, canonical splitting with its transform log,
// and the branch-summed solve against the brute-force engine. Random tables
// come from generators whose answers the dense engine certifies.

#include <catch2/catch_amalgamated.hpp>

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ces/errors.hpp"
#include "ces/factorized.hpp"
#include "ces/instance.hpp"
#include "ces/linalg.hpp"
#include "ces/oracle.hpp"
#include "corpus.hpp"

using namespace ces;
using factorized::Outcome;
using factorized::PauliTerm;
using factorized::StabilizerGroup;
using instance::FactorTable;

namespace {

PauliTerm term_of(const std::string& s, int sign = 1) {
    PauliTerm t;
    t.sign = sign;
    for (char c : s) {
        t.x.push_back(c == 'X' || c == 'Y');
        t.z.push_back(c == 'Z' || c == 'Y');
    }
    return t;
}

StabilizerGroup group_of(const std::vector<PauliTerm>& gens, const std::vector<int>& targets) {
    StabilizerGroup s;
    s.n_qubits = gens.empty() ? 0 : static_cast<long>(gens[0].x.size());
    s.generators = gens;
    s.targets = targets;
    return s;
}

// Joint eigenspace dimension computed densely, one kernel restriction per
// generator. Independent of the GF(2) elimination under test.
long dense_group_dim(const StabilizerGroup& s, const ToleranceContext& tol) {
    const long d = 1L << s.n_qubits;
    ComplexMatrix basis = ComplexMatrix::Identity(d, d);
    for (std::size_t a = 0; a < s.generators.size() && basis.cols() > 0; ++a) {
        ComplexMatrix m = factorized::pauli_term_matrix(s.generators[a]);
        m -= static_cast<double>(s.targets[a]) * ComplexMatrix::Identity(d, d);
        basis = linalg::restrict_to_kernel(basis, m * basis, tol, tol.eq_eps);
    }
    return basis.cols();
}

ComplexMatrix diag2(double a, double b) {
    ComplexMatrix m = ComplexMatrix::Zero(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

long oracle_dim(const FactorTable& t, const ToleranceContext& tol) {
    return oracle::common_eigenspace(instance::to_instance(t), tol).dimension;
}

}  // namespace

TEST_CASE("pauli term matrices multiply with the tracked phase") {
    // W(x1,z1) W(x2,z2) = i^g W(x1^x2, z1^z2) entrywise, all 16 site pairs.
    for (int x1 = 0; x1 < 2; ++x1)
        for (int z1 = 0; z1 < 2; ++z1)
            for (int x2 = 0; x2 < 2; ++x2)
                for (int z2 = 0; z2 < 2; ++z2) {
                    int g = factorized::detail::site_product_phase(x1, z1, x2, z2);
                    ComplexMatrix lhs = factorized::detail::pauli_unit(x1, z1) *
                                        factorized::detail::pauli_unit(x2, z2);
                    Complex ph = std::pow(Complex(0.0, 1.0), g);
                    ComplexMatrix rhs = ph * factorized::detail::pauli_unit(x1 ^ x2, z1 ^ z2);
                    REQUIRE(linalg::max_abs(lhs - rhs) < 1e-12);
                }
}

TEST_CASE("symplectic commutation agrees with dense commutators") {
    std::mt19937_64 rng(41);
    std::uniform_int_distribution<int> bit(0, 1);
    for (int trial = 0; trial < 40; ++trial) {
        PauliTerm a, b;
        for (int j = 0; j < 3; ++j) {
            a.x.push_back(static_cast<std::uint8_t>(bit(rng)));
            a.z.push_back(static_cast<std::uint8_t>(bit(rng)));
            b.x.push_back(static_cast<std::uint8_t>(bit(rng)));
            b.z.push_back(static_cast<std::uint8_t>(bit(rng)));
        }
        ComplexMatrix ma = factorized::pauli_term_matrix(a);
        ComplexMatrix mb = factorized::pauli_term_matrix(b);
        bool dense = linalg::max_abs(ma * mb - mb * ma) < 1e-12;
        REQUIRE(factorized::symplectic_commute(a, b) == dense);
    }
}

TEST_CASE("stabilizer dimension on hand-built groups") {
    ToleranceContext tol;
    SECTION("bell pair generators fix one state") {
        auto s = group_of({term_of("ZZ"), term_of("XX")}, {1, 1});
        REQUIRE(factorized::stabilizer_dimension(s) == 1);
        REQUIRE(dense_group_dim(s, tol) == 1);
    }
    SECTION("a consistent dependent row is harmless") {
        auto s = group_of({term_of("ZZ"), term_of("XX"), term_of("YY")}, {1, 1, -1});
        REQUIRE(factorized::stabilizer_dimension(s) == 1);
        REQUIRE(dense_group_dim(s, tol) == 1);
    }
    SECTION("a contradictory dependent row empties the space") {
        auto s = group_of({term_of("ZZ"), term_of("XX"), term_of("YY")}, {1, 1, 1});
        REQUIRE(factorized::stabilizer_dimension(s) == 0);
        REQUIRE(dense_group_dim(s, tol) == 0);
    }
    SECTION("opposite signs on the same string clash") {
        auto s = group_of({term_of("Z", 1), term_of("Z", -1)}, {1, 1});
        REQUIRE(factorized::stabilizer_dimension(s) == 0);
        REQUIRE(dense_group_dim(s, tol) == 0);
    }
    SECTION("three-qubit chain plus parity fixes one state") {
        auto s = group_of({term_of("ZZI"), term_of("IZZ"), term_of("XXX")}, {1, 1, 1});
        REQUIRE(factorized::stabilizer_dimension(s) == 1);
        REQUIRE(dense_group_dim(s, tol) == 1);
    }
    SECTION("a repeated generator does not cut the space twice") {
        auto s = group_of({term_of("ZZ"), term_of("ZZ")}, {1, 1});
        REQUIRE(factorized::stabilizer_dimension(s) == 2);
        REQUIRE(dense_group_dim(s, tol) == 2);
    }
    SECTION("no generators means the full space") {
        StabilizerGroup s;
        s.n_qubits = 3;
        REQUIRE(factorized::stabilizer_dimension(s) == 8);
    }
    SECTION("anticommuting generators are rejected") {
        auto s = group_of({term_of("Z"), term_of("X")}, {1, 1});
        REQUIRE_THROWS_AS(factorized::stabilizer_dimension(s), NonCommutingGenerators);
    }
}

TEST_CASE("stabilizer dimension matches dense joint eigenspaces on random groups") {
    ToleranceContext tol;
    std::mt19937_64 rng(909);
    int tested = 0;
    for (int trial = 0; trial < 24; ++trial) {
        int n = 2 + trial % 3;
        int k = 1 + trial % n;
        auto set = corpus::random_stabilizer_generators(rng, n, k);
        if (static_cast<int>(set.terms.size()) < k) continue;
        auto s = group_of(set.terms, set.targets);
        REQUIRE(factorized::stabilizer_dimension(s) == dense_group_dim(s, tol));
        REQUIRE(factorized::stabilizer_dimension(s) == (1L << (n - k)));

        // Append the product of the first two generators: with its natural
        // target the dimension is unchanged, with the flipped target it
        // collapses to zero.
        if (k >= 2) {
            std::vector<int> subset = {0, 1};
            auto prod = corpus::subset_product(set, subset, n);
            auto consistent = s;
            consistent.generators.push_back(prod.term);
            consistent.targets.push_back(prod.target);
            REQUIRE(factorized::stabilizer_dimension(consistent) == (1L << (n - k)));
            REQUIRE(dense_group_dim(consistent, tol) == (1L << (n - k)));
            auto clashing = s;
            clashing.generators.push_back(prod.term);
            clashing.targets.push_back(-prod.target);
            REQUIRE(factorized::stabilizer_dimension(clashing) == 0);
            REQUIRE(dense_group_dim(clashing, tol) == 0);
        }
        ++tested;
    }
    REQUIRE(tested >= 12);
}

TEST_CASE("pauli normal form on one qubit returns the literal strings") {
    ToleranceContext tol;
    auto frame = factorized::pauli_normal_form({corpus::pauli('Z'), corpus::pauli('X')}, tol);
    REQUIRE(frame.n_qubits == 1);
    REQUIRE(frame.strings[0].x[0] == 0);
    REQUIRE(frame.strings[0].z[0] == 1);
    REQUIRE(frame.strings[0].sign == 1);
    REQUIRE(frame.strings[1].x[0] == 1);
    REQUIRE(frame.strings[1].z[0] == 0);
    REQUIRE(frame.strings[1].sign == 1);
}

TEST_CASE("pauli normal form rejects bad families") {
    ToleranceContext tol;
    REQUIRE_THROWS_AS(factorized::pauli_normal_form({2.0 * corpus::pauli('I')}, tol),
                      NotInvolution);
    REQUIRE_THROWS_AS(factorized::pauli_normal_form({corpus::pauli('Z')}, tol), NotFullAlgebra);
}

TEST_CASE("pauli normal form undoes a hidden rotation") {
    ToleranceContext tol;
    std::mt19937_64 rng(77);
    std::vector<PauliTerm> terms = {term_of("ZI"), term_of("XI"), term_of("IZ"), term_of("IX"),
                                    term_of("YY", -1)};
    for (int trial = 0; trial < 4; ++trial) {
        ComplexMatrix u = linalg::random_unitary(4, rng);
        std::vector<ComplexMatrix> fam;
        for (const auto& t : terms)
            fam.push_back(u * factorized::pauli_term_matrix(t) * ComplexMatrix(u.adjoint()));
        auto frame = factorized::pauli_normal_form(fam, tol);
        REQUIRE(frame.n_qubits == 2);
        for (std::size_t a = 0; a < fam.size(); ++a) {
            ComplexMatrix rebuilt = frame.u * factorized::pauli_term_matrix(frame.strings[a]) *
                                    ComplexMatrix(frame.u.adjoint());
            REQUIRE(linalg::max_abs(rebuilt - fam[a]) < 1e-8);
        }
        // Commutation relations survive the renaming.
        for (std::size_t a = 0; a < terms.size(); ++a)
            for (std::size_t b = a + 1; b < terms.size(); ++b)
                REQUIRE(factorized::symplectic_commute(terms[a], terms[b]) ==
                        factorized::symplectic_commute(frame.strings[a], frame.strings[b]));
    }
}

TEST_CASE("simplification shrinks columns to the regular images") {
    ToleranceContext tol;
    FactorTable t;
    t.dims = {3};
    ComplexMatrix c = ComplexMatrix::Zero(3, 3);
    c(0, 0) = 2.0;
    t.cells = {{c}};
    t.lambdas = {2.0};
    auto simp = factorized::simplify_table(t, tol);
    REQUIRE(!simp.negative);
    // The surviving direction satisfies the row outright, so the row folds
    // away and one free dimension remains.
    REQUIRE(simp.table.rows() == 0);
    REQUIRE(simp.table.dims == std::vector<int>{1});
    auto res = factorized::solve_factorized(t, tol);
    REQUIRE(res.outcome == Outcome::Positive);
    REQUIRE(res.dimension == 1);
    REQUIRE(oracle_dim(t, tol) == 1);
}

TEST_CASE("simplification reports disjoint regular supports as empty") {
    ToleranceContext tol;
    FactorTable t;
    t.dims = {2};
    t.cells = {{diag2(1, 0)}, {diag2(0, 1)}};
    t.lambdas = {1.0, 1.0};
    auto simp = factorized::simplify_table(t, tol);
    REQUIRE(simp.negative);
    auto res = factorized::solve_factorized(t, tol);
    REQUIRE(res.outcome == Outcome::Negative);
    REQUIRE(res.dimension == 0);
    REQUIRE(oracle_dim(t, tol) == 0);
}

TEST_CASE("an invertible factor in a kernel row is dropped, not enforced") {
    ToleranceContext tol;
    FactorTable t;
    t.dims = {2, 2};
    // (Z (x) P) psi = 0 pins nothing on the first site: Z is invertible.
    t.cells = {{corpus::pauli('Z'), corpus::ket_proj(0, 2)}};
    t.lambdas = {0.0};
    auto res = factorized::solve_factorized(t, tol);
    REQUIRE(res.outcome == Outcome::Positive);
    REQUIRE(res.dimension == 2);
    REQUIRE(oracle_dim(t, tol) == 2);
}

TEST_CASE("simplification is idempotent and keeps the answer") {
    ToleranceContext tol;
    std::mt19937_64 rng(314);
    for (int trial = 0; trial < 8; ++trial) {
        FactorTable t = corpus::random_mixed_table(rng, trial % 4 == 3);
        auto s1 = factorized::simplify_table(t, tol);
        long expect = oracle_dim(t, tol);
        if (s1.negative) {
            REQUIRE(expect == 0);
            continue;
        }
        long after = s1.table.rows() == 0 ? [&] {
            long d = 1;
            for (int dim : s1.table.dims) d *= dim;
            return d;
        }()
                                          : oracle_dim(s1.table, tol);
        REQUIRE(after == expect);
        auto s2 = factorized::simplify_table(s1.table, tol);
        REQUIRE(!s2.negative);
        REQUIRE(s2.table.dims == s1.table.dims);
        REQUIRE(s2.table.rows() == s1.table.rows());
        for (int a = 0; a < s1.table.rows(); ++a)
            for (int j = 0; j < s1.table.cols(); ++j)
                REQUIRE(linalg::max_abs(s2.table.cells[a][j] - s1.table.cells[a][j]) < 1e-7);
    }
}

TEST_CASE("canonical split of the bell table is two qubit columns and no projectors") {
    ToleranceContext tol;
    FactorTable t = corpus::term_table(
        {corpus::SignedRow{term_of("ZZ"), 1}, corpus::SignedRow{term_of("XX"), 1}}, 2);
    auto out = factorized::canonicalize(t, tol);
    REQUIRE(!out.negative);
    REQUIRE(out.form.qubit_block.n_qubits == 2);
    REQUIRE(out.form.qubit_block.generators.size() == 2);
    REQUIRE(factorized::stabilizer_dimension(out.form.qubit_block) == 1);
    REQUIRE(out.form.projector_block.dims.empty());
    REQUIRE(out.form.projector_block.rows() == 0);
    REQUIRE(out.form.free_dimension_factor == 1);
}

TEST_CASE("logged transforms replay exactly and never lose the witness") {
    ToleranceContext tol;
    std::mt19937_64 rng(2026);
    int tested = 0;
    for (int trial = 0; trial < 40 && tested < 6; ++trial) {
        FactorTable t = corpus::random_mixed_table(rng);
        auto res = factorized::solve_factorized(t, tol);
        if (res.outcome != Outcome::Positive) continue;
        ++tested;

        auto simp = factorized::simplify_table(t, tol);
        REQUIRE(!simp.negative);
        FactorTable work = simp.table;
        long free_factor = 1;
        REQUIRE(oracle_dim(work, tol) > 0);
        for (const auto& tr : res.canonical.transform_log) {
            factorized::apply_transform(work, tr, &free_factor);
            if (work.cols() == 0) break;
            // Each logged move keeps at least one solution on the branch
            // that certified positivity.
            REQUIRE(oracle_dim(work, tol) > 0);
        }
        REQUIRE(free_factor == res.canonical.free_dimension_factor);

        if (work.cols() > 0) {
            long sdim = factorized::stabilizer_dimension(res.canonical.qubit_block);
            long pdim = res.canonical.projector_block.rows() == 0
                            ? [&] {
                                  long d = 1;
                                  for (int dim : res.canonical.projector_block.dims) d *= dim;
                                  return d;
                              }()
                            : oracle_dim(res.canonical.projector_block, tol);
            REQUIRE(oracle_dim(work, tol) == sdim * pdim);
        }
    }
    REQUIRE(tested >= 3);
}

TEST_CASE("branch-summed solve matches the dense engine on mixed tables") {
    ToleranceContext tol;
    std::mt19937_64 rng(5150);
    int positives = 0, negatives = 0;
    for (int trial = 0; trial < 25; ++trial) {
        FactorTable t = corpus::random_mixed_table(rng, trial % 3 == 2);
        auto res = factorized::solve_factorized(t, tol);
        long expect = oracle_dim(t, tol);
        INFO("trial " << trial << " expected " << expect);
        REQUIRE(res.dimension == expect);
        REQUIRE((res.outcome == Outcome::Positive) == (expect > 0));
        (expect > 0 ? positives : negatives)++;
    }
    REQUIRE(positives >= 5);
    REQUIRE(negatives >= 5);
}

TEST_CASE("branch-summed solve matches the dense engine on projector tables") {
    ToleranceContext tol;
    std::mt19937_64 rng(6021);
    for (int trial = 0; trial < 15; ++trial) {
        FactorTable t = corpus::random_projector_table(rng);
        auto res = factorized::solve_factorized(t, tol);
        long expect = oracle_dim(t, tol);
        INFO("trial " << trial << " expected " << expect);
        REQUIRE(res.dimension == expect);
        REQUIRE((res.outcome == Outcome::Positive) == (expect > 0));
    }
}

TEST_CASE("single-column tables resolve by hand") {
    ToleranceContext tol;
    SECTION("one projector row leaves its kernel") {
        FactorTable t;
        t.dims = {2};
        t.cells = {{corpus::ket_proj(0, 2)}};
        t.lambdas = {0.0};
        auto res = factorized::solve_factorized(t, tol);
        REQUIRE(res.outcome == Outcome::Positive);
        REQUIRE(res.dimension == 1);
    }
    SECTION("complementary projector rows clash") {
        FactorTable t;
        t.dims = {2};
        t.cells = {{corpus::ket_proj(0, 2)}, {corpus::ket_proj(1, 2)}};
        t.lambdas = {0.0, 0.0};
        auto res = factorized::solve_factorized(t, tol);
        REQUIRE(res.outcome == Outcome::Negative);
        REQUIRE(res.dimension == 0);
    }
    SECTION("a diagonal row counts its matching eigenvalue once") {
        FactorTable t;
        t.dims = {2};
        t.cells = {{diag2(1, 2)}};
        t.lambdas = {2.0};
        auto res = factorized::solve_factorized(t, tol);
        REQUIRE(res.outcome == Outcome::Positive);
        REQUIRE(res.dimension == 1);
    }
    SECTION("a target off the spectrum is empty") {
        FactorTable t;
        t.dims = {2};
        t.cells = {{diag2(1, 2)}};
        t.lambdas = {3.0};
        auto res = factorized::solve_factorized(t, tol);
        REQUIRE(res.outcome == Outcome::Negative);
        REQUIRE(res.dimension == 0);
    }
}

TEST_CASE("block hints steer canonicalization to one branch") {
    ToleranceContext tol;
    FactorTable t;
    t.dims = {2};
    t.cells = {{diag2(1, 2)}};
    t.lambdas = {2.0};
    auto a = factorized::canonicalize(t, tol, std::vector<int>{0});
    auto b = factorized::canonicalize(t, tol, std::vector<int>{1});
    REQUIRE(a.negative != b.negative);
    const auto& good = a.negative ? b.form : a.form;
    REQUIRE(factorized::stabilizer_dimension(good.qubit_block) * good.free_dimension_factor == 1);
    REQUIRE_THROWS_AS(factorized::canonicalize(t, tol, std::vector<int>{0, 0}), ShapeMismatch);
    REQUIRE_THROWS_AS(factorized::canonicalize(t, tol, std::vector<int>{7}), ShapeMismatch);
}

TEST_CASE("too many block choices comes back inconclusive, not wrong") {
    ToleranceContext tol;
    FactorTable t;
    t.dims.assign(13, 2);
    std::vector<ComplexMatrix> row;
    for (int j = 0; j < 13; ++j) row.push_back(diag2(1, 2));
    t.cells = {row};
    t.lambdas = {1.0};
    auto res = factorized::solve_factorized(t, tol);
    REQUIRE(res.outcome == Outcome::Inconclusive);
    REQUIRE(res.dimension == -1);
}

TEST_CASE("solving the same table twice gives identical results") {
    ToleranceContext tol;
    std::mt19937_64 rng(424);
    FactorTable t = corpus::random_mixed_table(rng);
    auto r1 = factorized::solve_factorized(t, tol);
    auto r2 = factorized::solve_factorized(t, tol);
    REQUIRE(r1.outcome == r2.outcome);
    REQUIRE(r1.dimension == r2.dimension);
    REQUIRE(r1.branch == r2.branch);
}

TEST_CASE("qubit projector blocks come with a verified annihilating string") {
    ToleranceContext tol;

    // One stabilizer row plus one singular row confined to its own qubit
    // column: the projector block is a single qubit cell.
    FactorTable t;
    t.dims = {2, 2, 2};
    ComplexMatrix z(2, 2), id = ComplexMatrix::Identity(2, 2);
    z << 1, 0, 0, -1;
    ComplexMatrix k1 = ComplexMatrix::Zero(2, 2);
    k1(1, 1) = 1.0;
    t.cells = {{z, z, id}, {id, id, k1}};
    t.lambdas = {1.0, 0.0};
    auto res = factorized::solve_factorized(t, tol);
    REQUIRE(res.outcome == Outcome::Positive);
    REQUIRE(res.dimension == 2);
    REQUIRE(res.qubit_witness.has_value());
    CHECK(projectors2::verify_projector_witness(res.canonical.projector_block,
                                                *res.qubit_witness, tol));

    // All rows singular: the whole table becomes the projector block.
    FactorTable s;
    s.dims = {2, 2};
    s.cells = {{k1, k1}};
    s.lambdas = {0.0};
    res = factorized::solve_factorized(s, tol);
    REQUIRE(res.outcome == Outcome::Positive);
    REQUIRE(res.dimension == 3);
    REQUIRE(res.qubit_witness.has_value());
    CHECK(projectors2::verify_projector_witness(res.canonical.projector_block,
                                                *res.qubit_witness, tol));

    // Across the random corpus, every positive result whose block is all
    // qubits carries a witness and it verifies against that block.
    std::mt19937_64 rng(0xbead5u);
    int exercised = 0;
    for (int trial = 0; trial < 30; ++trial) {
        FactorTable m = corpus::random_mixed_table(rng);
        auto r = factorized::solve_factorized(m, tol);
        if (r.outcome != Outcome::Positive) continue;
        const FactorTable& pb = r.canonical.projector_block;
        bool all_qubit = pb.rows() > 0;
        for (int d : pb.dims) all_qubit = all_qubit && d == 2;
        if (!all_qubit) continue;
        ++exercised;
        REQUIRE(r.qubit_witness.has_value());
        CHECK(projectors2::verify_projector_witness(pb, *r.qubit_witness, tol));
    }
    CHECK(exercised >= 3);
}
