// Structural two-particle solver versus the brute-force reference, plus
// hand-built cases whose dimension is known on paper.

#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "ces/instance.hpp"
#include "ces/linalg.hpp"
#include "ces/oracle.hpp"
#include "ces/twolocal.hpp"
#include "corpus.hpp"

using namespace ces;
using corpus::ket_proj;
using corpus::pauli;
using instance::CesInstance;
using instance::CheckOperator;

namespace {

double state_residual(const CesInstance& x, const ComplexVector& psi,
                      const ToleranceContext& tol) {
    double worst = 0.0;
    for (std::size_t a = 0; a < x.checks.size(); ++a) {
        ComplexVector r = instance::apply_check(x.checks[a], x.dims, psi) - x.lambdas[a] * psi;
        worst = std::max(worst, r.norm());
    }
    (void)tol;
    return worst;
}

}  // namespace

TEST_CASE("bell pair solves positive with the right state") {
    ToleranceContext tol;
    CesInstance x;
    x.dims = {2, 2};
    x.checks.push_back(CheckOperator::factor_row({pauli('Z'), pauli('Z')}));
    x.checks.push_back(CheckOperator::factor_row({pauli('X'), pauli('X')}));
    x.lambdas = {1.0, 1.0};
    auto sol = twolocal::solve(x, tol);
    REQUIRE(sol.positive);
    REQUIRE(sol.dimension == 1);
    ComplexVector bell(4);
    bell << 1, 0, 0, 1;
    bell /= std::sqrt(2.0);
    REQUIRE(std::abs(std::abs(bell.dot(sol.model_state)) - 1.0) < 1e-8);
}

TEST_CASE("diagonal chain with a unique basis state solution") {
    ToleranceContext tol;
    // First check: Z (x) diag(1,1,2) = 1 on particles 0,1.
    // Second: diag(1,2,2) (x) Z = 2 on particles 1,2. Unique solution |0,1,0>.
    ComplexMatrix d1 = ComplexMatrix::Zero(3, 3), d2 = ComplexMatrix::Zero(3, 3);
    d1.diagonal() << 1, 1, 2;
    d2.diagonal() << 1, 2, 2;
    CesInstance x;
    x.dims = {2, 3, 2};
    x.checks.push_back(CheckOperator::local_term({0, 1}, linalg::tensor(pauli('Z'), d1)));
    x.checks.push_back(CheckOperator::local_term({1, 2}, linalg::tensor(d2, pauli('Z'))));
    x.lambdas = {1.0, 2.0};
    auto sol = twolocal::solve(x, tol);
    REQUIRE(sol.positive);
    REQUIRE(sol.dimension == 1);
    ComplexVector want = ComplexVector::Zero(12);
    want(linalg::index_of({0, 1, 0}, x.dims)) = 1.0;
    REQUIRE(std::abs(std::abs(want.dot(sol.model_state)) - 1.0) < 1e-8);
}

TEST_CASE("incompatible diagonal targets are reported unsatisfiable") {
    ToleranceContext tol;
    ComplexMatrix d1 = ComplexMatrix::Zero(3, 3), d2 = ComplexMatrix::Zero(3, 3);
    d1.diagonal() << 1, 1, 2;
    d2.diagonal() << 1, 2, 2;
    CesInstance x;
    x.dims = {2, 3, 2};
    // First forces particle 1 into level 2, second into level 0.
    x.checks.push_back(CheckOperator::local_term({0, 1}, linalg::tensor(pauli('Z'), d1)));
    x.checks.push_back(CheckOperator::local_term({1, 2}, linalg::tensor(d2, pauli('Z'))));
    x.lambdas = {2.0, 1.0};
    auto sol = twolocal::solve(x, tol);
    REQUIRE_FALSE(sol.positive);
    REQUIRE(sol.dimension == 0);
    REQUIRE_FALSE(sol.negative_reason.empty());
}

TEST_CASE("target outside the local spectrum is negative immediately") {
    ToleranceContext tol;
    CesInstance x;
    x.dims = {2, 2};
    x.checks.push_back(CheckOperator::factor_row({pauli('Z'), pauli('Z')}));
    x.lambdas = {3.0};
    auto sol = twolocal::solve(x, tol);
    REQUIRE_FALSE(sol.positive);
}

TEST_CASE("orthogonal projector constraints on one edge cancel out") {
    ToleranceContext tol;
    ComplexMatrix p = linalg::tensor(ket_proj(0, 2), ket_proj(0, 2));
    CesInstance x;
    x.dims = {2, 2};
    x.checks.push_back(CheckOperator::local_term({0, 1}, p));
    x.checks.push_back(CheckOperator::local_term({0, 1}, ComplexMatrix(
        ComplexMatrix::Identity(4, 4) - p)));
    x.lambdas = {1.0, 1.0};  // inside both images: impossible
    auto sol = twolocal::solve(x, tol);
    REQUIRE_FALSE(sol.positive);
}

TEST_CASE("spectator particles multiply into the dimension") {
    ToleranceContext tol;
    CesInstance x;
    x.dims = {2, 2, 3};
    x.checks.push_back(CheckOperator::local_term(
        {0, 1}, linalg::tensor(ket_proj(0, 2), ket_proj(1, 2))));
    x.lambdas = {1.0};
    auto sol = twolocal::solve(x, tol);
    REQUIRE(sol.positive);
    REQUIRE(sol.dimension == 3);
    auto ref = oracle::common_eigenspace(x, tol);
    REQUIRE(ref.dimension == 3);
}

TEST_CASE("hidden wire structure inside a composite particle is recovered") {
    ToleranceContext tol;
    auto rng = linalg::make_rng(101);
    for (int trial = 0; trial < 6; ++trial) {
        // Particle 1 is secretly C2 (x) C2; edge (0,1) couples to its first
        // wire, edge (1,2) to its second. A random rotation on particle 1
        // hides the split.
        ComplexMatrix a = linalg::random_hermitian(4, rng);
        ComplexMatrix b = linalg::random_hermitian(4, rng);
        auto ea = linalg::hermitian_eigendecomposition(a, tol);
        auto eb = linalg::hermitian_eigendecomposition(b, tol);
        CesInstance x;
        x.dims = {2, 4, 2};
        ComplexMatrix u = linalg::random_unitary(4, rng);
        ComplexMatrix h01 = linalg::tensor(a, ComplexMatrix::Identity(2, 2));
        // Axes of h01 are (particle0, wire1, wire2); flattening matches
        // particle order, then conjugate the particle-1 part.
        ComplexMatrix c01 = linalg::tensor(ComplexMatrix::Identity(2, 2), u);
        h01 = c01 * h01 * ComplexMatrix(c01.adjoint());
        ComplexMatrix h12 = linalg::tensor(ComplexMatrix::Identity(2, 2), b);
        // Axes are (wire1, wire2, particle2); same flattening trick.
        ComplexMatrix c12 = linalg::tensor(u, ComplexMatrix::Identity(2, 2));
        h12 = c12 * h12 * ComplexMatrix(c12.adjoint());
        x.checks.push_back(CheckOperator::local_term({0, 1}, h01));
        x.checks.push_back(CheckOperator::local_term({1, 2}, h12));
        x.lambdas = {ea.eigenvalues(trial % 4), eb.eigenvalues((trial + 1) % 4)};

        auto report = instance::validate(x, tol);
        REQUIRE(report.valid);
        auto sol = twolocal::solve(x, tol);
        auto ref = oracle::common_eigenspace(x, tol);
        REQUIRE(sol.dimension == ref.dimension);
        REQUIRE(sol.positive == (ref.dimension > 0));
        if (sol.positive) {
            REQUIRE(state_residual(x, sol.model_state, tol) < 1e-7);
            REQUIRE(oracle::distance_to_span(ref.basis, sol.model_state) < 1e-7);
        }
    }
}

TEST_CASE("three-particle checks are rejected") {
    ToleranceContext tol;
    CesInstance x;
    x.dims = {2, 2, 2};
    ComplexMatrix zzz = linalg::tensor(linalg::tensor(pauli('Z'), pauli('Z')), pauli('Z'));
    x.checks.push_back(CheckOperator::local_term({0, 1, 2}, zzz));
    x.lambdas = {1.0};
    REQUIRE_THROWS_AS(twolocal::solve(x, tol), NotTwoLocal);
}

TEST_CASE("vacuous checks leave the full space") {
    ToleranceContext tol;
    CesInstance x;
    x.dims = {2, 3};
    x.checks.push_back(CheckOperator::factor_row(
        {ComplexMatrix::Identity(2, 2), ComplexMatrix::Identity(3, 3)}));
    x.lambdas = {1.0};
    auto sol = twolocal::solve(x, tol);
    REQUIRE(sol.positive);
    REQUIRE(sol.dimension == 6);
}

TEST_CASE("random diagonal-in-disguise corpus matches the reference engine") {
    ToleranceContext tol;
    auto rng = linalg::make_rng(211);
    int positives = 0, negatives = 0;
    for (int trial = 0; trial < 20; ++trial) {
        CesInstance x = corpus::random_diagonal_twolocal(rng);
        auto sol = twolocal::solve(x, tol);
        auto ref = oracle::common_eigenspace(x, tol);
        INFO("trial " << trial);
        REQUIRE(sol.dimension == ref.dimension);
        if (sol.positive) {
            ++positives;
            REQUIRE(state_residual(x, sol.model_state, tol) < 1e-7);
            REQUIRE(oracle::distance_to_span(ref.basis, sol.model_state) < 1e-7);
        } else {
            ++negatives;
        }
    }
    REQUIRE(positives > 0);
    REQUIRE(negatives > 0);
}

TEST_CASE("random wire chains match the reference engine") {
    ToleranceContext tol;
    auto rng = linalg::make_rng(223);
    int positives = 0;
    for (int trial = 0; trial < 12; ++trial) {
        CesInstance x = corpus::random_wire_chain(rng);
        auto sol = twolocal::solve(x, tol);
        auto ref = oracle::common_eigenspace(x, tol);
        INFO("trial " << trial);
        REQUIRE(sol.dimension == ref.dimension);
        if (sol.positive) {
            ++positives;
            REQUIRE(state_residual(x, sol.model_state, tol) < 1e-7);
        }
    }
    REQUIRE(positives > 0);
}

TEST_CASE("solver output is deterministic for a fixed seed") {
    ToleranceContext tol;
    tol.seed = 99;
    auto rng = linalg::make_rng(227);
    CesInstance x = corpus::random_wire_chain(rng);
    auto s1 = twolocal::solve(x, tol);
    auto s2 = twolocal::solve(x, tol);
    REQUIRE(s1.dimension == s2.dimension);
    REQUIRE(s1.sector == s2.sector);
    if (s1.positive)
        REQUIRE(linalg::max_abs(ComplexMatrix(s1.model_state) -
                                ComplexMatrix(s2.model_state)) == 0.0);
}
