#pragma once

/*
/   Finite dimensional *-algebra engine.
/
/   Everything downstream leans on one structure theorem: a unital algebra of
/   matrices closed under product and adjoint splits the space into blocks
/   H = (+)_a  H1_a (x) H2_a  on which the algebra acts as  L(H1_a) (x) I.
/   block_decompose computes that splitting numerically, returning one
/   isometry per block that exhibits the tensor structure.
/
/   Algebras are represented concretely as lists of matrices forming an
/   orthonormal basis in the Hilbert-Schmidt inner product. generate_algebra
/   builds such a basis from arbitrary generators by closing under products.
*/

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "ces/errors.hpp"
#include "ces/linalg.hpp"
#include "ces/tolerance.hpp"

namespace ces::algebra {

using ces::Complex;
using ces::ComplexMatrix;

// Threshold for accepting a candidate as a genuinely new direction during
// orthonormal closure. Relative to the candidate's own norm.
inline constexpr double kNewDirectionEps = 1e-8;

// ---------------------------------------------------------------------------
// Span bookkeeping

// Component of m orthogonal to the span of an HS-orthonormal family.
inline ComplexMatrix span_residual(const std::vector<ComplexMatrix>& basis,
                                   const ComplexMatrix& m) {
    ComplexMatrix r = m;
    for (const auto& b : basis) r -= linalg::hs_inner(b, m) * b;
    return r;
}

inline bool in_span(const std::vector<ComplexMatrix>& basis, const ComplexMatrix& m,
                    double rel_eps = kNewDirectionEps) {
    double n = linalg::hs_norm(m);
    if (n < 1e-14) return true;
    return linalg::hs_norm(span_residual(basis, m)) <= rel_eps * n;
}

// Appends m's new component to the basis if there is one. Returns whether
// the basis grew.
inline bool extend_span(std::vector<ComplexMatrix>& basis, const ComplexMatrix& m) {
    double n = linalg::hs_norm(m);
    if (n < 1e-12) return false;
    ComplexMatrix r = span_residual(basis, m);
    double rn = linalg::hs_norm(r);
    if (rn <= kNewDirectionEps * std::max(1.0, n)) return false;
    // Second projection pass for numerical hygiene before normalizing.
    r = span_residual(basis, r);
    rn = linalg::hs_norm(r);
    if (rn <= 0.5 * kNewDirectionEps * std::max(1.0, n)) return false;
    basis.push_back(r / rn);
    return true;
}

// ---------------------------------------------------------------------------
// Closure under products

// HS-orthonormal basis of the smallest unital algebra containing the
// generators and their adjoints. The identity is always in the span.
inline std::vector<ComplexMatrix> generate_algebra(const std::vector<ComplexMatrix>& gens,
                                                   const ToleranceContext& tol) {
    (void)tol;
    if (gens.empty()) throw ShapeMismatch("generate_algebra: no generators");
    const long d = gens[0].rows();
    for (const auto& g : gens)
        if (g.rows() != d || g.cols() != d)
            throw ShapeMismatch("generate_algebra: generator shapes disagree");

    std::vector<ComplexMatrix> basis;
    std::size_t frontier_begin = 0;
    extend_span(basis, ComplexMatrix::Identity(d, d));
    for (const auto& g : gens) {
        extend_span(basis, g);
        extend_span(basis, g.adjoint());
    }
    // Multiply new elements against everything until nothing new appears.
    while (frontier_begin < basis.size()) {
        std::size_t frontier_end = basis.size();
        for (std::size_t i = frontier_begin; i < frontier_end; ++i)
            for (std::size_t j = 0; j < frontier_end; ++j) {
                extend_span(basis, basis[i] * basis[j]);
                if (j < frontier_begin) extend_span(basis, basis[j] * basis[i]);
                if (basis.size() > static_cast<std::size_t>(d) * d)
                    throw InternalInconsistency("generate_algebra: basis exceeded full matrix space");
            }
        frontier_begin = frontier_end;
    }
    return basis;
}

// ---------------------------------------------------------------------------
// Center and commutant

// HS-orthonormal basis of { x in span(basis) : [x, b] = 0 for all b }.
// When basis is an algebra basis this is its center.
inline std::vector<ComplexMatrix> center_of(const std::vector<ComplexMatrix>& basis,
                                            const ToleranceContext& tol) {
    if (basis.empty()) return {};
    const long d = basis[0].rows();
    const long n = static_cast<long>(basis.size());
    // Rows: one vec'd commutator per (constraint, unknown coefficient).
    ComplexMatrix sys(n * d * d, n);
    for (long j = 0; j < n; ++j)
        for (long i = 0; i < n; ++i)
            sys.block(j * d * d, i, d * d, 1) = linalg::vec(linalg::commutator(basis[i], basis[j]));
    ComplexMatrix coeffs = linalg::kernel_basis(sys, tol, tol.eq_eps);
    std::vector<ComplexMatrix> out;
    for (Eigen::Index c = 0; c < coeffs.cols(); ++c) {
        ComplexMatrix z = ComplexMatrix::Zero(d, d);
        for (long i = 0; i < n; ++i) z += coeffs(i, c) * basis[i];
        out.push_back(std::move(z));
    }
    return out;
}

// HS-orthonormal basis of { x in L(C^d) : x g = g x for all generators }.
// Commuting with the generators is enough to commute with the whole algebra
// they generate.
inline std::vector<ComplexMatrix> commutant(const std::vector<ComplexMatrix>& gens,
                                            const ToleranceContext& tol) {
    if (gens.empty()) throw ShapeMismatch("commutant: no generators");
    const long d = gens[0].rows();
    ComplexMatrix sys(static_cast<long>(gens.size()) * d * d, d * d);
    ComplexMatrix id = ComplexMatrix::Identity(d, d);
    for (std::size_t a = 0; a < gens.size(); ++a) {
        // g x - x g = 0 reads (I (x) g - g^T (x) I) vec(x) = 0 column-major.
        sys.block(static_cast<long>(a) * d * d, 0, d * d, d * d) =
            linalg::tensor(id, gens[a]) - linalg::tensor(gens[a].transpose(), id);
    }
    ComplexMatrix coeffs = linalg::kernel_basis(sys, tol, tol.eq_eps);
    std::vector<ComplexMatrix> out;
    for (Eigen::Index c = 0; c < coeffs.cols(); ++c)
        out.push_back(linalg::unvec(coeffs.col(c), d, d));
    return out;
}

// ---------------------------------------------------------------------------
// Tensor factorization of a simple algebra

struct FactorStructure {
    ComplexMatrix unitary;  // d x d; columns ordered so U^dag a U = a1 (x) I_d2
    long d1 = 0;            // dimension the algebra acts fully on
    long d2 = 0;            // multiplicity dimension it ignores
};

namespace detail {

inline ComplexMatrix random_combo(const std::vector<ComplexMatrix>& basis, std::mt19937_64& rng,
                                  bool hermitize) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    ComplexMatrix m = ComplexMatrix::Zero(basis[0].rows(), basis[0].cols());
    for (const auto& b : basis) m += Complex(gauss(rng), gauss(rng)) * b;
    if (hermitize) m = 0.5 * (m + ComplexMatrix(m.adjoint()));
    return m;
}

// Splits ascending eigenvalues into the given number of clusters at the
// largest gaps. Returns cluster sizes, or empty when there are not enough
// strictly positive gaps to separate that many clusters.
inline std::vector<long> cluster_sizes(const RealVector& vals, long clusters) {
    const long n = vals.size();
    if (clusters > n) return {};
    std::vector<std::pair<double, long>> gaps;
    for (long i = 0; i + 1 < n; ++i) gaps.push_back({vals(i + 1) - vals(i), i});
    std::sort(gaps.begin(), gaps.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<long> cuts;
    for (long k = 0; k < clusters - 1; ++k) {
        if (gaps[k].first <= 0.0) return {};
        cuts.push_back(gaps[k].second);
    }
    std::sort(cuts.begin(), cuts.end());
    std::vector<long> sizes;
    long prev = -1;
    for (long c : cuts) {
        sizes.push_back(c - prev);
        prev = c;
    }
    sizes.push_back(n - 1 - prev);
    return sizes;
}

}  // namespace detail

// Exhibits the tensor form of an algebra with trivial center, acting
// irreducibly up to multiplicity: finds a unitary change of basis in which
// every element reads a1 (x) I. Input must be an HS-orthonormal basis of a
// product- and adjoint-closed unital algebra; violations surface as
// DecompositionFailed.
inline FactorStructure factor_simple(const std::vector<ComplexMatrix>& basis,
                                     std::mt19937_64& rng, const ToleranceContext& tol) {
    if (basis.empty()) throw ShapeMismatch("factor_simple: empty basis");
    const long d = basis[0].rows();
    const long dim_a = static_cast<long>(basis.size());
    const long d1 = std::lround(std::sqrt(static_cast<double>(dim_a)));
    if (d1 * d1 != dim_a)
        throw DecompositionFailed("factor_simple: algebra dimension " + std::to_string(dim_a) +
                                  " is not a square");
    if (d % d1 != 0)
        throw DecompositionFailed("factor_simple: space dimension not a multiple of the block size");
    const long d2 = d / d1;

    std::vector<ComplexMatrix> comm = commutant(basis, tol);
    if (static_cast<long>(comm.size()) != d2 * d2)
        throw DecompositionFailed("factor_simple: commutant dimension " +
                                  std::to_string(comm.size()) + ", expected " +
                                  std::to_string(d2 * d2));

    std::string last_problem = "no attempt";
    for (int attempt = 0; attempt < 8; ++attempt) {
        // A generic element of the commutant looks like I (x) y; its
        // eigenspaces are the minimal invariant subspaces, d2 of them of
        // dimension d1 each.
        ComplexMatrix y = detail::random_combo(comm, rng, true);
        auto eig = linalg::hermitian_eigendecomposition(y, tol);
        auto sizes = detail::cluster_sizes(eig.eigenvalues, d2);
        if (sizes.empty() || !std::all_of(sizes.begin(), sizes.end(),
                                          [&](long s) { return s == d1; })) {
            last_problem = "eigenvalue clusters of a generic commutant element had wrong sizes";
            continue;
        }
        std::vector<ComplexMatrix> w(d2);
        for (long i = 0, off = 0; i < d2; ++i, off += d1)
            w[i] = eig.vectors.middleCols(off, d1);

        // Intertwiners from the first minimal subspace to each other one,
        // realized by a generic commutant element and normalized to unitary
        // via Schur's lemma.
        ComplexMatrix r = detail::random_combo(comm, rng, false);
        std::vector<ComplexMatrix> t(d2);
        t[0] = ComplexMatrix::Identity(d1, d1);
        bool ok = true;
        for (long i = 1; i < d2 && ok; ++i) {
            ComplexMatrix ti = w[i].adjoint() * r * w[0];
            ComplexMatrix gram = ti.adjoint() * ti;
            double c = gram.trace().real() / static_cast<double>(d1);
            if (c < 1e-10 ||
                linalg::max_abs(gram - c * ComplexMatrix::Identity(d1, d1)) > 1e-6 * c) {
                last_problem = "intertwiner normalization failed Schur scaling";
                ok = false;
                break;
            }
            t[i] = ti / std::sqrt(c);
        }
        if (!ok) continue;

        FactorStructure out;
        out.d1 = d1;
        out.d2 = d2;
        out.unitary = ComplexMatrix(d, d);
        for (long p = 0; p < d1; ++p)
            for (long i = 0; i < d2; ++i) out.unitary.col(p * d2 + i) = w[i] * t[i].col(p);

        if (linalg::max_abs(ComplexMatrix(out.unitary.adjoint() * out.unitary) -
                            ComplexMatrix::Identity(d, d)) > 1e-8) {
            last_problem = "assembled change of basis was not unitary";
            continue;
        }
        // Structure audit: every basis element must become a1 (x) I.
        ok = true;
        for (const auto& b : basis) {
            ComplexMatrix a1 = w[0].adjoint() * b * w[0];
            ComplexMatrix residual =
                ComplexMatrix(out.unitary.adjoint() * b * out.unitary) -
                linalg::tensor(a1, ComplexMatrix::Identity(d2, d2));
            if (linalg::max_abs(residual) > 1e-7 * std::max(1.0, linalg::max_abs(b))) {
                last_problem = "algebra element failed the a1 (x) I structure audit";
                ok = false;
                break;
            }
        }
        if (ok) return out;
    }
    throw DecompositionFailed("factor_simple: " + last_problem);
}

// ---------------------------------------------------------------------------
// Full block decomposition

struct AlgebraBlock {
    ComplexMatrix isometry;  // d x (d1*d2), orthonormal columns
    long d1 = 0;
    long d2 = 0;
};

struct BlockStructure {
    std::vector<AlgebraBlock> blocks;
    long algebra_dim = 0;  // sum of d1^2 over blocks
};

// Decomposes the algebra generated by gens into blocks L(H1_a) (x) I. Each
// returned isometry maps C^{d1*d2} onto its block, with the algebra acting
// as a1 (x) I in that frame. Blocks are sorted by d1 then d2, descending.
inline BlockStructure block_decompose(const std::vector<ComplexMatrix>& gens,
                                      const ToleranceContext& tol) {
    std::vector<ComplexMatrix> basis = generate_algebra(gens, tol);
    std::vector<ComplexMatrix> zc = center_of(basis, tol);
    const long d = basis[0].rows();
    const long m = static_cast<long>(zc.size());
    if (m < 1) throw InternalInconsistency("block_decompose: unital algebra with empty center");

    auto rng = linalg::make_rng(tol.seed ^ 0x9e3779b97f4a7c15ull);
    std::string last_problem = "no attempt";
    for (int attempt = 0; attempt < 8; ++attempt) {
        // A generic Hermitian central element is constant on each block, so
        // its eigenvalue clusters are exactly the central projectors.
        std::vector<ComplexMatrix> parts;  // block isometries
        if (m == 1) {
            parts.push_back(ComplexMatrix::Identity(d, d));
        } else {
            ComplexMatrix c = detail::random_combo(zc, rng, true);
            auto eig = linalg::hermitian_eigendecomposition(c, tol);
            auto sizes = detail::cluster_sizes(eig.eigenvalues, m);
            if (sizes.empty()) {
                last_problem = "central element eigenvalues did not separate into blocks";
                continue;
            }
            bool ok = true;
            long off = 0;
            for (long s : sizes) {
                ComplexMatrix v = eig.vectors.middleCols(off, s);
                ComplexMatrix p = v * v.adjoint();
                if (!in_span(zc, p, 1e-7)) {
                    last_problem = "candidate block projector left the center";
                    ok = false;
                    break;
                }
                parts.push_back(std::move(v));
                off += s;
            }
            if (!ok) continue;
        }

        BlockStructure out;
        bool ok = true;
        for (const auto& v : parts) {
            // Restrict the algebra to the block and factor it there.
            std::vector<ComplexMatrix> restricted;
            for (const auto& b : basis) extend_span(restricted, v.adjoint() * b * v);
            if (center_of(restricted, tol).size() != 1) {
                last_problem = "restricted block algebra still had a nontrivial center";
                ok = false;
                break;
            }
            FactorStructure f;
            try {
                f = factor_simple(restricted, rng, tol);
            } catch (const DecompositionFailed& e) {
                last_problem = e.what();
                ok = false;
                break;
            }
            AlgebraBlock blk;
            blk.isometry = v * f.unitary;
            blk.d1 = f.d1;
            blk.d2 = f.d2;
            out.blocks.push_back(std::move(blk));
            out.algebra_dim += f.d1 * f.d1;
        }
        if (!ok) continue;

        std::stable_sort(out.blocks.begin(), out.blocks.end(),
                         [](const AlgebraBlock& a, const AlgebraBlock& b) {
                             if (a.d1 != b.d1) return a.d1 > b.d1;
                             return a.d2 > b.d2;
                         });

        // Final audit against the original generators: invariance of each
        // block plus the a1 (x) I shape inside it.
        long total = 0;
        for (const auto& blk : out.blocks) total += blk.d1 * blk.d2;
        if (total != d) {
            last_problem = "block dimensions did not add up to the full space";
            continue;
        }
        for (const auto& blk : out.blocks) {
            for (const auto& g : gens) {
                ComplexMatrix moved = g * blk.isometry;
                ComplexMatrix inside = blk.isometry.adjoint() * moved;
                double scale = std::max(1.0, linalg::max_abs(g));
                if (linalg::max_abs(moved - blk.isometry * inside) > 1e-7 * scale) {
                    last_problem = "a generator moved vectors out of a block";
                    ok = false;
                    break;
                }
                ComplexMatrix a1 = ComplexMatrix::Zero(blk.d1, blk.d1);
                for (long p = 0; p < blk.d1; ++p)
                    for (long q = 0; q < blk.d1; ++q) a1(p, q) = inside(p * blk.d2, q * blk.d2);
                if (linalg::max_abs(inside -
                                    linalg::tensor(a1, ComplexMatrix::Identity(blk.d2, blk.d2))) >
                    1e-7 * scale) {
                    last_problem = "a generator failed the within-block structure audit";
                    ok = false;
                    break;
                }
            }
            if (!ok) break;
        }
        if (ok) return out;
    }
    throw DecompositionFailed("block_decompose: " + last_problem);
}

}  // namespace ces::algebra
