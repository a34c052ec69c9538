#pragma once

/*
/   Brute-force reference decisions. Nothing here is clever: the point is an
/   independent answer the structured solvers can be compared against.
/
/   common_eigenspace materializes an orthonormal basis of
/       { psi : H_a psi = lambda_a psi for all a }
/   by intersecting kernels one check at a time. Instances whose checks are
/   all exactly diagonal with small integer entries take an exact integer
/   path instead (no tolerances at all); every reduction shipped with the
/   library falls into that class.
*/

#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <vector>

#include "ces/errors.hpp"
#include "ces/instance.hpp"
#include "ces/linalg.hpp"

namespace ces::oracle {

using ces::ComplexMatrix;
using instance::CesInstance;
using instance::CheckKind;
using instance::CheckOperator;
using instance::FactorTable;

struct EigenspaceResult {
    long dimension = 0;
    ComplexMatrix basis;   // total_dim x dimension, orthonormal columns
};

// ---------------------------------------------------------------------------
// Exact integer path

namespace detail {

// Entries this large could overflow the exactly-representable integer range
// once multiplied across particles; such instances fall back to the dense path.
inline constexpr double kMaxExactEntry = 1024.0;

inline bool exactly_integer(double v) {
    return std::rint(v) == v && std::abs(v) <= kMaxExactEntry;
}

inline bool exactly_integer_diagonal(const ComplexMatrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (m(i, j).imag() != 0.0) return false;
            if (i != j && m(i, j).real() != 0.0) return false;
            if (i == j && !exactly_integer(m(i, j).real())) return false;
        }
    return true;
}

inline bool exact_path_applies(const CesInstance& x) {
    for (double l : x.lambdas)
        if (!exactly_integer(l)) return false;
    for (const auto& c : x.checks) {
        if (c.kind == CheckKind::Local) {
            if (!exactly_integer_diagonal(c.local)) return false;
        } else {
            for (const auto& f : c.factors)
                if (!exactly_integer_diagonal(f)) return false;
        }
    }
    return true;
}

// Eigenvalue of a diagonal check on a given product basis state, or nullopt
// when the integer product leaves the exactly-representable range.
inline std::optional<double> diagonal_eigenvalue(const CheckOperator& c,
                                                 const std::vector<int>& digits,
                                                 const std::vector<int>& dims) {
    if (c.kind == CheckKind::Factor) {
        double prod = 1.0;
        for (std::size_t j = 0; j < c.factors.size(); ++j) {
            prod *= c.factors[j](digits[j], digits[j]).real();
            if (std::abs(prod) > 9.0e15) return std::nullopt;  // 2^53-ish guard
        }
        return prod;
    }
    std::vector<int> supp_dims, supp_digits;
    for (int s : c.support) {
        supp_dims.push_back(dims[s]);
        supp_digits.push_back(digits[s]);
    }
    long i = linalg::index_of(supp_digits, supp_dims);
    return c.local(i, i).real();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Common eigenspace

inline EigenspaceResult common_eigenspace(const CesInstance& x, const ToleranceContext& tol) {
    const long d = x.total_dim();
    if (d > instance::kMaxTotalDim)
        throw TooLarge("common_eigenspace: total dimension " + std::to_string(d));
    if (x.lambdas.size() != x.checks.size())
        throw ShapeMismatch("common_eigenspace: lambda count mismatch");

    // Exact integer path: a product basis state is a common eigenvector iff
    // every diagonal check evaluates to its target on it.
    if (detail::exact_path_applies(x)) {
        std::vector<long> hits;
        bool exact_ok = true;
        for (long i = 0; i < d && exact_ok; ++i) {
            auto digits = linalg::digits_of(i, x.dims);
            bool all = true;
            for (std::size_t a = 0; a < x.checks.size(); ++a) {
                auto v = detail::diagonal_eigenvalue(x.checks[a], digits, x.dims);
                if (!v) {
                    exact_ok = false;
                    break;
                }
                if (*v != x.lambdas[a]) {
                    all = false;
                    break;
                }
            }
            if (exact_ok && all) hits.push_back(i);
        }
        if (exact_ok) {
            EigenspaceResult out;
            out.dimension = static_cast<long>(hits.size());
            out.basis = ComplexMatrix::Zero(d, out.dimension);
            for (std::size_t k = 0; k < hits.size(); ++k) out.basis(hits[k], k) = 1.0;
            return out;
        }
    }

    // Dense path. Seed with the constraint whose eigenspace is smallest so
    // the working basis never gets wider than necessary.
    std::vector<std::size_t> order(x.checks.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<long> est(x.checks.size());
    for (std::size_t a = 0; a < x.checks.size(); ++a) {
        const auto& c = x.checks[a];
        if (c.kind == CheckKind::Local) {
            long m = c.local.rows();
            est[a] = instance::eigenspace_of(c.local, x.lambdas[a], tol).cols() * (d / m);
        } else {
            // Count per-particle eigenvalue combinations whose product hits
            // the target.
            long count = 0;
            std::vector<linalg::Eigensystem> eigs;
            for (const auto& f : c.factors) eigs.push_back(linalg::hermitian_eigendecomposition(f, tol));
            double window = instance::kSpectrumWindow * std::max(instance::check_norm(c, tol), 1.0);
            std::function<void(std::size_t, double)> rec = [&](std::size_t j, double prod) {
                if (j == eigs.size()) {
                    if (std::abs(prod - x.lambdas[a]) <= window) ++count;
                    return;
                }
                for (int i = 0; i < eigs[j].eigenvalues.size(); ++i) rec(j + 1, prod * eigs[j].eigenvalues(i));
            };
            rec(0, 1.0);
            est[a] = count;
        }
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return est[a] < est[b]; });

    ComplexMatrix basis;
    bool seeded = false;
    for (std::size_t idx : order) {
        const auto& c = x.checks[idx];
        double lambda = x.lambdas[idx];
        double scale = std::max({1.0, instance::check_norm(c, tol), std::abs(lambda)});
        if (!seeded) {
            // Build the first eigenspace directly from local structure.
            if (c.kind == CheckKind::Local) {
                ComplexMatrix k_local = instance::eigenspace_of(c.local, lambda, tol);
                auto split = linalg::detail::support_split(c.support, x.dims);
                const long cdim = static_cast<long>(split.comp_offsets.size());
                basis = ComplexMatrix::Zero(d, k_local.cols() * cdim);
                long col = 0;
                for (long cc = 0; cc < cdim; ++cc)
                    for (Eigen::Index v = 0; v < k_local.cols(); ++v, ++col)
                        for (Eigen::Index a = 0; a < k_local.rows(); ++a)
                            basis(split.supp_offsets[a] + split.comp_offsets[cc], col) = k_local(a, v);
            } else {
                std::vector<linalg::Eigensystem> eigs;
                for (const auto& f : c.factors)
                    eigs.push_back(linalg::hermitian_eigendecomposition(f, tol));
                double window = instance::kSpectrumWindow * std::max(instance::check_norm(c, tol), 1.0);
                std::vector<ComplexVector> cols;
                std::vector<int> pick(c.factors.size(), 0);
                std::function<void(std::size_t, double)> rec = [&](std::size_t j, double prod) {
                    if (j == eigs.size()) {
                        if (std::abs(prod - lambda) <= window) {
                            ComplexVector v = ComplexVector::Ones(1);
                            for (std::size_t p = 0; p < eigs.size(); ++p)
                                v = linalg::tensor(v, ComplexVector(eigs[p].vectors.col(pick[p])));
                            cols.push_back(std::move(v));
                        }
                        return;
                    }
                    for (int i = 0; i < eigs[j].eigenvalues.size(); ++i) {
                        pick[j] = i;
                        rec(j + 1, prod * eigs[j].eigenvalues(i));
                    }
                };
                rec(0, 1.0);
                basis = ComplexMatrix(d, static_cast<long>(cols.size()));
                for (std::size_t k = 0; k < cols.size(); ++k) basis.col(k) = cols[k];
            }
            seeded = true;
        } else {
            ComplexMatrix applied = instance::apply_check(c, x.dims, basis) - lambda * basis;
            basis = linalg::restrict_to_kernel(basis, applied, tol, tol.eq_eps * scale);
        }
        if (basis.cols() == 0) break;
    }
    if (!seeded) {
        // No checks at all: the whole space qualifies.
        basis = ComplexMatrix::Identity(d, d);
    }

    // Residual audit: every surviving basis vector must satisfy every
    // equation. A failure here means tolerances were mis-set, not "negative".
    for (std::size_t a = 0; a < x.checks.size() && basis.cols() > 0; ++a) {
        double scale = std::max({1.0, instance::check_norm(x.checks[a], tol), std::abs(x.lambdas[a])});
        ComplexMatrix res = instance::apply_check(x.checks[a], x.dims, basis) - x.lambdas[a] * basis;
        if (linalg::max_abs(res) > 1e-6 * scale)
            throw InternalInconsistency("common_eigenspace: residual audit failed on check " +
                                        std::to_string(a));
    }

    EigenspaceResult out;
    out.dimension = basis.cols();
    out.basis = std::move(basis);
    return out;
}

// Convenience: distance from a unit vector to the span of an orthonormal basis.
inline double distance_to_span(const ComplexMatrix& basis, const ComplexVector& v) {
    if (basis.cols() == 0) return v.norm();
    ComplexVector proj = basis * (basis.adjoint() * v);
    return (v - proj).norm();
}

// ---------------------------------------------------------------------------
// Subset rank profiles and the alternating-sum dimension formula

inline constexpr int kMaxSubsetRows = 20;

namespace detail {

inline void require_commuting_projectors(const std::vector<ComplexMatrix>& ps,
                                         const ToleranceContext& tol) {
    for (std::size_t a = 0; a < ps.size(); ++a) {
        const auto& p = ps[a];
        if (p.rows() != p.cols()) throw NotProjector("matrix " + std::to_string(a) + " not square");
        if (linalg::max_abs(p * p - p) > tol.eq_eps * std::max(1.0, linalg::max_abs(p)) * p.rows())
            throw NotProjector("matrix " + std::to_string(a) + " is not idempotent");
        if (linalg::max_abs(p - p.adjoint()) > tol.herm_eps)
            throw NotProjector("matrix " + std::to_string(a) + " is not Hermitian");
    }
    for (std::size_t a = 0; a < ps.size(); ++a)
        for (std::size_t b = a + 1; b < ps.size(); ++b)
            if (linalg::max_abs(linalg::commutator(ps[a], ps[b])) >
                tol.eq_eps * std::max(1.0, static_cast<double>(ps[a].rows())))
                throw NotCommuting("projectors " + std::to_string(a) + " and " + std::to_string(b));
}

// Depth-first walk over all subsets, carrying an orthonormal image basis of
// the product of the chosen projectors. Commuting projectors make that
// product the projector onto the intersection of their images, so each step
// is one projection plus re-orthonormalization.
template <class Visit>
inline void walk_images(const std::vector<ComplexMatrix>& ps, std::size_t next, std::uint32_t mask,
                        const ComplexMatrix& basis, const ToleranceContext& tol, Visit&& visit) {
    visit(mask, static_cast<long>(basis.cols()));
    for (std::size_t i = next; i < ps.size(); ++i) {
        std::uint32_t child_mask = mask | (1u << i);
        if (basis.cols() == 0) {
            walk_images(ps, i + 1, child_mask, basis, tol, visit);
        } else {
            ComplexMatrix child = linalg::image_basis(ps[i] * basis, tol, tol.eq_eps);
            walk_images(ps, i + 1, child_mask, child, tol, visit);
        }
    }
}

}  // namespace detail

// Ranks of all products over subsets of a commuting projector family,
// keyed by bitmask (bit a set = projector a participates).
inline std::map<std::uint32_t, long> subset_rank_profile(const std::vector<ComplexMatrix>& ps,
                                                         const ToleranceContext& tol) {
    if (ps.size() > kMaxSubsetRows)
        throw TooManyRows("subset_rank_profile: more than " + std::to_string(kMaxSubsetRows) +
                          " projectors");
    detail::require_commuting_projectors(ps, tol);
    const long d = ps.empty() ? 0 : ps[0].rows();
    std::map<std::uint32_t, long> profile;
    ComplexMatrix full = ComplexMatrix::Identity(d, d);
    detail::walk_images(ps, 0, 0u, full, tol,
                        [&](std::uint32_t mask, long r) { profile[mask] = r; });
    return profile;
}

// dim of the common kernel of a commuting projector family, via the
// alternating sum of subset product ranks.
inline long inclusion_exclusion_dim(const std::vector<ComplexMatrix>& ps,
                                    const ToleranceContext& tol) {
    if (ps.size() > kMaxSubsetRows)
        throw TooManyRows("inclusion_exclusion_dim: more than " + std::to_string(kMaxSubsetRows) +
                          " projectors");
    detail::require_commuting_projectors(ps, tol);
    const long d = ps.empty() ? 0 : ps[0].rows();
    long sum = 0;
    ComplexMatrix full = ComplexMatrix::Identity(d, d);
    detail::walk_images(ps, 0, 0u, full, tol, [&](std::uint32_t mask, long r) {
        int bits = std::popcount(mask);
        sum += (bits % 2 == 0 ? r : -r);
    });
    return sum;
}

// ---------------------------------------------------------------------------
// Factor-table variants: ranks multiply across particles, so the subset walk
// runs on per-particle products of small matrices and stays exact.

namespace detail {

inline void require_projector_table(const FactorTable& t, const ToleranceContext& tol) {
    for (int a = 0; a < t.rows(); ++a) {
        for (int j = 0; j < t.cols(); ++j) {
            const auto& c = t.cells[a][j];
            if (c.rows() != t.dims[j] || c.cols() != t.dims[j])
                throw ShapeMismatch("cell (" + std::to_string(a) + "," + std::to_string(j) +
                                    ") has the wrong shape");
            if (linalg::max_abs(c * c - c) > tol.eq_eps * std::max(1.0, linalg::max_abs(c)) * c.rows())
                throw NotProjector("cell (" + std::to_string(a) + "," + std::to_string(j) +
                                   ") is not a projector");
        }
        for (int b = a + 1; b < t.rows(); ++b)
            if (instance::classify_commutation(t.cells[a], t.cells[b], tol) ==
                instance::CommutationKind::NonCommuting)
                throw NotCommuting("rows " + std::to_string(a) + " and " + std::to_string(b));
    }
}

template <class Visit>
inline void walk_cell_products(const FactorTable& t, int next, std::uint32_t mask,
                               const std::vector<ComplexMatrix>& prods, long rank_prod,
                               const ToleranceContext& tol, Visit&& visit) {
    visit(mask, rank_prod);
    for (int a = next; a < t.rows(); ++a) {
        std::uint32_t child_mask = mask | (1u << a);
        if (rank_prod == 0) {
            walk_cell_products(t, a + 1, child_mask, prods, 0, tol, visit);
            continue;
        }
        std::vector<ComplexMatrix> child = prods;
        long r = 1;
        for (int j = 0; j < t.cols() && r > 0; ++j) {
            child[j] = child[j] * t.cells[a][j];
            r *= linalg::rank(child[j], tol, tol.eq_eps);
        }
        walk_cell_products(t, a + 1, child_mask, child, r, tol, visit);
    }
}

}  // namespace detail

inline std::map<std::uint32_t, long> subset_rank_profile(const FactorTable& t,
                                                         const ToleranceContext& tol) {
    if (t.rows() > kMaxSubsetRows)
        throw TooManyRows("subset_rank_profile: more than " + std::to_string(kMaxSubsetRows) +
                          " rows");
    detail::require_projector_table(t, tol);
    std::vector<ComplexMatrix> prods;
    for (int d : t.dims) prods.push_back(ComplexMatrix::Identity(d, d));
    std::map<std::uint32_t, long> profile;
    detail::walk_cell_products(t, 0, 0u, prods, linalg::total_dim(t.dims), tol,
                               [&](std::uint32_t mask, long r) { profile[mask] = r; });
    return profile;
}

inline long inclusion_exclusion_dim(const FactorTable& t, const ToleranceContext& tol) {
    if (t.rows() > kMaxSubsetRows)
        throw TooManyRows("inclusion_exclusion_dim: more than " + std::to_string(kMaxSubsetRows) +
                          " rows");
    detail::require_projector_table(t, tol);
    std::vector<ComplexMatrix> prods;
    for (int d : t.dims) prods.push_back(ComplexMatrix::Identity(d, d));
    long sum = 0;
    detail::walk_cell_products(t, 0, 0u, prods, linalg::total_dim(t.dims), tol,
                               [&](std::uint32_t mask, long r) {
                                   int bits = std::popcount(mask);
                                   sum += (bits % 2 == 0 ? r : -r);
                               });
    return sum;
}

}  // namespace ces::oracle
