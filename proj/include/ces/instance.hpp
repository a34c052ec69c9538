#pragma once

/*
/   Problem instances: a list of particle dimensions, a list of commuting
/   Hermitian checks, and one target eigenvalue per check. A check is either
/   a local term (dense matrix on a few particles) or a factor row (one
/   matrix per particle, the operator being the tensor product of the row).
/
/   The instance layer owns input validation: Hermiticity, pairwise
/   commutation, and membership of each target eigenvalue in the spectrum of
/   its check. Solvers assume a validated instance.
*/

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ces/errors.hpp"
#include "ces/linalg.hpp"
#include "ces/tolerance.hpp"

namespace ces::instance {

using ces::ComplexMatrix;

// Largest total Hilbert space dimension the dense machinery accepts.
inline constexpr long kMaxTotalDim = 1L << 14;

// Target eigenvalues are matched against spectra with a window proportional
// to the operator norm; this factor fixes the window.
inline constexpr double kSpectrumWindow = 1e-7;

enum class CheckKind { Local, Factor };

struct CheckOperator {
    CheckKind kind = CheckKind::Local;
    std::vector<int> support;              // Local only; particle indices, 0-based
    ComplexMatrix local;                   // Local only; dim = product of support dims
    std::vector<ComplexMatrix> factors;    // Factor only; one per particle

    static CheckOperator local_term(std::vector<int> support, ComplexMatrix matrix) {
        CheckOperator c;
        c.kind = CheckKind::Local;
        c.support = std::move(support);
        c.local = std::move(matrix);
        return c;
    }

    static CheckOperator factor_row(std::vector<ComplexMatrix> factors) {
        CheckOperator c;
        c.kind = CheckKind::Factor;
        c.factors = std::move(factors);
        return c;
    }
};

struct CesInstance {
    std::vector<int> dims;
    std::vector<CheckOperator> checks;
    std::vector<double> lambdas;

    long total_dim() const { return linalg::total_dim(dims); }
    int num_particles() const { return static_cast<int>(dims.size()); }
};

// Factor-row-only view of an instance: rows are checks, columns are particles.
struct FactorTable {
    std::vector<int> dims;
    std::vector<std::vector<ComplexMatrix>> cells;   // cells[row][col]
    std::vector<double> lambdas;

    int rows() const { return static_cast<int>(cells.size()); }
    int cols() const { return static_cast<int>(dims.size()); }
};

inline CesInstance to_instance(const FactorTable& t) {
    CesInstance x;
    x.dims = t.dims;
    x.lambdas = t.lambdas;
    for (const auto& row : t.cells) x.checks.push_back(CheckOperator::factor_row(row));
    return x;
}

// Succeeds only when every check is a factor row.
inline FactorTable to_factor_table(const CesInstance& x) {
    FactorTable t;
    t.dims = x.dims;
    t.lambdas = x.lambdas;
    for (const auto& c : x.checks) {
        if (c.kind != CheckKind::Factor)
            throw ShapeMismatch("to_factor_table: instance contains a non-factor check");
        t.cells.push_back(c.factors);
    }
    return t;
}

// ---------------------------------------------------------------------------
// Dense forms and matrix-free application

inline ComplexMatrix to_dense(const CheckOperator& c, const std::vector<int>& dims) {
    if (c.kind == CheckKind::Local) return linalg::embed_local(c.local, c.support, dims);
    return linalg::tensor_all(c.factors);
}

// Apply a check to every column of b without building the full operator.
inline ComplexMatrix apply_check(const CheckOperator& c, const std::vector<int>& dims,
                                 const ComplexMatrix& b) {
    if (c.kind == CheckKind::Local) return linalg::apply_local(c.local, c.support, dims, b);
    ComplexMatrix out = b;
    for (std::size_t j = 0; j < c.factors.size(); ++j) {
        const ComplexMatrix& f = c.factors[j];
        if (f.rows() == f.cols() && f.isIdentity(0.0)) continue;
        out = linalg::apply_local(f, {static_cast<int>(j)}, dims, out);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Support analysis

namespace detail {

// True when the operator on a tensor factor is proportional to the identity.
inline bool proportional_to_identity(const ComplexMatrix& m, const ToleranceContext& tol) {
    if (m.rows() != m.cols() || m.rows() == 0) return false;
    Complex c = m.trace() / static_cast<double>(m.rows());
    double scale = std::max(1.0, linalg::max_abs(m));
    return linalg::max_abs(m - c * ComplexMatrix::Identity(m.rows(), m.cols())) <=
           tol.eq_eps * scale;
}

// True when a local operator h on the given support acts as identity (x)
// something on the axis at `pos`: equivalently, h commutes with every
// operator supported on that axis alone.
inline bool acts_trivially_on_axis(const ComplexMatrix& h, const std::vector<int>& supp_dims,
                                   int pos, const ToleranceContext& tol) {
    const int d = supp_dims[pos];
    double scale = std::max(1.0, linalg::max_abs(h));
    for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
            ComplexMatrix unit = ComplexMatrix::Zero(d, d);
            unit(a, b) = 1.0;
            ComplexMatrix e = linalg::embed_local(unit, {pos}, supp_dims);
            if (linalg::max_abs(linalg::commutator(h, e)) > tol.eq_eps * scale) return false;
        }
    return true;
}

}  // namespace detail

// Particles on which the check genuinely acts (identity factors and trivial
// axes of local terms are dropped). Sorted ascending.
inline std::vector<int> nontrivial_support(const CheckOperator& c, const std::vector<int>& dims,
                                           const ToleranceContext& tol) {
    std::vector<int> out;
    if (c.kind == CheckKind::Factor) {
        for (std::size_t j = 0; j < c.factors.size(); ++j)
            if (!detail::proportional_to_identity(c.factors[j], tol)) out.push_back(static_cast<int>(j));
        return out;
    }
    std::vector<int> supp_dims;
    for (int s : c.support) supp_dims.push_back(dims[s]);
    for (std::size_t p = 0; p < c.support.size(); ++p)
        if (!detail::acts_trivially_on_axis(c.local, supp_dims, static_cast<int>(p), tol))
            out.push_back(c.support[p]);
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// Spectra and eigenvalue matching

// Spectral norm of a check (product of per-factor norms for factor rows).
inline double check_norm(const CheckOperator& c, const ToleranceContext& tol) {
    auto spectral = [&](const ComplexMatrix& m) {
        auto eig = linalg::hermitian_eigendecomposition(m, tol);
        return eig.eigenvalues.size() == 0 ? 0.0 : eig.eigenvalues.cwiseAbs().maxCoeff();
    };
    if (c.kind == CheckKind::Local) return spectral(c.local);
    double p = 1.0;
    for (const auto& f : c.factors) p *= spectral(f);
    return p;
}

// All eigenvalues of a check, deduplicated at resolution merge_eps.
inline std::vector<double> check_spectrum(const CheckOperator& c, const std::vector<int>& dims,
                                          const ToleranceContext& tol) {
    (void)dims;
    std::vector<double> values;
    if (c.kind == CheckKind::Local) {
        auto eig = linalg::hermitian_eigendecomposition(c.local, tol);
        values.assign(eig.eigenvalues.begin(), eig.eigenvalues.end());
    } else {
        // Eigenvalues of a tensor product are products of per-factor
        // eigenvalues; accumulate the product set site by site.
        values = {1.0};
        for (const auto& f : c.factors) {
            auto eig = linalg::hermitian_eigendecomposition(f, tol);
            std::vector<double> next;
            next.reserve(values.size() * eig.eigenvalues.size());
            for (double v : values)
                for (double mu : eig.eigenvalues) next.push_back(v * mu);
            std::sort(next.begin(), next.end());
            // Merge near-duplicates to keep the set from exploding.
            std::vector<double> merged;
            for (double v : next)
                if (merged.empty() || v - merged.back() > 1e-12 * std::max(1.0, std::abs(v)))
                    merged.push_back(v);
            values = std::move(merged);
        }
    }
    std::sort(values.begin(), values.end());
    return values;
}

// Does lambda match some eigenvalue of the check, within the spectral window?
inline bool lambda_in_spectrum(const CheckOperator& c, double lambda,
                               const std::vector<int>& dims, const ToleranceContext& tol) {
    double window = kSpectrumWindow * std::max(check_norm(c, tol), 1e-30);
    if (check_norm(c, tol) == 0.0) window = kSpectrumWindow;  // zero operator: spectrum {0}
    for (double v : check_spectrum(c, dims, tol))
        if (std::abs(v - lambda) <= window) return true;
    return false;
}

// Orthonormal basis of the eigenspace of a Hermitian matrix matched by
// lambda. When several numerically distinct eigenvalues fall inside the
// window, the smallest matched cluster wins (clusters are split at
// resolution eq_eps so a genuinely degenerate eigenvalue is kept whole).
inline ComplexMatrix eigenspace_of(const ComplexMatrix& h, double lambda,
                                   const ToleranceContext& tol) {
    auto eig = linalg::hermitian_eigendecomposition(h, tol);
    double norm = eig.eigenvalues.size() == 0 ? 0.0 : eig.eigenvalues.cwiseAbs().maxCoeff();
    double window = kSpectrumWindow * std::max(norm, 1.0);
    double cluster_gap = tol.eq_eps * std::max(norm, 1.0);
    int first = -1;
    for (int i = 0; i < eig.eigenvalues.size(); ++i) {
        if (std::abs(eig.eigenvalues(i) - lambda) <= window) {
            first = i;
            break;
        }
    }
    if (first < 0) return ComplexMatrix(h.rows(), 0);
    int last = first;
    while (last + 1 < eig.eigenvalues.size() &&
           std::abs(eig.eigenvalues(last + 1) - lambda) <= window &&
           eig.eigenvalues(last + 1) - eig.eigenvalues(last) <= cluster_gap)
        ++last;
    return eig.vectors.middleCols(first, last - first + 1);
}

// ---------------------------------------------------------------------------
// Commutation structure of factor rows

enum class CommutationKind { Regular, Singular, NonCommuting };

inline const char* to_string(CommutationKind k) {
    switch (k) {
        case CommutationKind::Regular: return "regular";
        case CommutationKind::Singular: return "singular";
        default: return "non-commuting";
    }
}

// Classify a pair of factor rows by their per-particle products. The rows
// commute in a singular way when some per-particle product vanishes (then the
// full products are zero in both orders), and in a regular way when every
// particle either commutes or anticommutes and the anticommuting particles
// come in even number. Everything else fails to commute.
inline CommutationKind classify_commutation(const std::vector<ComplexMatrix>& row_a,
                                            const std::vector<ComplexMatrix>& row_b,
                                            const ToleranceContext& tol) {
    if (row_a.size() != row_b.size())
        throw ShapeMismatch("classify_commutation: rows have different lengths");
    int anticommuting = 0;
    bool noncommuting_site = false;
    for (std::size_t j = 0; j < row_a.size(); ++j) {
        const ComplexMatrix& a = row_a[j];
        const ComplexMatrix& b = row_b[j];
        double scale = std::max(1.0, linalg::max_abs(a) * linalg::max_abs(b)) *
                       static_cast<double>(a.rows());
        ComplexMatrix ab = a * b;
        ComplexMatrix ba = b * a;
        if (linalg::max_abs(ab) <= tol.eq_eps * scale) return CommutationKind::Singular;
        if (linalg::max_abs(ab - ba) <= tol.eq_eps * scale) continue;
        if (linalg::max_abs(ab + ba) <= tol.eq_eps * scale) {
            ++anticommuting;
            continue;
        }
        noncommuting_site = true;
    }
    if (noncommuting_site || anticommuting % 2 != 0) return CommutationKind::NonCommuting;
    return CommutationKind::Regular;
}

// ---------------------------------------------------------------------------
// Pairwise commutation of arbitrary checks (no full-space matrices)

namespace detail {

// Tensor product of a factor row restricted to the listed particles, in the
// listed order.
inline ComplexMatrix factors_on(const CheckOperator& c, const std::vector<int>& sites) {
    ComplexMatrix out = ComplexMatrix::Identity(1, 1);
    for (int s : sites) out = linalg::tensor(out, c.factors[s]);
    return out;
}

inline bool some_factor_zero(const CheckOperator& c, const std::vector<int>& excluded,
                             const ToleranceContext& tol) {
    std::set<int> skip(excluded.begin(), excluded.end());
    for (std::size_t j = 0; j < c.factors.size(); ++j)
        if (!skip.count(static_cast<int>(j)) && linalg::max_abs(c.factors[j]) <= tol.eq_eps)
            return true;
    return false;
}

}  // namespace detail

// Do two checks commute as operators on the full space? Decided on the union
// of supports, so it stays cheap even when the total dimension is large.
inline bool checks_commute(const CheckOperator& a, const CheckOperator& b,
                           const std::vector<int>& dims, const ToleranceContext& tol) {
    if (a.kind == CheckKind::Factor && b.kind == CheckKind::Factor)
        return classify_commutation(a.factors, b.factors, tol) != CommutationKind::NonCommuting;

    if (a.kind == CheckKind::Local && b.kind == CheckKind::Local) {
        std::set<int> overlap;
        for (int s : a.support)
            if (std::find(b.support.begin(), b.support.end(), s) != b.support.end())
                overlap.insert(s);
        if (overlap.empty()) return true;  // disjoint supports commute identically
        std::vector<int> uni = a.support;
        for (int s : b.support)
            if (std::find(uni.begin(), uni.end(), s) == uni.end()) uni.push_back(s);
        std::sort(uni.begin(), uni.end());
        std::vector<int> uni_dims;
        for (int s : uni) uni_dims.push_back(dims[s]);
        auto position = [&](int site) {
            return static_cast<int>(std::find(uni.begin(), uni.end(), site) - uni.begin());
        };
        std::vector<int> pos_a, pos_b;
        for (int s : a.support) pos_a.push_back(position(s));
        for (int s : b.support) pos_b.push_back(position(s));
        ComplexMatrix ea = linalg::embed_local(a.local, pos_a, uni_dims);
        ComplexMatrix eb = linalg::embed_local(b.local, pos_b, uni_dims);
        double scale = std::max(1.0, linalg::max_abs(ea) * linalg::max_abs(eb)) *
                       static_cast<double>(ea.rows());
        return linalg::max_abs(linalg::commutator(ea, eb)) <= tol.eq_eps * scale;
    }

    // Mixed pair: [h[S], tensor row] = [h, row restricted to S] tensored with
    // the off-support factors, so it vanishes iff the on-support commutator
    // does or some off-support factor is zero.
    const CheckOperator& loc = a.kind == CheckKind::Local ? a : b;
    const CheckOperator& fac = a.kind == CheckKind::Local ? b : a;
    if (detail::some_factor_zero(fac, loc.support, tol)) return true;
    ComplexMatrix on_support = detail::factors_on(fac, loc.support);
    double scale = std::max(1.0, linalg::max_abs(loc.local) * linalg::max_abs(on_support)) *
                   static_cast<double>(on_support.rows());
    return linalg::max_abs(linalg::commutator(loc.local, on_support)) <= tol.eq_eps * scale;
}

// ---------------------------------------------------------------------------
// Validation

struct ValidationReport {
    bool valid = true;
    std::vector<std::string> problems;
    std::vector<int> non_hermitian_checks;
    std::vector<int> lambda_out_of_spectrum;
    std::vector<std::array<int, 2>> non_commuting_pairs;

    void fail(std::string msg) {
        valid = false;
        problems.push_back(std::move(msg));
    }
};

inline ValidationReport validate(const CesInstance& x, const ToleranceContext& tol) {
    ValidationReport rep;
    if (x.dims.empty()) rep.fail("instance has no particles");
    for (std::size_t j = 0; j < x.dims.size(); ++j)
        if (x.dims[j] < 1) rep.fail("particle " + std::to_string(j) + " has dimension < 1");
    if (!rep.valid) return rep;
    if (x.total_dim() > kMaxTotalDim)
        rep.fail("total dimension " + std::to_string(x.total_dim()) + " exceeds the cap of " +
                 std::to_string(kMaxTotalDim));
    if (x.lambdas.size() != x.checks.size())
        rep.fail("number of target eigenvalues differs from number of checks");
    if (!rep.valid) return rep;

    // Shape and Hermiticity, check by check.
    for (std::size_t a = 0; a < x.checks.size(); ++a) {
        const auto& c = x.checks[a];
        std::string tag = "check " + std::to_string(a);
        if (c.kind == CheckKind::Local) {
            try {
                linalg::detail::check_support(c.local, c.support, x.dims);
            } catch (const SupportMismatch& e) {
                rep.fail(tag + ": " + e.what());
                continue;
            }
            if (!linalg::is_hermitian(c.local, tol)) {
                rep.fail(tag + ": local matrix is not Hermitian");
                rep.non_hermitian_checks.push_back(static_cast<int>(a));
            }
        } else {
            if (c.factors.size() != x.dims.size()) {
                rep.fail(tag + ": factor row length differs from particle count");
                continue;
            }
            bool shapes_ok = true;
            for (std::size_t j = 0; j < c.factors.size(); ++j)
                if (c.factors[j].rows() != x.dims[j] || c.factors[j].cols() != x.dims[j]) {
                    rep.fail(tag + ": factor " + std::to_string(j) + " has the wrong shape");
                    shapes_ok = false;
                }
            if (!shapes_ok) continue;
            for (std::size_t j = 0; j < c.factors.size(); ++j)
                if (!linalg::is_hermitian(c.factors[j], tol)) {
                    rep.fail(tag + ": factor " + std::to_string(j) + " is not Hermitian");
                    rep.non_hermitian_checks.push_back(static_cast<int>(a));
                    break;
                }
        }
    }
    if (!rep.valid) return rep;

    // Pairwise commutation.
    for (std::size_t a = 0; a < x.checks.size(); ++a)
        for (std::size_t b = a + 1; b < x.checks.size(); ++b)
            if (!checks_commute(x.checks[a], x.checks[b], x.dims, tol)) {
                rep.fail("checks " + std::to_string(a) + " and " + std::to_string(b) +
                         " do not commute");
                rep.non_commuting_pairs.push_back({static_cast<int>(a), static_cast<int>(b)});
            }

    // Target eigenvalues must sit in the spectra.
    for (std::size_t a = 0; a < x.checks.size(); ++a)
        if (!lambda_in_spectrum(x.checks[a], x.lambdas[a], x.dims, tol)) {
            rep.fail("target eigenvalue of check " + std::to_string(a) +
                     " is not in the spectrum");
            rep.lambda_out_of_spectrum.push_back(static_cast<int>(a));
        }
    return rep;
}

// ---------------------------------------------------------------------------
// Interaction graph

struct InteractionGraph {
    int num_particles = 0;
    std::vector<std::pair<int, int>> edges;               // sorted, j < k
    std::map<std::pair<int, int>, std::vector<int>> checks_by_edge;

    std::vector<int> neighbors(int j) const {
        std::vector<int> out;
        for (auto [u, v] : edges) {
            if (u == j) out.push_back(v);
            if (v == j) out.push_back(u);
        }
        return out;
    }
};

// Build the graph whose vertices are particles and whose edges join the two
// particles of each genuinely 2-local check. Checks acting on fewer than two
// particles produce no edge; checks acting on more than two are an error.
inline InteractionGraph interaction_graph(const CesInstance& x, const ToleranceContext& tol) {
    InteractionGraph g;
    g.num_particles = x.num_particles();
    std::set<std::pair<int, int>> edge_set;
    for (std::size_t a = 0; a < x.checks.size(); ++a) {
        auto supp = nontrivial_support(x.checks[a], x.dims, tol);
        if (supp.size() > 2)
            throw NotTwoLocal("check " + std::to_string(a) + " acts on " +
                              std::to_string(supp.size()) + " particles");
        if (supp.size() == 2) {
            auto edge = std::make_pair(supp[0], supp[1]);
            edge_set.insert(edge);
            g.checks_by_edge[edge].push_back(static_cast<int>(a));
        }
    }
    g.edges.assign(edge_set.begin(), edge_set.end());
    return g;
}

}  // namespace ces::instance
