#pragma once

/*
/   Exact solver for instances whose checks each touch at most two particles.
/
/   Strategy in brief. Every check is first converted into a projector
/   constraint on one particle or one pair. Single-particle constraints and
/   deficient marginals shrink the particle spaces until every remaining
/   edge projector has full one-sided support. For each particle the one-side
/   Schmidt factors of its edge projectors generate commuting algebras
/   (commutation of the original checks forces this), so the algebra engine
/   splits the particle space into blocks of the form
/
/       H_j  =  (+)_a  ( (x)_k H_{j.k}^a )  (x)  H_{j.j}^a
/
/   where edge (j,k) acts only on the H_{j.k} axis. In that frame each edge
/   projector becomes a cell M (x) I on its two private axes, different edges
/   touch disjoint axes, and the answer is a finite sum over block choices:
/
/       dim = sum over sectors  prod_j dim H_{j.j}  *  prod_e rank M_e .
/
/   A witness state is assembled by picking any sector with nonzero weight,
/   one image vector per edge cell, and mapping back through the frames.
*/

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ces/algebra.hpp"
#include "ces/errors.hpp"
#include "ces/instance.hpp"
#include "ces/linalg.hpp"

namespace ces::twolocal {

using ces::Complex;
using ces::ComplexMatrix;
using ces::ComplexVector;
using instance::CesInstance;
using instance::CheckKind;
using instance::CheckOperator;

struct ParticleBlock {
    std::vector<long> edge_dims;  // aligned with ParticleStructure::neighbors
    long private_dim = 1;
    ComplexMatrix frame;          // restricted dim x (prod(edge_dims) * private_dim)
};

struct ParticleStructure {
    std::vector<int> neighbors;   // ascending particle ids
    ComplexMatrix restriction;    // original dim x restricted dim
    std::vector<ParticleBlock> blocks;
};

struct EdgeData {
    int j = 0, k = 0;  // j < k
    // Indexed [block at j][block at k]; cells live on H_{j.k} (x) H_{k.j}.
    std::vector<std::vector<ComplexMatrix>> cells;
    std::vector<std::vector<long>> ranks;
};

struct Solution {
    bool positive = false;
    long dimension = 0;
    std::string negative_reason;
    std::vector<ParticleStructure> particles;
    std::vector<EdgeData> edges;
    std::vector<int> sector;    // block choice per particle backing the witness
    ComplexVector model_state;  // unit witness in the original space
};

namespace detail {

// Reduced operator on the left axis of a pair-space operator.
inline ComplexMatrix ptrace_right(const ComplexMatrix& m, long dj, long dk) {
    ComplexMatrix out = ComplexMatrix::Zero(dj, dj);
    for (long p = 0; p < dj; ++p)
        for (long q = 0; q < dj; ++q)
            for (long i = 0; i < dk; ++i) out(p, q) += m(p * dk + i, q * dk + i);
    return out;
}

inline ComplexMatrix ptrace_left(const ComplexMatrix& m, long dj, long dk) {
    ComplexMatrix out = ComplexMatrix::Zero(dk, dk);
    for (long p = 0; p < dk; ++p)
        for (long q = 0; q < dk; ++q)
            for (long i = 0; i < dj; ++i) out(p, q) += m(i * dk + p, i * dk + q);
    return out;
}

// Checks that m equals a (x) I (front active) or I (x) b (back active) on a
// front*back dimensional space and returns the active part. Empty result
// means the structure audit failed.
inline std::optional<ComplexMatrix> split_structured(const ComplexMatrix& m, long front, long back,
                                                     bool front_active) {
    long active = front_active ? front : back;
    ComplexMatrix a(active, active);
    for (long p = 0; p < active; ++p)
        for (long q = 0; q < active; ++q)
            a(p, q) = front_active ? m(p * back, q * back) : m(p, q);
    ComplexMatrix expect = front_active
                               ? linalg::tensor(a, ComplexMatrix::Identity(back, back))
                               : linalg::tensor(ComplexMatrix::Identity(front, front), a);
    if (linalg::max_abs(m - expect) > 1e-6 * std::max(1.0, linalg::max_abs(m)))
        return std::nullopt;
    return a;
}

// Applies a rectangular map to one axis of a state vector, changing that
// axis dimension from g.cols() to g.rows().
inline ComplexVector apply_axis_map(const ComplexVector& v, std::vector<int>& dims, int axis,
                                    const ComplexMatrix& g) {
    std::vector<int> out_dims = dims;
    out_dims[axis] = static_cast<int>(g.rows());
    ComplexVector out = ComplexVector::Zero(linalg::total_dim(out_dims));
    for (long idx = 0; idx < out.size(); ++idx) {
        auto digits = linalg::digits_of(idx, out_dims);
        int t = digits[axis];
        Complex acc = 0.0;
        for (int s = 0; s < dims[axis]; ++s) {
            digits[axis] = s;
            acc += g(t, s) * v(linalg::index_of(digits, dims));
        }
        out(idx) = acc;
    }
    dims = out_dims;
    return out;
}

// One constraint after support analysis: an operator on at most two sites
// and its target eigenvalue.
struct RawConstraint {
    std::vector<int> sites;  // ascending, size 0..2
    ComplexMatrix op;
    double lambda = 0.0;
};

// Scalar multiple test used when collapsing identity-like factors.
inline std::optional<double> identity_scale(const ComplexMatrix& f) {
    Complex c = f.trace() / static_cast<double>(f.rows());
    if (std::abs(c.imag()) > 1e-9 * std::max(1.0, std::abs(c))) return std::nullopt;
    ComplexMatrix res = f - c * ComplexMatrix::Identity(f.rows(), f.cols());
    if (linalg::max_abs(res) > 1e-8 * std::max(1.0, linalg::max_abs(f))) return std::nullopt;
    return c.real();
}

// Reduces a check to its nontrivially supported sites. Returns nothing when
// the constraint is void (zero or identity operator matching its target);
// sets *negative when it can never hold.
inline std::optional<RawConstraint> reduce_check(const CheckOperator& c, double lambda,
                                                 const std::vector<int>& dims,
                                                 const ToleranceContext& tol, bool* negative,
                                                 std::string* why) {
    std::vector<int> sites = instance::nontrivial_support(c, dims, tol);
    double window = 1e-7 * std::max({1.0, std::abs(lambda), instance::check_norm(c, tol)});

    if (c.kind == CheckKind::Factor) {
        double scalar = 1.0;
        std::vector<ComplexMatrix> active;
        for (std::size_t j = 0; j < c.factors.size(); ++j) {
            if (std::find(sites.begin(), sites.end(), static_cast<int>(j)) != sites.end()) {
                active.push_back(c.factors[j]);
            } else {
                auto s = identity_scale(c.factors[j]);
                if (!s) throw InternalInconsistency("factor flagged trivial is not a scalar");
                scalar *= *s;
            }
        }
        if (std::abs(scalar) < 1e-12 || sites.empty()) {
            double value = sites.empty() ? scalar : 0.0;
            if (std::abs(value - lambda) > window) {
                *negative = true;
                *why = "a scalar check misses its target value";
            }
            return std::nullopt;
        }
        RawConstraint out;
        out.sites = sites;
        out.op = linalg::tensor_all(active);
        out.lambda = lambda / scalar;
        return out;
    }

    // Local term: peel off axes the operator ignores.
    if (sites.empty()) {
        auto s = identity_scale(c.local);
        if (!s) throw InternalInconsistency("local term flagged trivial is not a scalar");
        if (std::abs(*s - lambda) > window) {
            *negative = true;
            *why = "a scalar check misses its target value";
        }
        return std::nullopt;
    }
    if (sites == c.support) {
        RawConstraint out;
        out.sites = sites;
        out.op = c.local;
        out.lambda = lambda;
        return out;
    }
    std::vector<int> support_dims;
    for (int s : c.support) support_dims.push_back(dims[s]);
    std::vector<int> perm;
    long front = 1, back = 1;
    for (std::size_t i = 0; i < c.support.size(); ++i)
        if (std::find(sites.begin(), sites.end(), c.support[i]) != sites.end()) {
            perm.push_back(static_cast<int>(i));
            front *= support_dims[i];
        }
    for (std::size_t i = 0; i < c.support.size(); ++i)
        if (std::find(sites.begin(), sites.end(), c.support[i]) == sites.end()) {
            perm.push_back(static_cast<int>(i));
            back *= support_dims[i];
        }
    ComplexMatrix moved = linalg::permute_axes(c.local, support_dims, perm);
    auto op = split_structured(moved, front, back, true);
    if (!op) throw InternalInconsistency("local term failed its trivial-axis split");
    RawConstraint out;
    out.sites = sites;
    out.op = *op;
    out.lambda = lambda;
    return out;
}

inline ComplexMatrix eigenprojector(const ComplexMatrix& op, double lambda,
                                    const ToleranceContext& tol) {
    ComplexMatrix basis = instance::eigenspace_of(op, lambda, tol);
    if (basis.cols() == 0) return ComplexMatrix::Zero(op.rows(), op.cols());
    return linalg::projector_onto(basis);
}

// Intersection of the images of commuting projectors, as a projector.
inline ComplexMatrix intersect_images(const std::vector<ComplexMatrix>& ps,
                                      const ToleranceContext& tol) {
    const long d = ps[0].rows();
    ComplexMatrix basis = ComplexMatrix::Identity(d, d);
    for (const auto& p : ps) {
        if (basis.cols() == 0) break;
        ComplexMatrix applied = basis - p * basis;
        basis = linalg::restrict_to_kernel(basis, applied, tol, tol.eq_eps);
    }
    if (basis.cols() == 0) return ComplexMatrix::Zero(d, d);
    return linalg::projector_onto(basis);
}

// Constraint surviving a basis change on one side of a pair space: the new
// projector keeps exactly the vectors whose lift lands in the old image.
inline ComplexMatrix restrict_pair_projector(const ComplexMatrix& proj, const ComplexMatrix& b,
                                             bool left_side, long dj, long dk,
                                             const ToleranceContext& tol) {
    ComplexMatrix lift = left_side ? linalg::tensor(b, ComplexMatrix::Identity(dk, dk))
                                   : linalg::tensor(ComplexMatrix::Identity(dj, dj), b);
    ComplexMatrix violation = lift - proj * lift;
    ComplexMatrix kept = linalg::kernel_basis(violation, tol, tol.eq_eps);
    if (kept.cols() == 0) return ComplexMatrix::Zero(lift.cols(), lift.cols());
    return linalg::projector_onto(kept);
}

}  // namespace detail

// ---------------------------------------------------------------------------

inline Solution solve(const CesInstance& x, const ToleranceContext& tol, bool want_witness = true) {
    const int n = static_cast<int>(x.num_particles());
    if (x.total_dim() > instance::kMaxTotalDim)
        throw TooLarge("twolocal: total dimension " + std::to_string(x.total_dim()));
    if (x.lambdas.size() != x.checks.size())
        throw ShapeMismatch("twolocal: lambda count mismatch");

    Solution sol;
    auto negative = [&](const std::string& why) {
        sol.positive = false;
        sol.dimension = 0;
        sol.negative_reason = why;
        return sol;
    };

    // ---- Phase 1: reduce checks to one- and two-site projector constraints.
    std::vector<std::vector<ComplexMatrix>> singleton(n);
    std::map<std::pair<int, int>, std::vector<ComplexMatrix>> pair_parts;
    for (std::size_t a = 0; a < x.checks.size(); ++a) {
        bool neg = false;
        std::string why;
        auto raw = detail::reduce_check(x.checks[a], x.lambdas[a], x.dims, tol, &neg, &why);
        if (neg) return negative(why);
        if (!raw) continue;
        if (raw->sites.size() > 2)
            throw NotTwoLocal("check " + std::to_string(a) + " acts on " +
                              std::to_string(raw->sites.size()) + " particles");
        ComplexMatrix proj = detail::eigenprojector(raw->op, raw->lambda, tol);
        if (proj.trace().real() < 0.5)
            return negative("a check's target value lies outside its local spectrum");
        if (raw->sites.size() == 1) {
            singleton[raw->sites[0]].push_back(proj);
        } else {
            pair_parts[{raw->sites[0], raw->sites[1]}].push_back(proj);
        }
    }

    // ---- Phase 2: restriction cascade.
    std::vector<long> cur(x.dims.begin(), x.dims.end());
    std::vector<ComplexMatrix> restriction(n);
    for (int j = 0; j < n; ++j) restriction[j] = ComplexMatrix::Identity(cur[j], cur[j]);
    std::map<std::pair<int, int>, ComplexMatrix> edge_proj;
    for (auto& [e, parts] : pair_parts) edge_proj[e] = detail::intersect_images(parts, tol);

    auto apply_restriction = [&](int j, const ComplexMatrix& b) {
        restriction[j] = restriction[j] * b;
        long old = cur[j];
        cur[j] = b.cols();
        for (auto& [e, proj] : edge_proj) {
            if (e.first == j)
                proj = detail::restrict_pair_projector(proj, b, true, old, cur[e.second], tol);
            else if (e.second == j)
                proj = detail::restrict_pair_projector(proj, b, false, cur[e.first], old, tol);
        }
    };

    for (int j = 0; j < n; ++j) {
        if (singleton[j].empty()) continue;
        ComplexMatrix meet = detail::intersect_images(singleton[j], tol);
        ComplexMatrix basis = linalg::image_basis(meet, tol, tol.eq_eps);
        if (basis.cols() == 0) return negative("single-particle constraints emptied a particle");
        if (basis.cols() < cur[j]) apply_restriction(j, basis);
    }

    for (bool changed = true; changed;) {
        changed = false;
        for (auto it = edge_proj.begin(); it != edge_proj.end();) {
            auto [j, k] = it->first;
            long r = linalg::rank(it->second, tol, tol.eq_eps);
            if (r == 0) return negative("an edge constraint is unsatisfiable");
            if (r == cur[j] * cur[k]) {
                it = edge_proj.erase(it);  // vacuous constraint
                changed = true;
                continue;
            }
            ComplexMatrix marg_l = detail::ptrace_right(it->second, cur[j], cur[k]);
            ComplexMatrix bl = linalg::image_basis(marg_l, tol, tol.eq_eps);
            if (bl.cols() < cur[j]) {
                apply_restriction(j, bl);
                changed = true;
                break;
            }
            ComplexMatrix marg_r = detail::ptrace_left(it->second, cur[j], cur[k]);
            ComplexMatrix br = linalg::image_basis(marg_r, tol, tol.eq_eps);
            if (br.cols() < cur[k]) {
                apply_restriction(k, br);
                changed = true;
                break;
            }
            ++it;
        }
    }
    for (int j = 0; j < n; ++j)
        if (cur[j] == 0) return negative("restrictions emptied a particle space");

    // ---- Phase 3: per-particle block and subparticle structure.
    std::vector<std::vector<int>> neighbors(n);
    for (const auto& [e, proj] : edge_proj) {
        neighbors[e.first].push_back(e.second);
        neighbors[e.second].push_back(e.first);
    }
    for (auto& nb : neighbors) std::sort(nb.begin(), nb.end());

    // One-side Schmidt factors per edge, both orientations.
    std::map<std::pair<int, int>, linalg::SchmidtDecomposition> schmidt;
    for (const auto& [e, proj] : edge_proj)
        schmidt[e] = linalg::operator_schmidt(proj, cur[e.first], cur[e.second], tol);

    sol.particles.resize(n);
    for (int j = 0; j < n; ++j) {
        ParticleStructure& ps = sol.particles[j];
        ps.neighbors = neighbors[j];
        ps.restriction = restriction[j];
        if (ps.neighbors.empty()) {
            ParticleBlock blk;
            blk.private_dim = cur[j];
            blk.frame = ComplexMatrix::Identity(cur[j], cur[j]);
            ps.blocks.push_back(std::move(blk));
            continue;
        }

        std::vector<std::vector<ComplexMatrix>> gens_by_edge;
        std::vector<ComplexMatrix> all_gens;
        for (int k : ps.neighbors) {
            const auto& sd = schmidt.at({std::min(j, k), std::max(j, k)});
            const auto& side = j < k ? sd.left : sd.right;
            gens_by_edge.push_back(side);
            for (const auto& g : side) all_gens.push_back(g);
        }

        auto rng = linalg::make_rng(tol.seed ^ (0x517cc1b727220a95ull + 0x9e3779b9ull * (j + 1)));
        algebra::BlockStructure bs = algebra::block_decompose(all_gens, tol);
        for (const auto& ab : bs.blocks) {
            // Pull each edge algebra down to the d1-dimensional active space.
            std::vector<std::vector<ComplexMatrix>> cur_gens(gens_by_edge.size());
            for (std::size_t e = 0; e < gens_by_edge.size(); ++e)
                for (const auto& g : gens_by_edge[e]) {
                    ComplexMatrix inside = ab.isometry.adjoint() * g * ab.isometry;
                    auto a1 = detail::split_structured(inside, ab.d1, ab.d2, true);
                    if (!a1)
                        throw DecompositionFailed("edge factor lost its block structure");
                    cur_gens[e].push_back(*a1);
                }

            // Successively split off one tensor axis per edge.
            ParticleBlock blk;
            blk.private_dim = ab.d2;
            ComplexMatrix active_frame = ComplexMatrix::Identity(ab.d1, ab.d1);
            long prefix = 1, leftover = ab.d1;
            for (std::size_t e = 0; e < cur_gens.size(); ++e) {
                auto basis = algebra::generate_algebra(cur_gens[e], tol);
                algebra::FactorStructure f = algebra::factor_simple(basis, rng, tol);
                active_frame =
                    active_frame *
                    linalg::tensor(ComplexMatrix::Identity(prefix, prefix), f.unitary);
                for (std::size_t e2 = e + 1; e2 < cur_gens.size(); ++e2)
                    for (auto& h : cur_gens[e2]) {
                        ComplexMatrix inside = f.unitary.adjoint() * h * f.unitary;
                        auto hr = detail::split_structured(inside, f.d1, f.d2, false);
                        if (!hr)
                            throw DecompositionFailed(
                                "edge algebras stopped commuting during the split");
                        h = *hr;
                    }
                blk.edge_dims.push_back(f.d1);
                prefix *= f.d1;
                leftover = f.d2;
            }
            if (leftover != 1)
                throw DecompositionFailed("interactions did not exhaust their block");
            blk.frame = ab.isometry *
                        linalg::tensor(active_frame, ComplexMatrix::Identity(ab.d2, ab.d2));
            ps.blocks.push_back(std::move(blk));
        }
    }

    // ---- Phase 4: edge cells per block pair, then the sector sum.
    for (const auto& [e, proj] : edge_proj) {
        auto [j, k] = e;
        const ParticleStructure& pj = sol.particles[j];
        const ParticleStructure& pk = sol.particles[k];
        int pos_j = static_cast<int>(std::lower_bound(pj.neighbors.begin(), pj.neighbors.end(), k) -
                                     pj.neighbors.begin());
        int pos_k = static_cast<int>(std::lower_bound(pk.neighbors.begin(), pk.neighbors.end(), j) -
                                     pk.neighbors.begin());
        EdgeData ed;
        ed.j = j;
        ed.k = k;
        ed.cells.resize(pj.blocks.size());
        ed.ranks.resize(pj.blocks.size());
        for (std::size_t a = 0; a < pj.blocks.size(); ++a) {
            for (std::size_t b = 0; b < pk.blocks.size(); ++b) {
                const ParticleBlock& bj = pj.blocks[a];
                const ParticleBlock& bk = pk.blocks[b];
                ComplexMatrix lift = linalg::tensor(bj.frame, bk.frame);
                ComplexMatrix inside = lift.adjoint() * proj * lift;
                std::vector<int> dims;
                for (long dsub : bj.edge_dims) dims.push_back(static_cast<int>(dsub));
                dims.push_back(static_cast<int>(bj.private_dim));
                for (long dsub : bk.edge_dims) dims.push_back(static_cast<int>(dsub));
                dims.push_back(static_cast<int>(bk.private_dim));
                int axis_j = pos_j;
                int axis_k = static_cast<int>(bj.edge_dims.size()) + 1 + pos_k;
                std::vector<int> perm = {axis_j, axis_k};
                for (int t = 0; t < static_cast<int>(dims.size()); ++t)
                    if (t != axis_j && t != axis_k) perm.push_back(t);
                ComplexMatrix moved = linalg::permute_axes(inside, dims, perm);
                long front = static_cast<long>(dims[axis_j]) * dims[axis_k];
                long back = moved.rows() / front;
                auto cell = detail::split_structured(moved, front, back, true);
                if (!cell)
                    throw DecompositionFailed("edge projector failed its cell structure audit");
                long r = linalg::rank(*cell, tol, tol.eq_eps);
                ed.cells[a].push_back(std::move(*cell));
                ed.ranks[a].push_back(r);
            }
        }
        sol.edges.push_back(std::move(ed));
    }

    std::vector<int> block_count(n);
    for (int j = 0; j < n; ++j) block_count[j] = static_cast<int>(sol.particles[j].blocks.size());
    std::vector<int> pick(n, 0);
    std::vector<int> first_positive;
    long total = 0;
    for (bool more = true; more;) {
        long w = 1;
        for (int j = 0; j < n && w > 0; ++j) w *= sol.particles[j].blocks[pick[j]].private_dim;
        for (const auto& ed : sol.edges) {
            if (w == 0) break;
            w *= ed.ranks[pick[ed.j]][pick[ed.k]];
        }
        total += w;
        if (w > 0 && first_positive.empty()) first_positive = pick;
        more = false;
        for (int j = n - 1; j >= 0; --j) {
            if (++pick[j] < block_count[j]) {
                more = true;
                break;
            }
            pick[j] = 0;
        }
    }
    sol.dimension = total;
    sol.positive = total > 0;
    if (!sol.positive) {
        sol.negative_reason = "every sector has weight zero";
        return sol;
    }

    // ---- Phase 5: witness state for the first contributing sector.
    if (!want_witness) return sol;
    sol.sector = first_positive;

    std::vector<ComplexVector> raw_factors;
    std::vector<int> raw_dims;
    for (const auto& ed : sol.edges) {
        const ComplexMatrix& cell = ed.cells[sol.sector[ed.j]][sol.sector[ed.k]];
        ComplexMatrix img = linalg::image_basis(cell, tol, tol.eq_eps);
        raw_factors.push_back(img.col(0));
        long dj = sol.particles[ed.j].blocks[sol.sector[ed.j]]
                      .edge_dims[std::lower_bound(sol.particles[ed.j].neighbors.begin(),
                                                  sol.particles[ed.j].neighbors.end(), ed.k) -
                                 sol.particles[ed.j].neighbors.begin()];
        raw_dims.push_back(static_cast<int>(dj));
        raw_dims.push_back(static_cast<int>(img.rows() / dj));
    }
    for (int j = 0; j < n; ++j) {
        long p = sol.particles[j].blocks[sol.sector[j]].private_dim;
        raw_factors.push_back(ComplexVector::Unit(p, 0));
        raw_dims.push_back(static_cast<int>(p));
    }
    ComplexVector raw = ComplexVector::Ones(1);
    for (const auto& f : raw_factors) raw = linalg::tensor(raw, f);

    // Reorder the flat axis list into per-particle groups: for each particle
    // its edge axes in neighbor order, then its private axis.
    std::vector<int> perm;
    for (int j = 0; j < n; ++j) {
        const auto& nb = sol.particles[j].neighbors;
        for (std::size_t t = 0; t < nb.size(); ++t) {
            int k = nb[t];
            for (std::size_t e = 0; e < sol.edges.size(); ++e) {
                if (sol.edges[e].j == std::min(j, k) && sol.edges[e].k == std::max(j, k)) {
                    perm.push_back(static_cast<int>(2 * e + (j < k ? 0 : 1)));
                    break;
                }
            }
        }
        perm.push_back(static_cast<int>(2 * sol.edges.size() + j));
    }
    ComplexVector grouped = linalg::permute_axes_vec(raw, raw_dims, perm);

    std::vector<int> coarse(n);
    for (int j = 0; j < n; ++j) {
        const ParticleBlock& blk = sol.particles[j].blocks[sol.sector[j]];
        long m = blk.private_dim;
        for (long dsub : blk.edge_dims) m *= dsub;
        coarse[j] = static_cast<int>(m);
    }
    ComplexVector psi = grouped;
    for (int j = 0; j < n; ++j) {
        ComplexMatrix g =
            sol.particles[j].restriction * sol.particles[j].blocks[sol.sector[j]].frame;
        psi = detail::apply_axis_map(psi, coarse, j, g);
    }
    psi.normalize();

    // Final audit straight against the original instance.
    for (std::size_t a = 0; a < x.checks.size(); ++a) {
        double scale =
            std::max({1.0, instance::check_norm(x.checks[a], tol), std::abs(x.lambdas[a])});
        ComplexVector res =
            instance::apply_check(x.checks[a], x.dims, psi) - x.lambdas[a] * psi;
        if (res.norm() > 1e-6 * scale)
            throw InternalInconsistency("witness state failed the final residual audit");
    }
    sol.model_state = std::move(psi);
    return sol;
}

// ---------------------------------------------------------------------------
// Witness exchange

// The certificate behind a positive answer: one isometry per particle onto
// the block subspace chosen by the contributing sector. Portable on its own,
// since block numbering is an artifact of the decomposition order.
struct TwoLocalWitness {
    std::vector<ComplexMatrix> isometries;  // original dim x chosen block dim
};

inline TwoLocalWitness extract_witness(const Solution& sol) {
    if (!sol.positive || sol.sector.size() != sol.particles.size())
        throw ShapeMismatch("extract_witness: solution carries no contributing sector");
    TwoLocalWitness w;
    for (std::size_t j = 0; j < sol.particles.size(); ++j)
        w.isometries.push_back(sol.particles[j].restriction *
                               sol.particles[j].blocks[sol.sector[j]].frame);
    return w;
}

// Checks a claimed certificate: restrict every check to the witness ranges,
// solve the restricted instance, and lift its model state back. Acceptance
// requires the lifted state to satisfy the original eigenvalue equations,
// which keeps a dishonest certificate from ever passing regardless of what
// the restricted solve made of it. Size mismatches throw; everything the
// certificate merely gets wrong rejects.
inline bool verify_witness(const CesInstance& x, const TwoLocalWitness& w,
                           const ToleranceContext& tol) {
    if (w.isometries.size() != x.dims.size())
        throw ShapeMismatch("verify_witness: one isometry per particle required");
    for (std::size_t j = 0; j < x.dims.size(); ++j) {
        const ComplexMatrix& v = w.isometries[j];
        if (v.rows() != x.dims[j] || v.cols() < 1 || v.cols() > v.rows())
            throw ShapeMismatch("verify_witness: isometry " + std::to_string(j) +
                                " has the wrong shape");
    }
    for (const auto& v : w.isometries) {
        ComplexMatrix gram = v.adjoint() * v;
        if ((gram - ComplexMatrix::Identity(gram.rows(), gram.cols())).norm() > 1e-7)
            return false;
    }

    CesInstance r;
    for (const auto& v : w.isometries) r.dims.push_back(static_cast<int>(v.cols()));
    r.lambdas = x.lambdas;
    for (const auto& c : x.checks) {
        if (c.kind == CheckKind::Local) {
            ComplexMatrix lift = ComplexMatrix::Identity(1, 1);
            for (int s : c.support) lift = linalg::tensor(lift, w.isometries[s]);
            r.checks.push_back(
                CheckOperator::local_term(c.support, lift.adjoint() * c.local * lift));
        } else {
            std::vector<ComplexMatrix> fs;
            for (std::size_t j = 0; j < c.factors.size(); ++j)
                fs.push_back(w.isometries[j].adjoint() * c.factors[j] * w.isometries[j]);
            r.checks.push_back(CheckOperator::factor_row(std::move(fs)));
        }
    }

    Solution rs;
    try {
        rs = solve(r, tol, true);
    } catch (const Error&) {
        return false;  // the restriction broke the two-local structure
    }
    if (!rs.positive || rs.model_state.size() == 0) return false;

    std::vector<int> dims = r.dims;
    ComplexVector psi = rs.model_state;
    for (std::size_t j = 0; j < w.isometries.size(); ++j)
        psi = detail::apply_axis_map(psi, dims, static_cast<int>(j), w.isometries[j]);
    psi.normalize();
    for (std::size_t a = 0; a < x.checks.size(); ++a) {
        double scale =
            std::max({1.0, instance::check_norm(x.checks[a], tol), std::abs(x.lambdas[a])});
        ComplexVector res = instance::apply_check(x.checks[a], x.dims, psi) - x.lambdas[a] * psi;
        if (res.norm() > 1e-6 * scale) return false;
    }
    return true;
}

}  // namespace ces::twolocal
