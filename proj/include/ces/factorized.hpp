#pragma once

/*
/   Solver for fully factorized instances: every check is a tensor product of
/   one matrix per particle, presented as a table (rows = checks, columns =
/   particles) plus a target value per row.
/
/   Rows split into regular (target != 0) and singular (target == 0). The
/   pipeline is an exact reduction to a canonical two-block table:
/
/     1. simplify_table     restrict columns to the joint images of regular
/                           cells; replace singular cells by image projectors.
/     2. canonicalize       per column, pick one block of the regular column
/                           algebra (a branching choice), split off the part
/                           the regular rows act on, normalize those cells to
/                           involutions, and run them through the Pauli
/                           normal form. Regular rows become signed Pauli
/                           strings with targets +-1; singular rows become a
/                           projector-only table on the leftover factors.
/     3. solve_factorized   sums over all block choices: the chosen central
/                           projectors resolve the identity, so each branch
/                           contributes (stabilizer dimension) x (projector
/                           block dimension) x (freed scalar factors) and the
/                           total is the exact dimension. Positivity is an
/                           existential over branches.
/
/   Every table rewrite is logged so tests can replay the reduction step by
/   step and confirm each move preserves the answer.
*/

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ces/algebra.hpp"
#include "ces/errors.hpp"
#include "ces/instance.hpp"
#include "ces/linalg.hpp"
#include "ces/oracle.hpp"
#include "ces/projectors2.hpp"

namespace ces::factorized {

using ces::Complex;
using ces::ComplexMatrix;
using instance::FactorTable;

// ---------------------------------------------------------------------------
// Signed Pauli strings and stabilizer bookkeeping.
//
// Convention: the Hermitian unit at one site is W(x,z) = i^{xz} X^x Z^z, so
// W(1,1) is the usual Y. A term is sign * (product of W's over sites).

struct PauliTerm {
    std::vector<std::uint8_t> x, z;
    int sign = 1;
};

inline ComplexMatrix pauli_term_matrix(const PauliTerm& t) {
    ComplexMatrix out = ComplexMatrix::Identity(1, 1) * static_cast<double>(t.sign);
    for (std::size_t j = 0; j < t.x.size(); ++j) {
        ComplexMatrix w(2, 2);
        if (t.x[j] && t.z[j]) w << 0, Complex(0, -1), Complex(0, 1), 0;
        else if (t.x[j]) w << 0, 1, 1, 0;
        else if (t.z[j]) w << 1, 0, 0, -1;
        else w << 1, 0, 0, 1;
        out = linalg::tensor(out, w);
    }
    return out;
}

inline bool symplectic_commute(const PauliTerm& a, const PauliTerm& b) {
    int acc = 0;
    for (std::size_t j = 0; j < a.x.size(); ++j)
        acc ^= (a.x[j] & b.z[j]) ^ (a.z[j] & b.x[j]);
    return acc == 0;
}

struct StabilizerGroup {
    long n_qubits = 0;
    std::vector<PauliTerm> generators;
    std::vector<int> targets;  // +-1 per generator
};

namespace detail {

// Phase exponent of W(x1,z1) W(x2,z2) = i^g W(x1^x2, z1^z2) at one site.
inline int site_product_phase(int x1, int z1, int x2, int z2) {
    int g = x1 * z1 + x2 * z2 + 2 * z1 * x2 - ((x1 ^ x2) & 1) * ((z1 ^ z2) & 1);
    return ((g % 4) + 4) % 4;
}

struct PhasedRow {
    std::vector<std::uint8_t> x, z;
    int phase = 0;  // mod 4; the row asserts i^phase * prod W = identity action
};

inline void row_multiply(PhasedRow& h, const PhasedRow& other) {
    int g = h.phase + other.phase;
    for (std::size_t j = 0; j < h.x.size(); ++j) {
        g += site_product_phase(h.x[j], h.z[j], other.x[j], other.z[j]);
        h.x[j] ^= other.x[j];
        h.z[j] ^= other.z[j];
    }
    h.phase = ((g % 4) + 4) % 4;
}

// Rephases a cell to Hermitian form, returning the absorbed phase. A check
// operator that is a Hermitian tensor product always admits this per cell.
inline std::pair<ComplexMatrix, Complex> hermitize_cell(const ComplexMatrix& f) {
    double best = -1.0;
    long pr = 0, pc = 0;
    for (long i = 0; i < f.rows(); ++i)
        for (long j = 0; j < f.cols(); ++j) {
            double w = std::abs(f(i, j)) + std::abs(f(j, i));
            if (w > best) {
                best = w;
                pr = i;
                pc = j;
            }
        }
    if (best < 1e-14) return {f, Complex(1.0, 0.0)};
    if (std::abs(f(pc, pr)) < 1e-12 * std::abs(f(pr, pc)))
        throw InternalInconsistency("cell is not a phase times a Hermitian matrix");
    Complex phase = std::sqrt(f(pr, pc) / std::conj(f(pc, pr)));
    ComplexMatrix h = (Complex(1.0, 0.0) / phase) * f;
    if (linalg::max_abs(h - h.adjoint()) > 1e-7 * std::max(1.0, linalg::max_abs(h)))
        throw InternalInconsistency("cell is not a phase times a Hermitian matrix");
    return {0.5 * (h + ComplexMatrix(h.adjoint())), phase};
}

inline std::optional<double> scalar_of(const ComplexMatrix& f) {
    Complex c = f.trace() / static_cast<double>(f.rows());
    if (linalg::max_abs(f - c * ComplexMatrix::Identity(f.rows(), f.cols())) >
        1e-8 * std::max(1.0, linalg::max_abs(f)))
        return std::nullopt;
    if (std::abs(c.imag()) > 1e-9 * std::max(1.0, std::abs(c))) return std::nullopt;
    return c.real();
}

}  // namespace detail

// Dimension of the joint eigenspace fixed by every generator at its target
// sign: zero on a sign contradiction, else 2^(qubits - independent rows).
inline long stabilizer_dimension(const StabilizerGroup& s) {
    const long n = s.n_qubits;
    for (std::size_t a = 0; a < s.generators.size(); ++a)
        for (std::size_t b = a + 1; b < s.generators.size(); ++b)
            if (!symplectic_commute(s.generators[a], s.generators[b]))
                throw NonCommutingGenerators("generators " + std::to_string(a) + " and " +
                                             std::to_string(b));

    std::vector<detail::PhasedRow> rows;
    for (std::size_t a = 0; a < s.generators.size(); ++a) {
        detail::PhasedRow r;
        r.x = s.generators[a].x;
        r.z = s.generators[a].z;
        // sign * P psi = target psi  <=>  (sign*target) P psi = psi.
        r.phase = (s.generators[a].sign * s.targets[a] == 1) ? 0 : 2;
        rows.push_back(std::move(r));
    }

    long rank = 0;
    for (long col = 0; col < 2 * n; ++col) {
        auto bit = [&](const detail::PhasedRow& r) {
            return col < n ? r.x[col] : r.z[col - n];
        };
        std::size_t pivot = rows.size();
        for (std::size_t a = rank; a < rows.size(); ++a)
            if (bit(rows[a])) {
                pivot = a;
                break;
            }
        if (pivot == rows.size()) continue;
        std::swap(rows[rank], rows[pivot]);
        for (std::size_t a = 0; a < rows.size(); ++a)
            if (a != static_cast<std::size_t>(rank) && bit(rows[a]))
                detail::row_multiply(rows[a], rows[rank]);
        ++rank;
    }
    for (std::size_t a = rank; a < rows.size(); ++a) {
        if (rows[a].phase == 2) return 0;  // the dependency demands -I = I
        if (rows[a].phase != 0)
            throw InternalInconsistency("stabilizer elimination produced an odd phase");
    }
    return 1L << (n - rank);
}

// ---------------------------------------------------------------------------
// Pauli normal form for a family of +-commuting Hermitian involutions that
// generates the full matrix algebra of its space.

struct PauliFrame {
    ComplexMatrix u;  // G_a = u * (sign_a * string_a) * u^dag
    std::vector<PauliTerm> strings;
    long n_qubits = 0;
};

namespace detail {

inline ComplexMatrix pauli_unit(int x, int z) {
    ComplexMatrix w(2, 2);
    if (x && z) w << 0, Complex(0, -1), Complex(0, 1), 0;
    else if (x) w << 0, 1, 1, 0;
    else if (z) w << 1, 0, 0, -1;
    else w << 1, 0, 0, 1;
    return w;
}

// (1/2) tr_1((p (x) I) m) for a 2x2 Hermitian unit p: recovers G from
// m = p (x) G.
inline ComplexMatrix contract_leading_qubit(const ComplexMatrix& m, const ComplexMatrix& p) {
    const long half = m.rows() / 2;
    ComplexMatrix out = ComplexMatrix::Zero(half, half);
    for (int s = 0; s < 2; ++s)
        for (int t = 0; t < 2; ++t) {
            if (p(t, s) == 0.0) continue;
            out += 0.5 * p(t, s) * m.block(s * half, t * half, half, half);
        }
    return out;
}

}  // namespace detail

inline PauliFrame pauli_normal_form(const std::vector<ComplexMatrix>& g,
                                    const ToleranceContext& tol) {
    if (g.empty()) throw ShapeMismatch("pauli_normal_form: empty family");
    const long d = g[0].rows();
    for (std::size_t a = 0; a < g.size(); ++a) {
        if (linalg::max_abs(g[a] - g[a].adjoint()) > tol.herm_eps)
            throw NotInvolution("operator " + std::to_string(a) + " is not Hermitian");
        if (linalg::max_abs(g[a] * g[a] - ComplexMatrix::Identity(d, d)) > 1e-7)
            throw NotInvolution("operator " + std::to_string(a) + " does not square to identity");
    }
    if (static_cast<long>(algebra::generate_algebra(g, tol).size()) != d * d)
        throw NotFullAlgebra("family does not generate the full matrix algebra");

    // Peel one qubit per round. `work` holds the family conjugated into the
    // current frame; v accumulates the rotation so that v g v^dag is peeled.
    std::vector<ComplexMatrix> work = g;
    ComplexMatrix v = ComplexMatrix::Identity(d, d);
    std::vector<std::vector<std::pair<int, int>>> site_bits(g.size());
    long dim = d;
    while (dim > 1) {
        // First anticommuting pair in row order.
        std::size_t ia = g.size(), ib = g.size();
        for (std::size_t a = 0; a < work.size() && ia == g.size(); ++a)
            for (std::size_t b = a + 1; b < work.size(); ++b)
                if (linalg::max_abs(work[a] * work[b] + work[b] * work[a]) < 1e-7) {
                    ia = a;
                    ib = b;
                    break;
                }
        if (ia == g.size())
            throw NotFullAlgebra("no anticommuting pair remains on a nontrivial space");

        // Frame sending the pair to Z (x) I and X (x) I: rows are the +1
        // eigenbasis of work[ia] followed by its image under work[ib].
        auto eig = linalg::hermitian_eigendecomposition(work[ia], tol);
        const long half = dim / 2;
        long plus_count = 0;
        for (long i = 0; i < dim; ++i)
            if (eig.eigenvalues(i) > 0) ++plus_count;
        if (plus_count != half)
            throw InternalInconsistency("anticommuting involution has unbalanced eigenspaces");
        ComplexMatrix vp(dim, half);
        long c = 0;
        for (long i = 0; i < dim; ++i)
            if (eig.eigenvalues(i) > 0) vp.col(c++) = eig.vectors.col(i);
        ComplexMatrix vm = work[ib] * vp;
        ComplexMatrix level(dim, dim);
        level.topRows(half) = vp.adjoint();
        level.bottomRows(half) = vm.adjoint();

        ComplexMatrix zi = linalg::tensor(detail::pauli_unit(0, 1),
                                          ComplexMatrix::Identity(half, half));
        ComplexMatrix xi = linalg::tensor(detail::pauli_unit(1, 0),
                                          ComplexMatrix::Identity(half, half));
        std::vector<ComplexMatrix> next(work.size());
        for (std::size_t a = 0; a < work.size(); ++a) {
            ComplexMatrix m = level * work[a] * level.adjoint();
            // Commutation signs against the new Z (x) I and X (x) I select
            // the leading Pauli uniquely.
            bool anti_z = linalg::max_abs(m * zi + zi * m) < linalg::max_abs(m * zi - zi * m);
            bool anti_x = linalg::max_abs(m * xi + xi * m) < linalg::max_abs(m * xi - xi * m);
            int bx = anti_z ? 1 : 0;
            int bz = anti_x ? 1 : 0;
            ComplexMatrix p = detail::pauli_unit(bx, bz);
            ComplexMatrix tail = detail::contract_leading_qubit(m, p);
            if (linalg::max_abs(m - linalg::tensor(p, tail)) > 1e-6)
                throw InternalInconsistency("family member failed the qubit peel audit");
            site_bits[a].push_back({bx, bz});
            next[a] = std::move(tail);
        }
        v = linalg::tensor(ComplexMatrix::Identity(d / dim, d / dim), level) * v;
        work = std::move(next);
        dim = half;
    }

    PauliFrame out;
    out.n_qubits = site_bits.empty() ? 0 : static_cast<long>(site_bits[0].size());
    out.u = v.adjoint();
    for (std::size_t a = 0; a < g.size(); ++a) {
        PauliTerm t;
        for (auto [bx, bz] : site_bits[a]) {
            t.x.push_back(static_cast<std::uint8_t>(bx));
            t.z.push_back(static_cast<std::uint8_t>(bz));
        }
        double scalar = work[a](0, 0).real();
        if (std::abs(std::abs(scalar) - 1.0) > 1e-6 || std::abs(work[a](0, 0).imag()) > 1e-6)
            throw InternalInconsistency("peeled scalar is not a sign");
        t.sign = scalar > 0 ? 1 : -1;
        out.strings.push_back(std::move(t));
    }
    for (std::size_t a = 0; a < g.size(); ++a) {
        ComplexMatrix rebuilt = out.u * pauli_term_matrix(out.strings[a]) * out.u.adjoint();
        if (linalg::max_abs(rebuilt - g[a]) > 1e-8)
            throw InternalInconsistency("Pauli frame failed its reconstruction audit");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Table transformations, logged for replay.

enum class TransformKind {
    RestrictColumn,   // (i)  conjugate a column by an isometry onto a block
    SplitColumn,      // (ii) split a column whose cells all factorize
    DeleteColumn,     // (iii) drop a column of scalar cells, rescaling targets
    RotateColumn,     // (iv) conjugate a column by a unitary
    RescaleCell,      // (v)  scale one cell and its row target
    ReorderColumns,   // (vi) permute columns
};

struct Transform {
    TransformKind kind;
    int column = -1;
    int row = -1;
    ComplexMatrix matrix;        // RestrictColumn / RotateColumn
    long front_dim = 0;          // SplitColumn
    std::vector<double> scales;  // DeleteColumn (per row) / RescaleCell (single)
    std::vector<int> order;      // ReorderColumns
};

namespace detail {

// Deterministic tensor split of a Hermitian cell known to factor as A (x) B.
// Both returned parts are Hermitian; the back part takes a nonnegative trace
// when the trace decides the shared sign. Throws when the cell does not
// actually factorize.
inline std::pair<ComplexMatrix, ComplexMatrix> split_product_cell(const ComplexMatrix& m,
                                                                  long front, long back) {
    long pr = 0, pc = 0;
    double best = -1.0;
    for (long i = 0; i < m.rows(); ++i)
        for (long j = 0; j < m.cols(); ++j)
            if (std::abs(m(i, j)) > best) {
                best = std::abs(m(i, j));
                pr = i;
                pc = j;
            }
    if (best < 1e-12) return {ComplexMatrix::Zero(front, front), ComplexMatrix::Zero(back, back)};
    long ar = pr / back, br = pr % back, ac = pc / back, bc = pc % back;
    ComplexMatrix a_raw(front, front), b_raw(back, back);
    for (long i = 0; i < front; ++i)
        for (long j = 0; j < front; ++j) a_raw(i, j) = m(i * back + br, j * back + bc);
    for (long i = 0; i < back; ++i)
        for (long j = 0; j < back; ++j) b_raw(i, j) = m(ar * back + i, ac * back + j);
    // m = a_raw (x) b_raw / m(pr, pc). Push the surplus phase into the front
    // part so both factors come out Hermitian.
    auto [b, phase] = hermitize_cell(b_raw);
    if (b.trace().real() < -1e-12) {
        b = -b;
        phase = -phase;
    }
    ComplexMatrix a = (phase / m(pr, pc)) * a_raw;
    if (linalg::max_abs(m - linalg::tensor(a, b)) > 1e-6 * std::max(1.0, linalg::max_abs(m)))
        throw InternalInconsistency("cell marked for a column split does not factorize");
    return {0.5 * (a + ComplexMatrix(a.adjoint())), b};
}

}  // namespace detail

// Replays one logged transformation on a working table. free_factor
// accumulates dimensions removed by DeleteColumn (those tensor factors are
// unconstrained, so they multiply the final dimension).
inline void apply_transform(FactorTable& t, const Transform& tr, long* free_factor = nullptr) {
    switch (tr.kind) {
        case TransformKind::RestrictColumn:
        case TransformKind::RotateColumn: {
            for (auto& row : t.cells)
                row[tr.column] = tr.matrix.adjoint() * row[tr.column] * tr.matrix;
            t.dims[tr.column] = static_cast<int>(tr.matrix.cols());
            break;
        }
        case TransformKind::SplitColumn: {
            long front = tr.front_dim;
            long back = t.dims[tr.column] / front;
            for (auto& row : t.cells) {
                auto [a, b] = detail::split_product_cell(row[tr.column], front, back);
                row[tr.column] = a;
                row.insert(row.begin() + tr.column + 1, b);
            }
            t.dims[tr.column] = static_cast<int>(front);
            t.dims.insert(t.dims.begin() + tr.column + 1, static_cast<int>(back));
            break;
        }
        case TransformKind::DeleteColumn: {
            for (std::size_t a = 0; a < t.cells.size(); ++a) {
                t.lambdas[a] /= tr.scales[a];
                t.cells[a].erase(t.cells[a].begin() + tr.column);
            }
            if (free_factor) *free_factor *= t.dims[tr.column];
            t.dims.erase(t.dims.begin() + tr.column);
            break;
        }
        case TransformKind::RescaleCell: {
            t.cells[tr.row][tr.column] *= tr.scales[0];
            t.lambdas[tr.row] *= tr.scales[0];
            break;
        }
        case TransformKind::ReorderColumns: {
            std::vector<int> nd;
            for (int old : tr.order) nd.push_back(t.dims[old]);
            t.dims = nd;
            for (auto& row : t.cells) {
                std::vector<ComplexMatrix> nr;
                for (int old : tr.order) nr.push_back(row[old]);
                row = nr;
            }
            break;
        }
    }
}

// ---------------------------------------------------------------------------
// Simplification

struct SimplifyOutcome {
    bool negative = false;
    std::string reason;
    FactorTable table;
};

// Restricts every column to the joint image of its regular cells, replaces
// singular-row cells by their image projectors, and prunes void rows. On a
// valid instance the result has invertible Hermitian cells in regular rows
// and projector cells in singular rows, with regular and singular cells
// commuting per column.
inline SimplifyOutcome simplify_table(const FactorTable& t_in, const ToleranceContext& tol) {
    SimplifyOutcome out;
    out.table = t_in;
    FactorTable& t = out.table;
    auto negative = [&](const std::string& why) {
        out.negative = true;
        out.reason = why;
        return out;
    };

    // Hermitize cells once; the absorbed row phase must be a sign.
    for (int a = 0; a < t.rows(); ++a) {
        Complex phase = 1.0;
        for (int j = 0; j < t.cols(); ++j) {
            auto [h, p] = detail::hermitize_cell(t.cells[a][j]);
            t.cells[a][j] = h;
            phase *= p;
        }
        if (std::abs(phase.imag()) > 1e-7 || std::abs(std::abs(phase.real()) - 1.0) > 1e-7)
            throw InternalInconsistency("row phase folded to a non-sign value");
        t.lambdas[a] *= phase.real() > 0 ? 1.0 : -1.0;
    }

    for (bool changed = true; changed;) {
        changed = false;

        // Singular cells become projectors onto their images first: the row
        // kernel only depends on cell supports, and positive cells make the
        // column compression below exact for singular rows too.
        for (int a = 0; a < t.rows(); ++a) {
            if (t.lambdas[a] != 0.0) continue;
            for (int j = 0; j < t.cols(); ++j) {
                const ComplexMatrix& c = t.cells[a][j];
                ComplexMatrix img = linalg::image_basis(c, tol, tol.eq_eps);
                ComplexMatrix proj = img.cols() == 0
                                         ? ComplexMatrix::Zero(c.rows(), c.cols())
                                         : linalg::projector_onto(img);
                if (linalg::max_abs(proj - c) > 1e-9 * std::max(1.0, linalg::max_abs(c))) {
                    t.cells[a][j] = proj;
                    changed = true;
                }
            }
        }

        // Void and impossible rows.
        for (int a = 0; a < t.rows();) {
            bool regular = t.lambdas[a] != 0.0;
            bool has_zero_cell = false;
            bool all_scalar = true;
            double scalar = 1.0;
            for (int j = 0; j < t.cols(); ++j) {
                if (linalg::max_abs(t.cells[a][j]) < 1e-12) has_zero_cell = true;
                auto s = detail::scalar_of(t.cells[a][j]);
                if (!s) all_scalar = false;
                else scalar *= *s;
            }
            if (has_zero_cell) {
                if (regular) return negative("a regular row has a zero factor");
                t.cells.erase(t.cells.begin() + a);  // 0 psi = 0 always holds
                t.lambdas.erase(t.lambdas.begin() + a);
                changed = true;
                continue;
            }
            if (all_scalar) {
                if (std::abs(scalar - t.lambdas[a]) > 1e-7 * std::max(1.0, std::abs(scalar)))
                    return negative("a scalar row misses its target");
                t.cells.erase(t.cells.begin() + a);
                t.lambdas.erase(t.lambdas.begin() + a);
                changed = true;
                continue;
            }
            ++a;
        }

        // Two regular rows whose product vanishes admit no joint eigenstate
        // with nonzero targets.
        for (int a = 0; a < t.rows(); ++a) {
            if (t.lambdas[a] == 0.0) continue;
            for (int b = a + 1; b < t.rows(); ++b) {
                if (t.lambdas[b] == 0.0) continue;
                for (int j = 0; j < t.cols(); ++j)
                    if (linalg::max_abs(t.cells[a][j] * t.cells[b][j]) <
                        1e-10 * std::max(1.0, linalg::max_abs(t.cells[a][j]) *
                                                  linalg::max_abs(t.cells[b][j])))
                        return negative("two regular rows multiply to zero");
            }
        }

        // Joint image restriction per column over the regular rows.
        for (int j = 0; j < t.cols(); ++j) {
            ComplexMatrix basis = ComplexMatrix::Identity(t.dims[j], t.dims[j]);
            for (int a = 0; a < t.rows(); ++a) {
                if (t.lambdas[a] == 0.0) continue;
                ComplexMatrix img = linalg::image_basis(t.cells[a][j], tol, tol.eq_eps);
                ComplexMatrix proj = img.cols() == 0
                                         ? ComplexMatrix::Zero(t.dims[j], t.dims[j])
                                         : linalg::projector_onto(img);
                basis = linalg::restrict_to_kernel(basis, basis - proj * basis, tol, tol.eq_eps);
                if (basis.cols() == 0) break;
            }
            if (basis.cols() == 0) return negative("regular images share no direction in a column");
            if (basis.cols() < t.dims[j]) {
                for (int a = 0; a < t.rows(); ++a)
                    t.cells[a][j] = basis.adjoint() * t.cells[a][j] * basis;
                t.dims[j] = static_cast<int>(basis.cols());
                changed = true;
            }
        }
    }

    // Regular and singular cells must commute per column now; a violation
    // means the input rows did not commute in the first place.
    for (int a = 0; a < t.rows(); ++a) {
        if (t.lambdas[a] == 0.0) continue;
        for (int b = 0; b < t.rows(); ++b) {
            if (t.lambdas[b] != 0.0) continue;
            for (int j = 0; j < t.cols(); ++j)
                if (linalg::max_abs(linalg::commutator(t.cells[a][j], t.cells[b][j])) >
                    1e-6 * std::max(1.0, linalg::max_abs(t.cells[a][j]) *
                                             linalg::max_abs(t.cells[b][j])))
                    throw InternalInconsistency(
                        "regular and singular cells fail to commute after simplification");
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Canonicalization

struct CanonicalForm {
    StabilizerGroup qubit_block;
    FactorTable projector_block;
    std::vector<Transform> transform_log;
    long free_dimension_factor = 1;
};

struct CanonicalOutcome {
    bool negative = false;
    std::string reason;
    CanonicalForm form;
};

namespace detail {

// Block decompositions of every column's regular-cell algebra. Columns with
// no regular action report a single trivial choice.
inline std::vector<algebra::BlockStructure> column_blocks(const FactorTable& t,
                                                          const ToleranceContext& tol) {
    std::vector<algebra::BlockStructure> out;
    for (int j = 0; j < t.cols(); ++j) {
        std::vector<ComplexMatrix> gens;
        for (int a = 0; a < t.rows(); ++a)
            if (t.lambdas[a] != 0.0) gens.push_back(t.cells[a][j]);
        if (gens.empty()) {
            algebra::BlockStructure bs;
            algebra::AlgebraBlock blk;
            blk.isometry = ComplexMatrix::Identity(t.dims[j], t.dims[j]);
            blk.d1 = 1;
            blk.d2 = t.dims[j];
            bs.blocks.push_back(std::move(blk));
            out.push_back(std::move(bs));
        } else {
            out.push_back(algebra::block_decompose(gens, tol));
        }
    }
    return out;
}

inline bool is_identity(const ComplexMatrix& m, double eps = 1e-8) {
    return linalg::max_abs(m - ComplexMatrix::Identity(m.rows(), m.cols())) <= eps;
}

}  // namespace detail

// Reduces a simplified table to the canonical split, following one explicit
// block choice per column. A branch is empty (negative) when a target fails
// to land on +-1 after involution scaling, or a singular row degenerates to
// the identity.
inline CanonicalOutcome canonicalize_branch(const FactorTable& t_in,
                                            const std::vector<algebra::BlockStructure>& blocks,
                                            const std::vector<int>& choice,
                                            const ToleranceContext& tol) {
    CanonicalOutcome out;
    FactorTable t = t_in;
    auto& log = out.form.transform_log;
    auto negative = [&](const std::string& why) {
        out.negative = true;
        out.reason = why;
        return out;
    };
    std::vector<int> regular_rows, singular_rows;
    for (int a = 0; a < t.rows(); ++a)
        (t.lambdas[a] != 0.0 ? regular_rows : singular_rows).push_back(a);

    // A block restriction can send a singular row's projector cell to zero;
    // the row then holds trivially on this branch and drops out.
    std::vector<bool> row_void(t.cells.size(), false);

    // Per original column: restrict to the chosen block, rotate into the
    // tensor frame, and separate the regular factor from the singular one.
    std::vector<int> col_kind;  // 0 = regular action, 1 = singular / free
    int col = 0;
    for (int j = 0; j < static_cast<int>(blocks.size()); ++j) {
        const algebra::AlgebraBlock& blk = blocks[j].blocks[choice[j]];
        const long d1 = blk.d1, d2 = blk.d2;

        if (blk.isometry.cols() < t.dims[col] || d1 > 1) {
            // Orthonormal basis of the block subspace first, then the
            // in-block rotation: one logged isometry plus one unitary.
            ComplexMatrix rot;
            if (blk.isometry.cols() < t.dims[col]) {
                Eigen::HouseholderQR<ComplexMatrix> qr(blk.isometry);
                ComplexMatrix q = qr.householderQ() * ComplexMatrix::Identity(
                                      blk.isometry.rows(), blk.isometry.cols());
                rot = q.adjoint() * blk.isometry;
                Transform tr;
                tr.kind = TransformKind::RestrictColumn;
                tr.column = col;
                tr.matrix = q;
                apply_transform(t, tr);
                log.push_back(std::move(tr));
            } else {
                rot = blk.isometry;  // already square, fold into one rotation
            }
            Transform tr;
            tr.kind = TransformKind::RotateColumn;
            tr.column = col;
            tr.matrix = rot;
            apply_transform(t, tr);
            log.push_back(std::move(tr));
        }
        for (int a : singular_rows)
            if (!row_void[a] && t.cells[a][col].trace().real() < 0.5) row_void[a] = true;

        // Cells now factor as (regular action on C^d1) (x) I and
        // I (x) (singular action on C^d2).
        if (d1 > 1 && d2 > 1) {
            {
                Transform tr;
                tr.kind = TransformKind::SplitColumn;
                tr.column = col;
                tr.front_dim = d1;
                apply_transform(t, tr);
                log.push_back(std::move(tr));
            }
            // The split may leave a scalar residue on the back column
            // (regular rows see s * I there); normalize it away.
            for (int a = 0; a < t.rows(); ++a) {
                if (row_void[a]) continue;
                auto s = detail::scalar_of(t.cells[a][col + 1]);
                if (s && std::abs(*s) > 1e-10 && std::abs(*s - 1.0) > 1e-10) {
                    Transform tr;
                    tr.kind = TransformKind::RescaleCell;
                    tr.column = col + 1;
                    tr.row = a;
                    tr.scales = {1.0 / *s};
                    apply_transform(t, tr);
                    log.push_back(std::move(tr));
                }
            }
            col_kind.push_back(0);
            col_kind.push_back(1);
            col += 2;
        } else if (d1 > 1) {
            col_kind.push_back(0);
            col += 1;
        } else {
            // No regular action survives: scalar regular cells fold away.
            for (int a : regular_rows) {
                auto s = detail::scalar_of(t.cells[a][col]);
                if (!s || std::abs(*s) < 1e-10)
                    throw InternalInconsistency("regular cell in a trivial block is not a scalar");
                if (std::abs(*s - 1.0) > 1e-10) {
                    Transform tr;
                    tr.kind = TransformKind::RescaleCell;
                    tr.column = col;
                    tr.row = a;
                    tr.scales = {1.0 / *s};
                    apply_transform(t, tr);
                    log.push_back(std::move(tr));
                }
            }
            col_kind.push_back(1);
            col += 1;
        }
    }

    // Normalize regular cells to involutions: their squares commute with a
    // full column algebra, hence are positive scalars.
    for (int j = 0; j < t.cols(); ++j) {
        if (col_kind[j] != 0) continue;
        for (int a : regular_rows) {
            ComplexMatrix sq = t.cells[a][j] * t.cells[a][j];
            auto c = detail::scalar_of(sq);
            if (!c || *c <= 0.0)
                throw InternalInconsistency("regular cell square is not a positive scalar");
            double r = 1.0 / std::sqrt(*c);
            if (std::abs(r - 1.0) > 1e-10) {
                Transform tr;
                tr.kind = TransformKind::RescaleCell;
                tr.column = j;
                tr.row = a;
                tr.scales = {r};
                apply_transform(t, tr);
                log.push_back(std::move(tr));
            }
        }
    }
    for (int a : regular_rows)
        if (std::abs(std::abs(t.lambdas[a]) - 1.0) > 1e-6)
            return negative("a rescaled regular target is not +-1");

    // Delete columns every live row treats as identity; each removal frees
    // an unconstrained tensor factor. A void row only blocks deletion when
    // its lone zero cell sits on this very column.
    for (int j = 0; j < t.cols();) {
        bool deletable = true;
        for (int a = 0; a < t.rows() && deletable; ++a) {
            if (!row_void[a]) {
                deletable = detail::is_identity(t.cells[a][j]);
                continue;
            }
            bool zero_elsewhere = false;
            for (int k = 0; k < t.cols() && !zero_elsewhere; ++k)
                zero_elsewhere = k != j && linalg::max_abs(t.cells[a][k]) < 1e-10;
            deletable = zero_elsewhere;
        }
        if (deletable) {
            Transform tr;
            tr.kind = TransformKind::DeleteColumn;
            tr.column = j;
            tr.scales.assign(t.rows(), 1.0);
            apply_transform(t, tr, &out.form.free_dimension_factor);
            log.push_back(std::move(tr));
            col_kind.erase(col_kind.begin() + j);
        } else {
            ++j;
        }
    }

    // Pauli normal form per remaining regular column, then split into qubit
    // columns.
    StabilizerGroup& sg = out.form.qubit_block;
    std::vector<std::vector<PauliTerm>> row_strings(regular_rows.size());
    for (int j = 0; j < t.cols();) {
        if (col_kind[j] != 0) {
            ++j;
            continue;
        }
        std::vector<ComplexMatrix> fam;
        for (int a : regular_rows) fam.push_back(t.cells[a][j]);
        PauliFrame frame = pauli_normal_form(fam, tol);
        {
            Transform tr;
            tr.kind = TransformKind::RotateColumn;
            tr.column = j;
            tr.matrix = frame.u;
            apply_transform(t, tr);
            log.push_back(std::move(tr));
        }
        for (long split = 0; split + 1 < frame.n_qubits; ++split) {
            Transform tr;
            tr.kind = TransformKind::SplitColumn;
            tr.column = j + static_cast<int>(split);
            tr.front_dim = 2;
            apply_transform(t, tr);
            log.push_back(std::move(tr));
            col_kind.insert(col_kind.begin() + j, 0);
        }
        for (std::size_t ri = 0; ri < regular_rows.size(); ++ri)
            row_strings[ri].push_back(frame.strings[ri]);
        j += static_cast<int>(frame.n_qubits);
    }

    // Assemble the stabilizer block.
    long n_qubits = 0;
    for (const auto& parts : row_strings) {
        long total = 0;
        for (const auto& p : parts) total += static_cast<long>(p.x.size());
        n_qubits = total;
        break;
    }
    sg.n_qubits = n_qubits;
    for (std::size_t ri = 0; ri < regular_rows.size(); ++ri) {
        PauliTerm full;
        full.sign = 1;
        for (const auto& p : row_strings[ri]) {
            full.x.insert(full.x.end(), p.x.begin(), p.x.end());
            full.z.insert(full.z.end(), p.z.begin(), p.z.end());
            full.sign *= p.sign;
        }
        sg.generators.push_back(std::move(full));
        sg.targets.push_back(t.lambdas[regular_rows[ri]] > 0 ? 1 : -1);
    }

    // Move singular columns behind the qubit columns; the singular rows on
    // them form the projector block.
    std::vector<int> order;
    for (int j = 0; j < t.cols(); ++j)
        if (col_kind[j] == 0) order.push_back(j);
    int first_singular = static_cast<int>(order.size());
    for (int j = 0; j < t.cols(); ++j)
        if (col_kind[j] == 1) order.push_back(j);
    bool already_sorted = true;
    for (std::size_t i = 0; i < order.size(); ++i)
        already_sorted = already_sorted && order[i] == static_cast<int>(i);
    if (!already_sorted) {
        Transform tr;
        tr.kind = TransformKind::ReorderColumns;
        tr.order = order;
        apply_transform(t, tr);
        log.push_back(std::move(tr));
    }

    FactorTable& pb = out.form.projector_block;
    pb.dims.assign(t.dims.begin() + first_singular, t.dims.end());
    for (int a : singular_rows) {
        if (row_void[a]) continue;
        for (int j = 0; j < first_singular; ++j)
            if (!detail::is_identity(t.cells[a][j], 1e-7))
                throw InternalInconsistency("singular row leaks onto a qubit column");
        std::vector<ComplexMatrix> row(t.cells[a].begin() + first_singular, t.cells[a].end());
        bool all_id = true;
        for (const auto& cmat : row) all_id = all_id && detail::is_identity(cmat, 1e-7);
        if (row.empty() || all_id) return negative("a singular row reduced to the identity");
        pb.cells.push_back(std::move(row));
        pb.lambdas.push_back(0.0);
    }
    for (int a : regular_rows)
        for (int j = first_singular; j < t.cols(); ++j)
            if (!detail::is_identity(t.cells[a][j], 1e-7))
                throw InternalInconsistency("regular row leaks onto a projector column");
    return out;
}

// Entry point matching the certificate narrative: with hints, canonicalize
// exactly that branch; without, search branches in order and return the
// first that is not outright empty.
inline CanonicalOutcome canonicalize(const FactorTable& t, const ToleranceContext& tol,
                                     const std::optional<std::vector<int>>& hints = std::nullopt) {
    auto blocks = detail::column_blocks(t, tol);
    std::vector<int> counts;
    for (const auto& bs : blocks) counts.push_back(static_cast<int>(bs.blocks.size()));
    if (hints) {
        if (hints->size() != blocks.size())
            throw ShapeMismatch("canonicalize: hint count does not match column count");
        for (std::size_t j = 0; j < counts.size(); ++j)
            if ((*hints)[j] < 0 || (*hints)[j] >= counts[j])
                throw ShapeMismatch("canonicalize: hint out of range for column " +
                                    std::to_string(j));
        return canonicalize_branch(t, blocks, *hints, tol);
    }
    std::vector<int> choice(blocks.size(), 0);
    CanonicalOutcome last;
    for (bool more = true; more;) {
        last = canonicalize_branch(t, blocks, choice, tol);
        if (!last.negative) return last;
        more = false;
        for (int j = static_cast<int>(choice.size()) - 1; j >= 0; --j) {
            if (++choice[j] < counts[j]) {
                more = true;
                break;
            }
            choice[j] = 0;
        }
    }
    return last;
}

// ---------------------------------------------------------------------------
// Full solve

enum class Outcome { Positive, Negative, Inconclusive };

struct FactorizedResult {
    Outcome outcome = Outcome::Inconclusive;
    long dimension = -1;      // exact when >= 0
    CanonicalForm canonical;  // first positive branch, or last branch examined
    std::vector<int> branch;
    std::string note;
    // When the first positive branch leaves an all-qubit projector block,
    // the annihilating string found for it.
    std::optional<projectors2::ProjectorTableWitness> qubit_witness;
};

inline constexpr long kBranchCap = 4096;

namespace detail {

// Dimension of the common kernel of a projector-row table: the alternating
// subset-rank sum when the row count allows it, the dense reference engine
// otherwise.
inline long projector_block_dimension(const FactorTable& pb, const ToleranceContext& tol) {
    if (pb.rows() == 0) {
        long d = 1;
        for (int dim : pb.dims) d *= dim;
        return d;
    }
    if (pb.rows() <= oracle::kMaxSubsetRows) return oracle::inclusion_exclusion_dim(pb, tol);
    return oracle::common_eigenspace(instance::to_instance(pb), tol).dimension;
}

}  // namespace detail

inline FactorizedResult solve_factorized(const FactorTable& t, const ToleranceContext& tol) {
    FactorizedResult res;
    SimplifyOutcome simp = simplify_table(t, tol);
    if (simp.negative) {
        res.outcome = Outcome::Negative;
        res.dimension = 0;
        res.note = simp.reason;
        return res;
    }
    if (simp.table.rows() == 0) {
        res.outcome = Outcome::Positive;
        res.dimension = 1;
        for (int d : simp.table.dims) res.dimension *= d;
        res.note = "all rows were void";
        return res;
    }

    auto blocks = detail::column_blocks(simp.table, tol);
    long branch_count = 1;
    std::vector<int> counts;
    for (const auto& bs : blocks) {
        counts.push_back(static_cast<int>(bs.blocks.size()));
        branch_count *= counts.back();
        if (branch_count > kBranchCap) {
            res.outcome = Outcome::Inconclusive;
            res.note = "block choice count exceeds the branch cap";
            return res;
        }
    }

    // Branch dimensions add up: the chosen central projectors commute and
    // resolve the identity, so the solution space is the direct sum over all
    // block assignments.
    long total = 0;
    bool found_positive = false;
    std::vector<int> choice(blocks.size(), 0);
    for (bool more = true; more;) {
        CanonicalOutcome c = canonicalize_branch(simp.table, blocks, choice, tol);
        long branch_dim = 0;
        std::optional<projectors2::ProjectorTableWitness> qwit;
        if (!c.negative) {
            long sdim = stabilizer_dimension(c.form.qubit_block);
            if (sdim > 0) {
                const FactorTable& pb = c.form.projector_block;
                long pdim = detail::projector_block_dimension(pb, tol);
                bool all_qubit = pb.rows() > 0;
                for (int d : pb.dims) all_qubit = all_qubit && d == 2;
                if (all_qubit) {
                    // Independent second route over the same block; the two
                    // must agree on emptiness.
                    auto q = projectors2::solve_projectors_qubits(pb, tol);
                    if (q.positive != (pdim > 0))
                        throw InternalInconsistency(
                            "string search and rank count disagree on a projector block");
                    qwit = std::move(q.witness);
                }
                branch_dim = sdim * c.form.free_dimension_factor * pdim;
            }
        }
        total += branch_dim;
        if (branch_dim > 0 && !found_positive) {
            found_positive = true;
            res.canonical = std::move(c.form);
            res.branch = choice;
            res.qubit_witness = std::move(qwit);
        }
        more = false;
        for (int j = static_cast<int>(choice.size()) - 1; j >= 0; --j) {
            if (++choice[j] < counts[j]) {
                more = true;
                break;
            }
            choice[j] = 0;
        }
    }
    res.dimension = total;
    res.outcome = found_positive ? Outcome::Positive : Outcome::Negative;
    if (!found_positive) res.note = "every block choice yields an empty branch";
    return res;
}

}  // namespace ces::factorized
