#pragma once

/*
/   Dense complex linear algebra kernel shared by every solver module.
/
/   Conventions, fixed once here and relied on everywhere:
/     - matrices are column-major std::complex<double> (Eigen::MatrixXcd);
/     - multi-particle indices are big-endian: in tensor(A, B) the A factor
/       is the most significant digit, and basis index i on particle dims
/       (d_1, ..., d_n) decomposes as i = ((x_1 d_2 + x_2) d_3 + ...) + x_n;
/     - rank decisions use a relative singular-value cutoff from
/       ToleranceContext.rank_eps.
*/

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "ces/errors.hpp"
#include "ces/tolerance.hpp"

namespace ces::linalg {

// ---------------------------------------------------------------------------
// Predicates and small helpers

inline double max_abs(const ComplexMatrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

// Scale-aware entrywise equality: tolerance grows with the operand norms so
// the same context works for O(1) projectors and rescaled rows alike.
inline bool approx_equal(const ComplexMatrix& a, const ComplexMatrix& b,
                         const ToleranceContext& tol) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    double scale = std::max(1.0, std::max(max_abs(a), max_abs(b)));
    return max_abs(a - b) <= tol.eq_eps * scale;
}

inline bool is_hermitian(const ComplexMatrix& m, const ToleranceContext& tol) {
    if (m.rows() != m.cols()) return false;
    return max_abs(m - m.adjoint()) <= tol.herm_eps;
}

inline ComplexMatrix dagger(const ComplexMatrix& m) { return m.adjoint(); }

inline ComplexMatrix commutator(const ComplexMatrix& a, const ComplexMatrix& b) {
    return a * b - b * a;
}

// Hilbert-Schmidt inner product <A, B> = tr(A^dag B).
inline Complex hs_inner(const ComplexMatrix& a, const ComplexMatrix& b) {
    return (a.conjugate().cwiseProduct(b)).sum();
}

inline double hs_norm(const ComplexMatrix& a) { return a.norm(); }

inline ComplexVector vec(const ComplexMatrix& m) {
    return Eigen::Map<const ComplexVector>(m.data(), m.size());
}

inline ComplexMatrix unvec(const ComplexVector& v, Eigen::Index rows, Eigen::Index cols) {
    return Eigen::Map<const ComplexMatrix>(v.data(), rows, cols);
}

// ---------------------------------------------------------------------------
// Eigendecomposition

struct Eigensystem {
    RealVector eigenvalues;   // ascending
    ComplexMatrix vectors;    // unitary, columns match eigenvalues
};

inline Eigensystem hermitian_eigendecomposition(const ComplexMatrix& m,
                                                const ToleranceContext& tol) {
    if (m.rows() != m.cols())
        throw ShapeMismatch("hermitian_eigendecomposition: matrix not square");
    if (!is_hermitian(m, tol))
        throw NotHermitian("hermitian_eigendecomposition: matrix not Hermitian within tolerance");
    // Symmetrize before decomposing so the tolerance slack cannot leak into
    // complex eigenvalues.
    ComplexMatrix h = (m + m.adjoint()) / 2.0;
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(h);
    if (solver.info() != Eigen::Success)
        throw InternalInconsistency("hermitian_eigendecomposition: solver failed to converge");
    return {solver.eigenvalues(), solver.eigenvectors()};
}

// ---------------------------------------------------------------------------
// Rank, kernel, image (all through one SVD path)

namespace detail {

// Jacobi is more accurate on tiny matrices; bidiagonal divide and conquer is
// the only realistic option at a few thousand rows.
inline bool use_jacobi(const ComplexMatrix& m) {
    return std::min(m.rows(), m.cols()) <= 64;
}

struct Svd {
    ComplexMatrix u;       // thin
    RealVector sigma;      // descending
    ComplexMatrix v;       // full (needed for kernels)
};

inline Svd svd_full_v(const ComplexMatrix& m) {
    if (use_jacobi(m)) {
        Eigen::JacobiSVD<ComplexMatrix> s(m, Eigen::ComputeThinU | Eigen::ComputeFullV);
        return {s.matrixU(), s.singularValues(), s.matrixV()};
    }
    Eigen::BDCSVD<ComplexMatrix> s(m, Eigen::ComputeThinU | Eigen::ComputeFullV);
    return {s.matrixU(), s.singularValues(), s.matrixV()};
}

// The relative cutoff handles graded spectra; the absolute floor protects
// callers whose matrix may be zero up to noise (a relative cutoff alone would
// then promote the noise to full rank).
inline int rank_from_singulars(const RealVector& sigma, const ToleranceContext& tol,
                               double floor = 0.0) {
    if (sigma.size() == 0) return 0;
    if (sigma(0) == 0.0) return 0;
    double cutoff = std::max(tol.rank_eps * sigma(0), floor);
    int r = 0;
    while (r < sigma.size() && sigma(r) > cutoff) ++r;
    return r;
}

}  // namespace detail

inline int rank(const ComplexMatrix& m, const ToleranceContext& tol, double floor = 0.0) {
    if (m.size() == 0) return 0;
    if (detail::use_jacobi(m)) {
        Eigen::JacobiSVD<ComplexMatrix> s(m);
        return detail::rank_from_singulars(s.singularValues(), tol, floor);
    }
    Eigen::BDCSVD<ComplexMatrix> s(m);
    return detail::rank_from_singulars(s.singularValues(), tol, floor);
}

// Orthonormal basis of { v : M v = 0 }. Columns of an isometry.
inline ComplexMatrix kernel_basis(const ComplexMatrix& m, const ToleranceContext& tol,
                                  double floor = 0.0) {
    if (m.size() == 0) return ComplexMatrix::Identity(m.cols(), m.cols());
    auto s = detail::svd_full_v(m);
    int r = detail::rank_from_singulars(s.sigma, tol, floor);
    return s.v.rightCols(m.cols() - r);
}

// Orthonormal basis of the column space.
inline ComplexMatrix image_basis(const ComplexMatrix& m, const ToleranceContext& tol,
                                 double floor = 0.0) {
    if (m.size() == 0) return ComplexMatrix(m.rows(), 0);
    auto s = detail::svd_full_v(m);
    int r = detail::rank_from_singulars(s.sigma, tol, floor);
    return s.u.leftCols(r);
}

// Orthonormalize columns, dropping near-dependent directions. Identical to
// image_basis but reads better when the argument is already "a basis".
inline ComplexMatrix orthonormalize(const ComplexMatrix& m, const ToleranceContext& tol) {
    return image_basis(m, tol);
}

// Given an orthonormal basis B of a subspace and the constraint values
// A = op(B) (one column per basis vector), return an orthonormal basis of the
// subspace { B c : A c = 0 }. This is the workhorse of iterative common
// eigenspace computation: the subspace shrinks, the ambient never grows.
// zero_floor is an absolute singular-value floor for deciding that a
// constraint already vanishes on the subspace.
inline ComplexMatrix restrict_to_kernel(const ComplexMatrix& basis, const ComplexMatrix& applied,
                                        const ToleranceContext& tol, double zero_floor = 0.0) {
    if (basis.cols() == 0) return basis;
    ComplexMatrix coeffs = kernel_basis(applied, tol, zero_floor);
    if (coeffs.cols() == 0) return ComplexMatrix(basis.rows(), 0);
    // B * coeffs already has orthonormal columns; re-orthonormalize anyway to
    // stop drift from accumulating over long constraint chains.
    return orthonormalize(basis * coeffs, tol);
}

// Projector onto the column space of an isometry.
inline ComplexMatrix projector_onto(const ComplexMatrix& isometry) {
    return isometry * isometry.adjoint();
}

// ---------------------------------------------------------------------------
// Tensor products and index plumbing

inline ComplexMatrix tensor(const ComplexMatrix& a, const ComplexMatrix& b) {
    ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

inline ComplexVector tensor(const ComplexVector& a, const ComplexVector& b) {
    ComplexVector out(a.size() * b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i)
        out.segment(i * b.size(), b.size()) = a(i) * b;
    return out;
}

inline ComplexMatrix tensor_all(const std::vector<ComplexMatrix>& factors) {
    ComplexMatrix out = ComplexMatrix::Identity(1, 1);
    for (const auto& f : factors) out = tensor(out, f);
    return out;
}

inline long total_dim(const std::vector<int>& dims) {
    long d = 1;
    for (int x : dims) d *= x;
    return d;
}

// Big-endian mixed-radix digit extraction: digits[0] is the most significant.
inline std::vector<int> digits_of(long index, const std::vector<int>& dims) {
    std::vector<int> digits(dims.size());
    for (int i = static_cast<int>(dims.size()) - 1; i >= 0; --i) {
        digits[i] = static_cast<int>(index % dims[i]);
        index /= dims[i];
    }
    return digits;
}

inline long index_of(const std::vector<int>& digits, const std::vector<int>& dims) {
    long index = 0;
    for (std::size_t i = 0; i < dims.size(); ++i) index = index * dims[i] + digits[i];
    return index;
}

namespace detail {

// Precomputed offsets splitting a global index into a support part and a
// complement part: global = supp_offsets[a] + comp_offsets[c], where a runs
// over support-major indices and c over the complement.
struct SupportSplit {
    std::vector<long> supp_offsets;
    std::vector<long> comp_offsets;
};

inline SupportSplit support_split(const std::vector<int>& support, const std::vector<int>& dims) {
    const int n = static_cast<int>(dims.size());
    std::vector<long> strides(n);
    long run = 1;
    for (int i = n - 1; i >= 0; --i) {
        strides[i] = run;
        run *= dims[i];
    }
    std::vector<char> on_support(n, 0);
    for (int s : support) on_support[s] = 1;

    std::vector<int> supp_dims;
    for (int s : support) supp_dims.push_back(dims[s]);
    std::vector<int> comp_sites;
    for (int i = 0; i < n; ++i)
        if (!on_support[i]) comp_sites.push_back(i);
    std::vector<int> comp_dims;
    for (int i : comp_sites) comp_dims.push_back(dims[i]);

    SupportSplit split;
    split.supp_offsets.resize(total_dim(supp_dims));
    for (long a = 0; a < static_cast<long>(split.supp_offsets.size()); ++a) {
        auto d = digits_of(a, supp_dims);
        long off = 0;
        for (std::size_t i = 0; i < support.size(); ++i) off += d[i] * strides[support[i]];
        split.supp_offsets[a] = off;
    }
    split.comp_offsets.resize(total_dim(comp_dims));
    for (long c = 0; c < static_cast<long>(split.comp_offsets.size()); ++c) {
        auto d = digits_of(c, comp_dims);
        long off = 0;
        for (std::size_t i = 0; i < comp_sites.size(); ++i) off += d[i] * strides[comp_sites[i]];
        split.comp_offsets[c] = off;
    }
    return split;
}

inline void check_support(const ComplexMatrix& h, const std::vector<int>& support,
                          const std::vector<int>& dims) {
    std::vector<char> seen(dims.size(), 0);
    long m = 1;
    for (int s : support) {
        if (s < 0 || s >= static_cast<int>(dims.size()))
            throw SupportMismatch("support index out of range");
        if (seen[s]) throw SupportMismatch("support indices must be distinct");
        seen[s] = 1;
        m *= dims[s];
    }
    if (h.rows() != h.cols() || h.rows() != m)
        throw SupportMismatch("local operator size does not match support dimensions");
}

}  // namespace detail

// Embed a local operator acting on the listed particles (in the listed order)
// into the full space: h[S] = h on S tensored with identity elsewhere.
inline ComplexMatrix embed_local(const ComplexMatrix& h, const std::vector<int>& support,
                                 const std::vector<int>& dims) {
    detail::check_support(h, support, dims);
    auto split = detail::support_split(support, dims);
    const long m = static_cast<long>(split.supp_offsets.size());
    const long c = static_cast<long>(split.comp_offsets.size());
    ComplexMatrix out = ComplexMatrix::Zero(m * c, m * c);
    for (long a = 0; a < m; ++a)
        for (long b = 0; b < m; ++b) {
            Complex val = h(a, b);
            if (val == Complex(0, 0)) continue;
            for (long k = 0; k < c; ++k)
                out(split.supp_offsets[a] + split.comp_offsets[k],
                    split.supp_offsets[b] + split.comp_offsets[k]) = val;
        }
    return out;
}

// Apply h[S] to every column of B without materializing the embedded matrix.
inline ComplexMatrix apply_local(const ComplexMatrix& h, const std::vector<int>& support,
                                 const std::vector<int>& dims, const ComplexMatrix& b) {
    detail::check_support(h, support, dims);
    auto split = detail::support_split(support, dims);
    const long m = static_cast<long>(split.supp_offsets.size());
    const long c = static_cast<long>(split.comp_offsets.size());
    if (b.rows() != m * c) throw ShapeMismatch("apply_local: basis rows do not match dims");
    ComplexMatrix out(b.rows(), b.cols());
    ComplexVector slot(m);
    for (Eigen::Index col = 0; col < b.cols(); ++col) {
        for (long k = 0; k < c; ++k) {
            for (long a = 0; a < m; ++a) slot(a) = b(split.supp_offsets[a] + split.comp_offsets[k], col);
            ComplexVector mapped = h * slot;
            for (long a = 0; a < m; ++a) out(split.supp_offsets[a] + split.comp_offsets[k], col) = mapped(a);
        }
    }
    return out;
}

// Reorder the tensor axes of an operator. perm[i] names the old axis placed at
// new position i; the result acts on dims reordered accordingly.
inline ComplexMatrix permute_axes(const ComplexMatrix& m, const std::vector<int>& dims,
                                  const std::vector<int>& perm) {
    const long d = total_dim(dims);
    if (m.rows() != d || m.cols() != d) throw ShapeMismatch("permute_axes: size mismatch");
    std::vector<int> new_dims(dims.size());
    for (std::size_t i = 0; i < perm.size(); ++i) new_dims[i] = dims[perm[i]];
    std::vector<long> to_old(d);
    for (long idx = 0; idx < d; ++idx) {
        auto nd = digits_of(idx, new_dims);
        std::vector<int> od(dims.size());
        for (std::size_t i = 0; i < perm.size(); ++i) od[perm[i]] = nd[i];
        to_old[idx] = index_of(od, dims);
    }
    ComplexMatrix out(d, d);
    for (long i = 0; i < d; ++i)
        for (long j = 0; j < d; ++j) out(i, j) = m(to_old[i], to_old[j]);
    return out;
}

inline ComplexVector permute_axes_vec(const ComplexVector& v, const std::vector<int>& dims,
                                      const std::vector<int>& perm) {
    const long d = total_dim(dims);
    if (v.size() != d) throw ShapeMismatch("permute_axes_vec: size mismatch");
    std::vector<int> new_dims(dims.size());
    for (std::size_t i = 0; i < perm.size(); ++i) new_dims[i] = dims[perm[i]];
    ComplexVector out(d);
    for (long idx = 0; idx < d; ++idx) {
        auto nd = digits_of(idx, new_dims);
        std::vector<int> od(dims.size());
        for (std::size_t i = 0; i < perm.size(); ++i) od[perm[i]] = nd[i];
        out(idx) = v(index_of(od, dims));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Operator Schmidt decomposition across a fixed bipartition

// h on C^dl (x) C^dr written as sum_k left[k] (x) right[k] with both families
// linearly independent (orthogonal, in fact: they come out of an SVD).
struct SchmidtDecomposition {
    std::vector<ComplexMatrix> left;    // dl x dl
    std::vector<ComplexMatrix> right;   // dr x dr
};

inline SchmidtDecomposition operator_schmidt(const ComplexMatrix& h, int dl, int dr,
                                             const ToleranceContext& tol) {
    const long d = static_cast<long>(dl) * dr;
    if (h.rows() != d || h.cols() != d) throw ShapeMismatch("operator_schmidt: size mismatch");
    // Realign: R[(i,i'), (j,j')] = h[(i,j), (i',j')], so a product term
    // A (x) B becomes the outer product vec(A) vec(B)^T.
    ComplexMatrix r(static_cast<long>(dl) * dl, static_cast<long>(dr) * dr);
    for (int i = 0; i < dl; ++i)
        for (int ip = 0; ip < dl; ++ip)
            for (int j = 0; j < dr; ++j)
                for (int jp = 0; jp < dr; ++jp)
                    r(static_cast<long>(i) * dl + ip, static_cast<long>(j) * dr + jp) =
                        h(static_cast<long>(i) * dr + j, static_cast<long>(ip) * dr + jp);
    auto s = detail::svd_full_v(r);
    int k = detail::rank_from_singulars(s.sigma, tol);
    SchmidtDecomposition out;
    for (int a = 0; a < k; ++a) {
        double w = std::sqrt(s.sigma(a));
        ComplexMatrix left(dl, dl), right(dr, dr);
        for (int i = 0; i < dl; ++i)
            for (int ip = 0; ip < dl; ++ip) left(i, ip) = w * s.u(static_cast<long>(i) * dl + ip, a);
        for (int j = 0; j < dr; ++j)
            for (int jp = 0; jp < dr; ++jp)
                right(j, jp) = w * std::conj(s.v(static_cast<long>(j) * dr + jp, a));
        out.left.push_back(std::move(left));
        out.right.push_back(std::move(right));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Seeded randomness

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline ComplexMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    ComplexMatrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = Complex(n(rng), n(rng));
    return m;
}

inline ComplexMatrix random_hermitian(Eigen::Index dim, std::mt19937_64& rng) {
    ComplexMatrix g = random_matrix(dim, dim, rng);
    return (g + g.adjoint()) / 2.0;
}

// Haar-distributed unitary: QR of a Ginibre matrix with the R-diagonal phases
// folded back in.
inline ComplexMatrix random_unitary(Eigen::Index dim, std::mt19937_64& rng) {
    ComplexMatrix g = random_matrix(dim, dim, rng);
    Eigen::HouseholderQR<ComplexMatrix> qr(g);
    ComplexMatrix q = qr.householderQ() * ComplexMatrix::Identity(dim, dim);
    ComplexMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < dim; ++i) {
        Complex d = r(i, i);
        double a = std::abs(d);
        q.col(i) *= (a > 0) ? d / a : Complex(1, 0);
    }
    return q;
}

inline ComplexVector basis_state(Eigen::Index dim, Eigen::Index i) {
    ComplexVector v = ComplexVector::Zero(dim);
    v(i) = 1.0;
    return v;
}

}  // namespace ces::linalg
