#ifndef PEARL_EIGENSOLVER_HPP
#define PEARL_EIGENSOLVER_HPP

#include "pearl/core.hpp"
#include "pearl/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

namespace pearl {

struct EigenPairs {
    Vector values;  // descending
    Matrix vectors; // unit columns matching values
};

struct TopEigenOptions {
    /// Matrices up to this size use a dense symmetric eigendecomposition.
    Index dense_threshold = 600;
    /// Ritz residual bound relative to the spectral radius.
    double tolerance = 1e-11;
};

namespace detail {

inline EigenPairs dense_top_eigenpairs(const Matrix& a, Index k)
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(a);
    require(es.info() == Eigen::Success, "symmetric eigendecomposition failed");
    const Index n = a.rows();
    EigenPairs out{Vector(k), Matrix(n, k)};
    for (Index i = 0; i < k; ++i) {
        out.values(i) = es.eigenvalues()(n - 1 - i);
        out.vectors.col(i) = es.eigenvectors().col(n - 1 - i);
    }
    return out;
}

inline void orthogonalize(Vector& w, const Matrix& basis, Index cols)
{
    if (cols == 0)
        return;
    // two passes of classical Gram-Schmidt
    for (int pass = 0; pass < 2; ++pass)
        w.noalias() -= basis.leftCols(cols) * (basis.leftCols(cols).transpose() * w);
}

} // namespace detail

/// Largest-algebraic k eigenpairs of a symmetric matrix.
///
/// Large matrices use Lanczos with full reorthogonalization, doubling the
/// Krylov dimension until every wanted Ritz pair meets the residual bound and
/// falling back to the dense solver once the subspace reaches half the matrix.
/// Start vectors come from a fixed seed, so results are deterministic.
inline EigenPairs top_eigenpairs(const Matrix& a, Index k, const TopEigenOptions& opts = {})
{
    const Index n = a.rows();
    require(a.cols() == n, "top_eigenpairs needs a square matrix");
    require(k >= 1 && k <= n, "requested eigenpair count out of range");
    if (n <= opts.dense_threshold || 4 * k >= n)
        return detail::dense_top_eigenpairs(a, k);

    Rng rng(0x5eed1a2c05ULL);
    auto random_unit = [&](const Matrix& basis, Index cols) {
        Vector v(n);
        for (Index i = 0; i < n; ++i)
            v(i) = rng.normal();
        detail::orthogonalize(v, basis, cols);
        return Vector(v / v.norm());
    };

    Index m = std::min<Index>(n, std::max<Index>(2 * k + 20, 40));
    while (2 * m < n) {
        Matrix basis(n, m);
        Vector alpha = Vector::Zero(m);
        Vector beta = Vector::Zero(m);
        basis.col(0) = random_unit(basis, 0);
        double scale = 0.0;
        for (Index j = 0; j < m; ++j) {
            Vector w = a * basis.col(j);
            alpha(j) = basis.col(j).dot(w);
            detail::orthogonalize(w, basis, j + 1);
            beta(j) = w.norm();
            scale = std::max({scale, std::abs(alpha(j)), beta(j)});
            if (j + 1 < m) {
                if (beta(j) <= 1e-12 * std::max(scale, std::numeric_limits<double>::min())) {
                    // invariant subspace found; restart in its complement
                    beta(j) = 0.0;
                    basis.col(j + 1) = random_unit(basis, j + 1);
                } else {
                    basis.col(j + 1) = w / beta(j);
                }
            }
        }

        Eigen::SelfAdjointEigenSolver<Matrix> tri;
        tri.computeFromTridiagonal(alpha, beta.head(m - 1), Eigen::ComputeEigenvectors);
        require(tri.info() == Eigen::Success, "tridiagonal eigensolve failed");
        const double radius = std::max(tri.eigenvalues().cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());

        bool converged = true;
        for (Index i = 0; i < k; ++i) {
            const double residual = std::abs(beta(m - 1) * tri.eigenvectors()(m - 1, m - 1 - i));
            if (residual > opts.tolerance * radius)
                converged = false;
        }
        if (converged) {
            EigenPairs out{Vector(k), Matrix(n, k)};
            for (Index i = 0; i < k; ++i) {
                out.values(i) = tri.eigenvalues()(m - 1 - i);
                Vector v = basis * tri.eigenvectors().col(m - 1 - i);
                out.vectors.col(i) = v / v.norm();
            }
            return out;
        }
        m = std::min(n, 2 * m);
    }
    return detail::dense_top_eigenpairs(a, k);
}

} // namespace pearl

#endif // PEARL_EIGENSOLVER_HPP
