/**
 * @file linalg.hpp
 * @brief Dense SPD primitives: Cholesky roots, rank-1 downdates, whitening and
 *        generalized symmetric eigenproblems.
 *
 * The lower Cholesky factor is the canonical matrix square root throughout the
 * library. Every covariance entering the library is symmetrized before it is
 * factored.
 */

#ifndef GMSPLIT_LINALG_HPP
#define GMSPLIT_LINALG_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "gmsplit/errors.hpp"

namespace gmsplit {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Relative eigenvalue floor below which a PSD matrix is treated as singular.
inline constexpr double kPsdTolerance = 1e-12;

inline MatrixXd symmetrize(const MatrixXd& m)
{
    return 0.5 * (m + m.transpose());
}

inline double min_eigenvalue(const MatrixXd& m)
{
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

/// True when every eigenvalue is >= -kPsdTolerance * max(trace, 0).
inline bool is_psd(const MatrixXd& m, double rel_tol = kPsdTolerance)
{
    const double scale = std::max(std::abs(m.trace()), std::numeric_limits<double>::min());
    return min_eigenvalue(m) >= -rel_tol * scale;
}

/**
 * @brief Symmetric positive (semi-)definite matrix.
 *
 * Strict instances carry their lower Cholesky factor. Semidefinite instances
 * only arise from downdates that land exactly on the positive-definiteness
 * boundary; they hold no factor and refuse operations that need one.
 */
class SpdMatrix {
public:
    SpdMatrix() = default;

    /// Symmetrizes and factors @p m; throws NotPositiveDefinite if a pivot is not positive.
    explicit SpdMatrix(const MatrixXd& m)
        : m_(symmetrize(m))
    {
        if (m_.rows() != m_.cols() || m_.rows() == 0) {
            throw NotPositiveDefinite("matrix must be square and non-empty");
        }
        if (!m_.allFinite()) {
            throw NotPositiveDefinite("matrix has non-finite entries");
        }
        Eigen::LLT<MatrixXd> llt(m_);
        if (llt.info() != Eigen::Success || !llt.matrixL().toDenseMatrix().diagonal().allFinite()
            || (llt.matrixL().toDenseMatrix().diagonal().array() <= 0.0).any()) {
            throw NotPositiveDefinite("Cholesky pivot is not positive");
        }
        lower_ = llt.matrixL();
    }

    /// Accepts a PSD matrix, clamping eigenvalues in [-tol*trace, 0) to zero.
    static SpdMatrix semidefinite(const MatrixXd& m)
    {
        const MatrixXd s = symmetrize(m);
        if (s.rows() != s.cols() || s.rows() == 0 || !s.allFinite()) {
            throw NotPositiveDefinite("matrix must be square, finite and non-empty");
        }
        Eigen::LLT<MatrixXd> llt(s);
        if (llt.info() == Eigen::Success && (llt.matrixL().toDenseMatrix().diagonal().array() > 0.0).all()) {
            return SpdMatrix(s);
        }
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(s);
        const double floor = -kPsdTolerance * std::max(std::abs(s.trace()), std::numeric_limits<double>::min());
        if (es.eigenvalues().minCoeff() < floor) {
            throw NotPositiveDefinite("matrix has a negative eigenvalue beyond the PSD tolerance");
        }
        const VectorXd clamped = es.eigenvalues().cwiseMax(0.0);
        SpdMatrix out;
        out.m_ = symmetrize(es.eigenvectors() * clamped.asDiagonal() * es.eigenvectors().transpose());
        return out;
    }

    static SpdMatrix identity(Index n) { return SpdMatrix(MatrixXd::Identity(n, n)); }

    [[nodiscard]] const MatrixXd& matrix() const { return m_; }
    [[nodiscard]] Index dim() const { return m_.rows(); }
    [[nodiscard]] bool is_strict() const { return lower_.has_value(); }

    [[nodiscard]] const MatrixXd& lower() const
    {
        if (!lower_) {
            throw NotPositiveDefinite("semidefinite matrix has no Cholesky factor");
        }
        return *lower_;
    }

    /// Solves m·x = b through the Cholesky factor.
    [[nodiscard]] VectorXd solve(const VectorXd& b) const
    {
        detail::require_dims(b.size() == dim(), "SpdMatrix::solve");
        const auto& l = lower();
        VectorXd y = l.triangularView<Eigen::Lower>().solve(b);
        return l.transpose().triangularView<Eigen::Upper>().solve(y);
    }

    /// vᵀ m⁻¹ v via a single triangular solve.
    [[nodiscard]] double inverse_quadratic(const VectorXd& v) const
    {
        detail::require_dims(v.size() == dim(), "SpdMatrix::inverse_quadratic");
        return lower().triangularView<Eigen::Lower>().solve(v).squaredNorm();
    }

    [[nodiscard]] double log_determinant() const
    {
        return 2.0 * lower().diagonal().array().log().sum();
    }

    [[nodiscard]] MatrixXd inverse() const
    {
        const auto& l = lower();
        MatrixXd linv = l.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(dim(), dim()));
        return symmetrize(linv.transpose() * linv);
    }

private:
    MatrixXd m_;
    std::optional<MatrixXd> lower_;
};

/// Lower-triangular factor with P = L·Lᵀ.
struct MatrixSquareRoot {
    MatrixXd factor;
};

inline MatrixSquareRoot cholesky(const SpdMatrix& m)
{
    return {m.lower()};
}

/// 1 / (dirᵀ m⁻¹ dir) for the unit vector of @p dir.
inline double directional_reciprocal_precision(const SpdMatrix& m, const VectorXd& dir)
{
    detail::require_dims(dir.size() == m.dim(), "directional_reciprocal_precision");
    const double nrm = dir.norm();
    if (!(nrm > 0.0)) {
        throw std::invalid_argument("directional_reciprocal_precision: zero direction");
    }
    return 1.0 / m.inverse_quadratic(dir / nrm);
}

/**
 * @brief m − alpha·v̂v̂ᵀ with v̂ = v/‖v‖.
 *
 * The result is PSD iff alpha <= 1/(v̂ᵀm⁻¹v̂); larger alpha (beyond a relative
 * 1e-12 slack) raises DowndateViolation. A downdate exactly at the threshold
 * yields a semidefinite matrix.
 */
inline SpdMatrix rank1_downdate(const SpdMatrix& m, const VectorXd& v, double alpha)
{
    detail::require_dims(v.size() == m.dim(), "rank1_downdate");
    if (alpha < 0.0 || !std::isfinite(alpha)) {
        throw std::invalid_argument("rank1_downdate: alpha must be finite and nonnegative");
    }
    if (alpha == 0.0) {
        return m;
    }
    const VectorXd vhat = v.normalized();
    const double alpha_star = directional_reciprocal_precision(m, vhat);
    if (alpha > alpha_star * (1.0 + 1e-12)) {
        throw DowndateViolation("alpha exceeds 1/(vᵀP⁻¹v)");
    }
    return SpdMatrix::semidefinite(m.matrix() - alpha * vhat * vhat.transpose());
}

/**
 * @brief O(n²) downdate of a lower Cholesky factor: returns L' with
 *        L'L'ᵀ = LLᵀ − vvᵀ.
 */
inline MatrixXd cholesky_downdate(MatrixXd lower, VectorXd v)
{
    const Index n = lower.rows();
    detail::require_dims(lower.cols() == n && v.size() == n, "cholesky_downdate");
    for (Index k = 0; k < n; ++k) {
        const double lkk = lower(k, k);
        const double r2 = lkk * lkk - v(k) * v(k);
        if (!(r2 > 0.0)) {
            throw DowndateViolation("Cholesky downdate loses positive definiteness");
        }
        const double r = std::sqrt(r2);
        const double c = r / lkk;
        const double s = v(k) / lkk;
        lower(k, k) = r;
        for (Index i = k + 1; i < n; ++i) {
            lower(i, k) = (lower(i, k) - s * v(i)) / c;
            v(i) = c * v(i) - s * lower(i, k);
        }
    }
    return lower;
}

struct GeneralizedEigenSolution {
    VectorXd eigenvalues;   ///< descending
    MatrixXd eigenvectors;  ///< b-orthonormal columns
};

/// Solves a·v = λ·b·v via b = LLᵀ and the ordinary problem on L⁻¹aL⁻ᵀ.
inline GeneralizedEigenSolution generalized_sym_eig(const MatrixXd& a, const SpdMatrix& b)
{
    detail::require_dims(a.rows() == b.dim() && a.cols() == b.dim(), "generalized_sym_eig");
    const auto& l = b.lower();
    const MatrixXd linv_a = l.triangularView<Eigen::Lower>().solve(symmetrize(a));
    const MatrixXd c = l.triangularView<Eigen::Lower>().solve(linv_a.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(c));
    const Index n = b.dim();
    GeneralizedEigenSolution out{VectorXd(n), MatrixXd(n, n)};
    const MatrixXd v = l.transpose().triangularView<Eigen::Upper>().solve(es.eigenvectors());
    for (Index i = 0; i < n; ++i) {
        out.eigenvalues(i) = es.eigenvalues()(n - 1 - i);
        out.eigenvectors.col(i) = v.col(n - 1 - i);
    }
    return out;
}

/// Whitening pair built from the Cholesky root: forward x ↦ L⁻¹x, inverse y ↦ Ly.
class Whitening {
public:
    explicit Whitening(const SpdMatrix& m)
        : lower_(m.lower())
    {}

    [[nodiscard]] VectorXd forward(const VectorXd& x) const
    {
        detail::require_dims(x.size() == lower_.rows(), "Whitening::forward");
        return lower_.triangularView<Eigen::Lower>().solve(x);
    }
    [[nodiscard]] MatrixXd forward(const MatrixXd& x) const
    {
        detail::require_dims(x.rows() == lower_.rows(), "Whitening::forward");
        return lower_.triangularView<Eigen::Lower>().solve(x);
    }
    [[nodiscard]] VectorXd inverse(const VectorXd& y) const
    {
        detail::require_dims(y.size() == lower_.rows(), "Whitening::inverse");
        return lower_ * y;
    }
    [[nodiscard]] MatrixXd forward_matrix() const
    {
        return lower_.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(lower_.rows(), lower_.cols()));
    }
    [[nodiscard]] const MatrixXd& inverse_matrix() const { return lower_; }

private:
    MatrixXd lower_;
};

inline Whitening whiten(const SpdMatrix& m)
{
    return Whitening(m);
}

/// Flips @p v so that its largest-magnitude entry is positive (axial directions).
inline VectorXd canonical_sign(VectorXd v)
{
    Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    if (v(imax) < 0.0) {
        v = -v;
    }
    return v;
}

/// Angle in [0, π/2] between the axes spanned by @p a and @p b.
inline double axial_angle(const VectorXd& a, const VectorXd& b)
{
    const VectorXd ua = a.normalized();
    const VectorXd ub = b.normalized();
    const double c = std::abs(ua.dot(ub));
    const double s = (ub - ua.dot(ub) * ua).norm();
    return std::atan2(s, c);
}

/// Dominant right singular vector and singular value of @p a.
inline std::pair<VectorXd, double> dominant_right_singular(const MatrixXd& a)
{
    Eigen::JacobiSVD<MatrixXd> svd(a, Eigen::ComputeFullV);
    return {svd.matrixV().col(0), svd.singularValues().size() ? svd.singularValues()(0) : 0.0};
}

/// Eigenvector of the largest eigenvalue of a symmetric matrix.
inline std::pair<VectorXd, double> dominant_eigenvector(const MatrixXd& a)
{
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(a));
    const Index n = a.rows();
    return {es.eigenvectors().col(n - 1), es.eigenvalues()(n - 1)};
}

} // namespace gmsplit

#endif // GMSPLIT_LINALG_HPP
