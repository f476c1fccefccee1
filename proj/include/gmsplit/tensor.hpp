/**
 * @file tensor.hpp
 * @brief Second-derivative tensors, their contractions, and Z-eigenpairs of
 *        their "squares" by shifted symmetric higher-order power iteration.
 */

#ifndef GMSPLIT_TENSOR_HPP
#define GMSPLIT_TENSOR_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "gmsplit/errors.hpp"
#include "gmsplit/linalg.hpp"

namespace gmsplit {

/**
 * @brief Mixed order-3 tensor G[i][j][k] with one output index i < m and two
 *        input indices j, k < n.
 *
 * Stored as an m × n² matrix whose row i is the row-major n × n slice G[i].
 */
class Tensor3 {
public:
    Tensor3() = default;
    Tensor3(Index out_dim, Index in_dim)
        : m_(out_dim)
        , n_(in_dim)
        , data_(MatrixXd::Zero(out_dim, in_dim * in_dim))
    {}

    [[nodiscard]] Index out_dim() const { return m_; }
    [[nodiscard]] Index in_dim() const { return n_; }

    double& operator()(Index i, Index j, Index k) { return data_(i, j * n_ + k); }
    double operator()(Index i, Index j, Index k) const { return data_(i, j * n_ + k); }

    /// n × n slice for output @p i.
    [[nodiscard]] MatrixXd slice(Index i) const
    {
        MatrixXd s(n_, n_);
        for (Index j = 0; j < n_; ++j) {
            for (Index k = 0; k < n_; ++k) {
                s(j, k) = (*this)(i, j, k);
            }
        }
        return s;
    }

    void set_slice(Index i, const MatrixXd& s)
    {
        detail::require_dims(s.rows() == n_ && s.cols() == n_, "Tensor3::set_slice");
        for (Index j = 0; j < n_; ++j) {
            for (Index k = 0; k < n_; ++k) {
                (*this)(i, j, k) = s(j, k);
            }
        }
    }

    /// m × n² flattening, row i holding slice i row-major.
    [[nodiscard]] const MatrixXd& flat() const { return data_; }

    [[nodiscard]] bool all_finite() const { return data_.allFinite(); }

    /// Largest |G[i][j][k] − G[i][k][j]|.
    [[nodiscard]] double asymmetry() const
    {
        double worst = 0.0;
        for (Index i = 0; i < m_; ++i) {
            for (Index j = 0; j < n_; ++j) {
                for (Index k = j + 1; k < n_; ++k) {
                    worst = std::max(worst, std::abs((*this)(i, j, k) - (*this)(i, k, j)));
                }
            }
        }
        return worst;
    }

    [[nodiscard]] Tensor3 symmetrized() const
    {
        Tensor3 out(m_, n_);
        for (Index i = 0; i < m_; ++i) {
            out.set_slice(i, symmetrize(slice(i)));
        }
        return out;
    }

    /// Applies @p left to the output index and @p right to both input indices:
    /// out[i][j][k] = Σ left[i][l]·G[l][p][q]·right[p][j]·right[q][k].
    [[nodiscard]] Tensor3 transformed(const MatrixXd& left, const MatrixXd& right) const
    {
        detail::require_dims(left.cols() == m_ && right.rows() == n_, "Tensor3::transformed");
        const Index mo = left.rows();
        const Index no = right.cols();
        Tensor3 mixed(m_, no);
        for (Index l = 0; l < m_; ++l) {
            mixed.set_slice(l, right.transpose() * slice(l) * right);
        }
        Tensor3 out(mo, no);
        out.data_ = left * mixed.data_;
        return out;
    }

private:
    Index m_ = 0;
    Index n_ = 0;
    MatrixXd data_;
};

/// (G x²)ᵢ = Σⱼₖ G[i][j][k] xʲ xᵏ.
inline VectorXd contract_vv(const Tensor3& t, const VectorXd& x)
{
    detail::require_dims(x.size() == t.in_dim(), "contract_vv");
    VectorXd out(t.out_dim());
    for (Index i = 0; i < t.out_dim(); ++i) {
        double acc = 0.0;
        for (Index j = 0; j < t.in_dim(); ++j) {
            double row = 0.0;
            for (Index k = 0; k < t.in_dim(); ++k) {
                row += t(i, j, k) * x(k);
            }
            acc += x(j) * row;
        }
        out(i) = acc;
    }
    return out;
}

/// (G x)ⁱⱼ = Σₖ G[i][j][k] xᵏ, the first-order change of the Jacobian.
inline MatrixXd contract_v(const Tensor3& t, const VectorXd& x)
{
    detail::require_dims(x.size() == t.in_dim(), "contract_v");
    MatrixXd out(t.out_dim(), t.in_dim());
    for (Index i = 0; i < t.out_dim(); ++i) {
        for (Index j = 0; j < t.in_dim(); ++j) {
            double acc = 0.0;
            for (Index k = 0; k < t.in_dim(); ++k) {
                acc += t(i, j, k) * x(k);
            }
            out(i, j) = acc;
        }
    }
    return out;
}

/// (m·n) × n matricization: row n·i + j, column k holds G[i][j][k].
inline MatrixXd matricize(const Tensor3& t)
{
    const Index m = t.out_dim();
    const Index n = t.in_dim();
    MatrixXd out(m * n, n);
    for (Index i = 0; i < m; ++i) {
        for (Index j = 0; j < n; ++j) {
            for (Index k = 0; k < n; ++k) {
                out(n * i + j, k) = t(i, j, k);
            }
        }
    }
    return out;
}

/**
 * @brief Fourth-order covariant tensor T[i][j][k][l], stored as an n² × n²
 *        matrix with row n·i + j and column n·k + l.
 *
 * Tensors built by square_tensor are symmetric under (i,j), (k,l) and the
 * block swap, which is all the power iteration needs.
 */
class Tensor4Sym {
public:
    Tensor4Sym() = default;
    explicit Tensor4Sym(Index dim)
        : n_(dim)
        , data_(MatrixXd::Zero(dim * dim, dim * dim))
    {}
    Tensor4Sym(Index dim, MatrixXd data)
        : n_(dim)
        , data_(std::move(data))
    {
        detail::require_dims(data_.rows() == n_ * n_ && data_.cols() == n_ * n_, "Tensor4Sym");
    }

    [[nodiscard]] Index dim() const { return n_; }
    double& operator()(Index i, Index j, Index k, Index l) { return data_(i * n_ + j, k * n_ + l); }
    double operator()(Index i, Index j, Index k, Index l) const { return data_(i * n_ + j, k * n_ + l); }
    [[nodiscard]] const MatrixXd& flat() const { return data_; }

    /// (T x³)ᵢ = Σⱼₖₗ T[i][j][k][l] xʲxᵏxˡ.
    [[nodiscard]] VectorXd apply3(const VectorXd& x) const
    {
        detail::require_dims(x.size() == n_, "Tensor4Sym::apply3");
        const VectorXd xx = kron(x);
        const VectorXd t = data_ * xx;
        VectorXd out(n_);
        for (Index i = 0; i < n_; ++i) {
            out(i) = t.segment(i * n_, n_).dot(x);
        }
        return out;
    }

    /// T x⁴.
    [[nodiscard]] double apply4(const VectorXd& x) const
    {
        const VectorXd xx = kron(x);
        return xx.dot(data_ * xx);
    }

    /// Σ |T[i][j][k][l]|.
    [[nodiscard]] double abs_sum() const { return data_.cwiseAbs().sum(); }

private:
    [[nodiscard]] VectorXd kron(const VectorXd& x) const
    {
        VectorXd xx(n_ * n_);
        for (Index i = 0; i < n_; ++i) {
            xx.segment(i * n_, n_) = x(i) * x;
        }
        return xx;
    }

    Index n_ = 0;
    MatrixXd data_;
};

/// T[i][j][k][l] = Σ_pq G[p][i][j]·metric[p][q]·G[q][k][l], so that T x⁴ = ‖G x²‖²_metric.
inline Tensor4Sym square_tensor(const Tensor3& t, const MatrixXd& metric)
{
    detail::require_dims(metric.rows() == t.out_dim() && metric.cols() == t.out_dim(), "square_tensor");
    return Tensor4Sym(t.in_dim(), t.flat().transpose() * metric * t.flat());
}

inline Tensor4Sym square_tensor(const Tensor3& t)
{
    return square_tensor(t, MatrixXd::Identity(t.out_dim(), t.out_dim()));
}

struct ZEigenPair {
    double eigenvalue = 0.0;
    VectorXd eigenvector;
    double residual = 0.0;  ///< ‖T x³ − λ x‖
    int iterations = 0;     ///< iterations used by the winning guess
    bool converged = false;
    int monotonicity_violations = 0;  ///< iterations where T x⁴ decreased (should stay 0)
};

struct SshopmOptions {
    double tol = 1e-10;  ///< on ‖T x³ − λ x‖, relative to max(1, |λ|)
    int max_iter = 5000;
};

/**
 * @brief Shifted symmetric higher-order power iteration from each guess.
 *
 * The shift is the sum of absolute entries of @p t, which guarantees a
 * monotone iteration without symmetrizing the tensor. Returns the pair with
 * the largest eigenvalue among converged runs (ties keep the earlier guess).
 * If no guess converges the best partial result is returned with
 * converged = false.
 */
inline ZEigenPair sshopm(const Tensor4Sym& t, const std::vector<VectorXd>& guesses, const SshopmOptions& opts = {})
{
    if (guesses.empty()) {
        throw std::invalid_argument("sshopm: at least one initial guess is required");
    }
    if (!(opts.tol > 0.0)) {
        throw std::invalid_argument("sshopm: tol must be positive");
    }
    const double eta = t.abs_sum();
    std::optional<ZEigenPair> best_converged;
    std::optional<ZEigenPair> best_any;
    for (const auto& g : guesses) {
        detail::require_dims(g.size() == t.dim(), "sshopm guess");
        if (!(g.norm() > 0.0)) {
            continue;
        }
        VectorXd x = g.normalized();
        double f = t.apply4(x);
        ZEigenPair run;
        int it = 0;
        for (; it < opts.max_iter; ++it) {
            const VectorXd tx = t.apply3(x);
            // Stop on the fixed-point residual; a small step alone allows a residual of order eta * step.
            if ((tx - f * x).norm() < opts.tol * std::max(1.0, std::abs(f))) {
                run.converged = true;
                break;
            }
            VectorXd y = tx + eta * x;
            const double ny = y.norm();
            if (!(ny > 0.0)) {
                break;
            }
            y /= ny;
            const double fy = t.apply4(y);
            if (fy < f - 1e-12 * std::max(1.0, std::abs(f))) {
                ++run.monotonicity_violations;
            }
            x = y;
            f = fy;
        }
        run.eigenvalue = f;
        run.eigenvector = canonical_sign(x);
        run.residual = (t.apply3(x) - f * x).norm();
        run.iterations = it;
        auto& slot = run.converged ? best_converged : best_any;
        if (!slot || run.eigenvalue > slot->eigenvalue) {
            slot = run;
        }
    }
    if (best_converged) {
        return *best_converged;
    }
    if (!best_any) {
        throw std::invalid_argument("sshopm: all guesses are zero vectors");
    }
    return *best_any;
}

/// @p count points uniform on the unit sphere from a fixed-seed generator.
inline std::vector<VectorXd> seeded_sphere_points(Index dim, int count, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<VectorXd> pts;
    pts.reserve(static_cast<std::size_t>(count));
    for (int c = 0; c < count; ++c) {
        VectorXd v(dim);
        for (Index i = 0; i < dim; ++i) {
            v(i) = nd(rng);
        }
        pts.push_back(v.normalized());
    }
    return pts;
}

} // namespace gmsplit

#endif // GMSPLIT_TENSOR_HPP
