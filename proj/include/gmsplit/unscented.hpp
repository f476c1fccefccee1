/**
 * @file unscented.hpp
 * @brief Scaled unscented sigma points and statistical linearization.
 */

#ifndef GMSPLIT_UNSCENTED_HPP
#define GMSPLIT_UNSCENTED_HPP

#include <cmath>
#include <stdexcept>

#include "gmsplit/errors.hpp"
#include "gmsplit/gaussian.hpp"
#include "gmsplit/linalg.hpp"
#include "gmsplit/model.hpp"

namespace gmsplit {

struct SutConfig {
    double alpha = 0.5;
    double beta = 2.0;
    double kappa = 0.0;

    /// λ̃ = α²(n + κ) − n.
    [[nodiscard]] double lambda(Index n) const { return alpha * alpha * (static_cast<double>(n) + kappa) - static_cast<double>(n); }
};

struct SigmaPoints {
    MatrixXd points;       ///< n × (2n+1): μ, then μ + c·Lᵢ, then μ − c·Lᵢ
    VectorXd mean_weights;
    VectorXd cov_weights;
    double spread = 0.0;   ///< c = √(n + λ̃)
};

inline SigmaPoints sut_sigma_points(const Gaussian& g, const SutConfig& cfg = {})
{
    if (!(cfg.alpha > 0.0)) {
        throw std::invalid_argument("sut_sigma_points: alpha must be positive");
    }
    const Index n = g.dim();
    const double lam = cfg.lambda(n);
    const double nl = static_cast<double>(n) + lam;
    if (!(nl > 0.0)) {
        throw std::invalid_argument("sut_sigma_points: n + lambda must be positive");
    }
    const MatrixXd& l = g.cov.lower();
    SigmaPoints sp;
    sp.spread = std::sqrt(nl);
    sp.points.resize(n, 2 * n + 1);
    sp.points.col(0) = g.mean;
    for (Index i = 0; i < n; ++i) {
        sp.points.col(1 + i) = g.mean + sp.spread * l.col(i);
        sp.points.col(1 + n + i) = g.mean - sp.spread * l.col(i);
    }
    sp.mean_weights = VectorXd::Constant(2 * n + 1, 1.0 / (2.0 * nl));
    sp.cov_weights = sp.mean_weights;
    sp.mean_weights(0) = lam / nl;
    sp.cov_weights(0) = lam / nl + 1.0 - cfg.alpha * cfg.alpha + cfg.beta;
    return sp;
}

/// Weighted mean and covariance of a set of (possibly transformed) sigma points.
inline Moments sigma_point_moments(const MatrixXd& pts, const SigmaPoints& sp)
{
    const VectorXd mean = pts * sp.mean_weights;
    MatrixXd cov = MatrixXd::Zero(pts.rows(), pts.rows());
    for (Index k = 0; k < pts.cols(); ++k) {
        const VectorXd d = pts.col(k) - mean;
        cov += sp.cov_weights(k) * d * d.transpose();
    }
    return {mean, symmetrize(cov)};
}

struct StatisticalLinearization {
    MatrixXd gain;        ///< G_SL = Pxzᵀ Px⁻¹
    VectorXd offset;      ///< b = μz − G_SL μx
    MatrixXd error_cov;   ///< Pe = Pz − G_SL Px G_SLᵀ, clamped PSD
    MatrixXd output_cov;  ///< Pz from the transformed points
    MatrixXd cross_cov;   ///< Pxz
    VectorXd output_mean;
};

/// Affine fit minimizing mean squared error over the sigma points.
inline StatisticalLinearization statistical_linearization(const NonlinearModel& model, const Gaussian& g,
                                                          const SutConfig& cfg = {})
{
    detail::require_dims(model.in_dim() == g.dim(), "statistical_linearization");
    const auto sp = sut_sigma_points(g, cfg);
    const Index m = model.out_dim();
    MatrixXd z(m, sp.points.cols());
    for (Index k = 0; k < sp.points.cols(); ++k) {
        z.col(k) = model.value(sp.points.col(k));
    }
    const auto zm = sigma_point_moments(z, sp);
    MatrixXd pxz = MatrixXd::Zero(g.dim(), m);
    for (Index k = 0; k < sp.points.cols(); ++k) {
        pxz += sp.cov_weights(k) * (sp.points.col(k) - g.mean) * (z.col(k) - zm.mean).transpose();
    }
    StatisticalLinearization out;
    out.cross_cov = pxz;
    out.output_mean = zm.mean;
    out.output_cov = zm.cov;
    // Px⁻¹Pxz through the Cholesky factor, then transpose.
    const auto& l = g.cov.lower();
    const MatrixXd y = l.triangularView<Eigen::Lower>().solve(pxz);
    out.gain = l.transpose().triangularView<Eigen::Upper>().solve(y).transpose();
    out.offset = zm.mean - out.gain * g.mean;
    MatrixXd pe = symmetrize(zm.cov - out.gain * g.cov.matrix() * out.gain.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(pe);
    out.error_cov = symmetrize(es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() * es.eigenvectors().transpose());
    return out;
}

} // namespace gmsplit

#endif // GMSPLIT_UNSCENTED_HPP
