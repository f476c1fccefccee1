/**
 * @file heuristics.hpp
 * @brief Splitting-direction selection rules.
 *
 * Notation: P is the input covariance with Cholesky root L, G the Jacobian
 * and H the second-derivative tensor at the mean, Pz = G P Gᵀ the linearly
 * propagated covariance with root Lz. Uncertainty-scaled rules optimise over
 * the 1-σ ellipsoid x = L y, ‖y‖ = 1, and return the unit vector of L y*.
 */

#ifndef GMSPLIT_HEURISTICS_HPP
#define GMSPLIT_HEURISTICS_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gmsplit/errors.hpp"
#include "gmsplit/gaussian.hpp"
#include "gmsplit/linalg.hpp"
#include "gmsplit/model.hpp"
#include "gmsplit/split_engine.hpp"
#include "gmsplit/tensor.hpp"
#include "gmsplit/unscented.hpp"

namespace gmsplit {

enum class HeuristicKind {
    MaxVar,
    Fos,
    Sos,
    Solc,
    Sadl,
    Usfos,
    Ussolc,
    Safos,
    Sasos,
    Wussos,
    Wussolc,
    Wussadl,
    Wsasos,
    Alodt,
};

inline constexpr std::array<HeuristicKind, 14> kAllHeuristics{
    HeuristicKind::MaxVar, HeuristicKind::Fos,    HeuristicKind::Sos,     HeuristicKind::Solc,    HeuristicKind::Sadl,
    HeuristicKind::Usfos,  HeuristicKind::Ussolc, HeuristicKind::Safos,   HeuristicKind::Sasos,   HeuristicKind::Wussos,
    HeuristicKind::Wussolc, HeuristicKind::Wussadl, HeuristicKind::Wsasos, HeuristicKind::Alodt,
};

inline std::string to_string(HeuristicKind k)
{
    switch (k) {
    case HeuristicKind::MaxVar: return "maxvar";
    case HeuristicKind::Fos: return "fos";
    case HeuristicKind::Sos: return "sos";
    case HeuristicKind::Solc: return "solc";
    case HeuristicKind::Sadl: return "sadl";
    case HeuristicKind::Usfos: return "usfos";
    case HeuristicKind::Ussolc: return "ussolc";
    case HeuristicKind::Safos: return "safos";
    case HeuristicKind::Sasos: return "sasos";
    case HeuristicKind::Wussos: return "wussos";
    case HeuristicKind::Wussolc: return "wussolc";
    case HeuristicKind::Wussadl: return "wussadl";
    case HeuristicKind::Wsasos: return "wsasos";
    case HeuristicKind::Alodt: return "alodt";
    }
    return "unknown";
}

inline HeuristicKind parse_heuristic(std::string_view name)
{
    for (auto k : kAllHeuristics) {
        if (to_string(k) == name) {
            return k;
        }
    }
    throw ConfigError("unknown heuristic '" + std::string(name) + "'");
}

inline bool needs_hessian(HeuristicKind k)
{
    switch (k) {
    case HeuristicKind::Sos:
    case HeuristicKind::Solc:
    case HeuristicKind::Ussolc:
    case HeuristicKind::Sasos:
    case HeuristicKind::Wussos:
    case HeuristicKind::Wussolc:
    case HeuristicKind::Wsasos: return true;
    default: return false;
    }
}

inline bool needs_sigma_points(HeuristicKind k)
{
    return k == HeuristicKind::Sadl || k == HeuristicKind::Wussadl || k == HeuristicKind::Alodt;
}

struct DirectionResult {
    VectorXd direction;          ///< unit, sign-canonical
    double objective_value = 0.0;
    int iterations = 0;          ///< power-iteration count (tensor rules)
    double residual = 0.0;       ///< fixed-point residual (tensor rules)
    bool converged = true;
};

struct HeuristicOptions {
    SutConfig sut;
    SshopmOptions sshopm;
    int restarts = 8;
    std::uint64_t restart_seed = 1;
};

namespace detail {

inline DirectionResult make_result(const VectorXd& dir, double objective)
{
    DirectionResult r;
    r.direction = canonical_sign(dir.normalized());
    r.objective_value = objective;
    return r;
}

/// Lower root of Pz = G P Gᵀ; throws SingularOutputCovariance when it is not SPD.
inline MatrixXd output_root(const MatrixXd& jac, const SpdMatrix& p)
{
    const MatrixXd pz = symmetrize(jac * p.matrix() * jac.transpose());
    Eigen::LLT<MatrixXd> llt(pz);
    if (pz.rows() == 0 || llt.info() != Eigen::Success || !(llt.matrixL().toDenseMatrix().diagonal().array() > 0.0).all()) {
        throw SingularOutputCovariance("linearly propagated covariance G P Gᵀ is not positive definite");
    }
    const MatrixXd lz = llt.matrixL();
    // Reject numerically singular roots too; the squared pivot ratio tracks 1/cond(Pz).
    const double ratio = lz.diagonal().minCoeff() / lz.diagonal().maxCoeff();
    if (!(ratio * ratio > 1e-14)) {
        throw SingularOutputCovariance("linearly propagated covariance is numerically singular");
    }
    return lz;
}

inline MatrixXd lower_inverse(const MatrixXd& l)
{
    return l.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(l.rows(), l.cols()));
}

/// Power iteration on square_tensor(t, metric) from @p first plus seeded restarts.
inline DirectionResult tensor_direction(const Tensor3& t, const VectorXd& first, const HeuristicOptions& opts)
{
    std::vector<VectorXd> guesses{first};
    for (auto& v : seeded_sphere_points(t.in_dim(), opts.restarts, opts.restart_seed)) {
        guesses.push_back(v);
    }
    const auto z = sshopm(square_tensor(t), guesses, opts.sshopm);
    DirectionResult r;
    r.direction = z.eigenvector;
    r.objective_value = std::sqrt(std::max(z.eigenvalue, 0.0));
    r.iterations = z.iterations;
    r.residual = z.residual;
    r.converged = z.converged;
    return r;
}

} // namespace detail

/**
 * @brief Sixth-order averaged quadratic form behind the spherical-average
 *        second-order rules.
 *
 * Q = Σ_pq W_pq · contraction of the slices A_p, A_q with sym(P⊗P⊗P), the
 * symmetrization written out as its 15 pairings.
 */
inline MatrixXd sasos_quadratic_form(const Tensor3& h, const MatrixXd& p, const MatrixXd& metric)
{
    const Index m = h.out_dim();
    const Index n = h.in_dim();
    detail::require_dims(p.rows() == n && metric.rows() == m && metric.cols() == m, "sasos_quadratic_form");
    std::vector<MatrixXd> pap(static_cast<std::size_t>(m));
    std::vector<MatrixXd> ap(static_cast<std::size_t>(m));
    std::vector<double> tr(static_cast<std::size_t>(m));
    for (Index i = 0; i < m; ++i) {
        const MatrixXd a = h.slice(i);
        ap[i] = a * p;
        pap[i] = p * ap[i];
        tr[i] = ap[i].trace();
    }
    MatrixXd q = MatrixXd::Zero(n, n);
    for (Index i = 0; i < m; ++i) {
        for (Index j = 0; j < m; ++j) {
            const double w = metric(i, j);
            if (w == 0.0) {
                continue;
            }
            const double cross = (ap[i] * ap[j]).trace();
            q += w * (p * (tr[i] * tr[j] + 2.0 * cross) + 2.0 * tr[j] * pap[i] + 2.0 * tr[i] * pap[j]
                      + 4.0 * pap[i] * ap[j] + 4.0 * pap[j] * ap[i]);
        }
    }
    return symmetrize(q / 15.0);
}

/// Splitting direction from precomputed derivatives. Rules that need sigma
/// points take the statistical-linearization gain in @p sl_gain.
inline DirectionResult split_direction(HeuristicKind kind, const ModelDerivatives& d, const Gaussian& g,
                                       const HeuristicOptions& opts = {}, const std::optional<MatrixXd>& sl_gain = std::nullopt)
{
    const Index n = g.dim();
    detail::require_dims(d.in_dim() == n, "split_direction: Jacobian columns vs input dimension");
    const MatrixXd& p = g.cov.matrix();
    const MatrixXd& l = g.cov.lower();
    const MatrixXd& jac = d.jacobian;
    const auto need_gain = [&]() -> const MatrixXd& {
        if (!sl_gain) {
            throw MissingSigma(to_string(kind) + " needs the statistical linearization");
        }
        detail::require_dims(sl_gain->rows() == jac.rows() && sl_gain->cols() == n, "statistical linearization gain");
        return *sl_gain;
    };
    if (needs_hessian(kind)) {
        (void)d.require_hessian();
    }

    switch (kind) {
    case HeuristicKind::MaxVar: {
        const auto [v, lam] = dominant_eigenvector(p);
        return detail::make_result(v, std::sqrt(std::max(lam, 0.0)));
    }
    case HeuristicKind::Fos: {
        const auto [v, s] = dominant_right_singular(jac);
        return detail::make_result(v, s);
    }
    case HeuristicKind::Sos: {
        const auto first = dominant_right_singular(jac).first;
        auto r = detail::tensor_direction(*d.hessian, first, opts);
        r.direction = canonical_sign(r.direction);
        return r;
    }
    case HeuristicKind::Solc: {
        const auto [v, s] = dominant_right_singular(matricize(*d.hessian));
        return detail::make_result(v, s);
    }
    case HeuristicKind::Sadl: {
        const auto [v, s] = dominant_right_singular(need_gain() - jac);
        return detail::make_result(v, s);
    }
    case HeuristicKind::Usfos: {
        const auto [v, s] = dominant_right_singular(jac * l);
        return detail::make_result(l * v, s);
    }
    case HeuristicKind::Ussolc: {
        const auto [v, s] = dominant_right_singular(matricize(*d.hessian) * l);
        return detail::make_result(l * v, s);
    }
    case HeuristicKind::Safos: {
        const MatrixXd gl = jac * l;
        const MatrixXd mm = gl.transpose() * gl;
        const MatrixXd a = symmetrize(mm.trace() * p + 2.0 * p * jac.transpose() * jac * p);
        const auto [v, lam] = dominant_eigenvector(a);
        const double nd = static_cast<double>(n);
        return detail::make_result(v, lam / (nd * (nd + 2.0)));
    }
    case HeuristicKind::Sasos: {
        const MatrixXd q = sasos_quadratic_form(*d.hessian, p, MatrixXd::Identity(jac.rows(), jac.rows()));
        const auto [v, lam] = dominant_eigenvector(q);
        return detail::make_result(v, lam);
    }
    case HeuristicKind::Wsasos: {
        const MatrixXd lzi = detail::lower_inverse(detail::output_root(jac, g.cov));
        const MatrixXd q = sasos_quadratic_form(*d.hessian, p, lzi.transpose() * lzi);
        const auto [v, lam] = dominant_eigenvector(q);
        return detail::make_result(v, lam);
    }
    case HeuristicKind::Wussos: {
        const MatrixXd lzi = detail::lower_inverse(detail::output_root(jac, g.cov));
        const Tensor3 hw = d.hessian->transformed(lzi, l);
        const auto first = dominant_right_singular(jac * l).first;
        auto r = detail::tensor_direction(hw, first, opts);
        r.direction = canonical_sign((l * r.direction).normalized());
        return r;
    }
    case HeuristicKind::Wussolc: {
        const MatrixXd lzi = detail::lower_inverse(detail::output_root(jac, g.cov));
        const auto [v, s] = dominant_right_singular(matricize(d.hessian->transformed(lzi, l)));
        return detail::make_result(l * v, s * s);
    }
    case HeuristicKind::Wussadl: {
        const MatrixXd lzi = detail::lower_inverse(detail::output_root(jac, g.cov));
        const auto [v, s] = dominant_right_singular(lzi * (need_gain() - jac) * l);
        return detail::make_result(l * v, s);
    }
    case HeuristicKind::Alodt:
        throw MissingSigma("alodt needs model evaluations at the sigma points");
    }
    throw ConfigError("unhandled heuristic");
}

/**
 * @brief Principal axis with the largest sigma-point deviation from the
 *        affine fit, scored as ‖g(χ⁺) + g(χ⁻) − 2g(μ)‖ along each axis.
 *
 * Scores equal to within 1e-10 relative are resolved toward the larger
 * variance, so affine maps reduce to the max-variance rule.
 */
inline DirectionResult alodt_direction(const NonlinearModel& model, const Gaussian& g, const SutConfig& sut = {})
{
    const Index n = g.dim();
    detail::require_dims(model.in_dim() == n, "alodt_direction");
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(g.cov.matrix());
    const double spread = std::sqrt(static_cast<double>(n) + sut.lambda(n));
    if (!std::isfinite(spread) || !(spread > 0.0)) {
        throw std::invalid_argument("alodt_direction: n + lambda must be positive");
    }
    const VectorXd z0 = model.value(g.mean);
    std::vector<double> score(static_cast<std::size_t>(n));
    for (Index k = 0; k < n; ++k) {
        const VectorXd step = spread * std::sqrt(std::max(es.eigenvalues()(k), 0.0)) * es.eigenvectors().col(k);
        score[k] = (model.value(g.mean + step) + model.value(g.mean - step) - 2.0 * z0).norm();
    }
    double smax = 0.0;
    for (double s : score) {
        smax = std::max(smax, s);
    }
    // Eigenvalues ascend, so scanning downward visits larger variances first.
    Index best = n - 1;
    for (Index k = n - 1; k >= 0; --k) {
        if (score[k] >= smax - 1e-10 * smax) {
            best = k;
            break;
        }
    }
    return detail::make_result(es.eigenvectors().col(best), score[best]);
}

/// Evaluates whatever @p kind needs from @p model at the mean of @p g and selects a direction.
inline DirectionResult select_direction(HeuristicKind kind, const NonlinearModel& model, const Gaussian& g,
                                        const HeuristicOptions& opts = {})
{
    if (kind == HeuristicKind::Alodt) {
        return alodt_direction(model, g, opts.sut);
    }
    const auto d = model.evaluate(g.mean, needs_hessian(kind) ? DerivativeOrder::Hessian : DerivativeOrder::Jacobian);
    std::optional<MatrixXd> gain;
    if (needs_sigma_points(kind)) {
        gain = statistical_linearization(model, g, opts.sut).gain;
    }
    return split_direction(kind, d, g, opts, gain);
}

/// Adapter for recursive_split.
inline DirectionSelector make_selector(HeuristicKind kind, const NonlinearModel& model, HeuristicOptions opts = {})
{
    return [kind, &model, opts](const Gaussian& g) {
        const auto r = select_direction(kind, model, g, opts);
        return SplitChoice{r.direction, r.objective_value};
    };
}

} // namespace gmsplit

#endif // GMSPLIT_HEURISTICS_HPP
