/**
 * @file metrics.hpp
 * @brief Approximation-quality measures between a propagated mixture and a
 *        truth density or truth samples.
 */

#ifndef GMSPLIT_METRICS_HPP
#define GMSPLIT_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "gmsplit/errors.hpp"
#include "gmsplit/gaussian.hpp"
#include "gmsplit/linalg.hpp"
#include "gmsplit/parallel.hpp"
#include "gmsplit/quadrature.hpp"

namespace gmsplit {

/// Row-major N × m samples.
using SampleMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct MetricReport {
    std::string scenario;
    std::string heuristic;
    std::optional<double> nise;
    std::optional<double> elk;
    std::optional<double> madem;
    std::optional<double> mcr;
    std::optional<double> cvm_norm;
    std::size_t samples = 0;
};

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double v)
    {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v)) {
            comp_ += (sum_ - t) + v;
        } else {
            comp_ += (v - t) + sum_;
        }
        sum_ = t;
    }
    [[nodiscard]] double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// ∫(p − q)² / (∫p² + ∫q²) from the three inner products.
inline double nise_from_terms(double pp, double qq, double pq)
{
    const double denom = pp + qq;
    if (!(denom > 0.0)) {
        throw InvariantViolation("NISE denominator is not positive");
    }
    return std::clamp((pp + qq - 2.0 * pq) / denom, 0.0, 1.0);
}

inline double nise(const GaussianMixture& p, const GaussianMixture& q)
{
    return nise_from_terms(gm_inner_product(p, p), gm_inner_product(q, q), gm_inner_product(p, q));
}

/**
 * @brief Truth density that is not a mixture. It supplies a box in some
 *        integration coordinates u and, at each u, the integrands of the
 *        cross term ∫p·p′ and the self term ∫p′², Jacobians included.
 */
class TruthDensity {
public:
    virtual ~TruthDensity() = default;
    [[nodiscard]] virtual Index dim() const = 0;
    [[nodiscard]] virtual double pdf(const VectorXd& z) const = 0;
    [[nodiscard]] virtual std::pair<VectorXd, VectorXd> integration_box() const = 0;
    /// out[0] = cross integrand, out[1] = self integrand.
    virtual void integrands(const VectorXd& u, const MixtureEvaluator& approx, double* out) const = 0;
};

inline double nise(const GaussianMixture& p, const TruthDensity& truth, const QuadratureOptions& opts = {})
{
    detail::require_dims(p.dim() == truth.dim(), "nise");
    const MixtureEvaluator eval(p);
    const auto [lo, hi] = truth.integration_box();
    const auto terms = integrate_box([&](const VectorXd& u, double* out) { truth.integrands(u, eval, out); }, 2, lo, hi, opts);
    return nise_from_terms(gm_inner_product(p, p), terms[1], terms[0]);
}

/// Standard normal CDF.
inline double normal_cdf(double x)
{
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

/// CDF of marginal @p j of a mixture.
inline double marginal_cdf(const GaussianMixture& p, Index j, double x)
{
    double f = 0.0;
    for (const auto& c : p.components()) {
        f += c.weight * normal_cdf((x - c.gaussian.mean(j)) / std::sqrt(c.gaussian.cov.matrix()(j, j)));
    }
    return f;
}

/// Cramér–von Mises ω² of one sample column against a CDF.
template <class Cdf>
double cvm_statistic(std::vector<double> z, Cdf&& cdf)
{
    const auto n = static_cast<double>(z.size());
    if (z.empty()) {
        throw std::invalid_argument("cvm_statistic: need at least one sample");
    }
    std::sort(z.begin(), z.end());
    CompensatedSum s;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double d = (2.0 * static_cast<double>(i) + 1.0) / (2.0 * n) - cdf(z[i]);
        s.add(d * d);
    }
    return 1.0 / (12.0 * n * n) + s.value() / n;
}

/// Euclidean norm of the per-marginal ω² values.
inline double cvm_norm(const GaussianMixture& p, const SampleMatrix& samples, unsigned threads = 0)
{
    detail::require_dims(samples.cols() == p.dim(), "cvm_norm");
    const Index m = p.dim();
    std::vector<double> w2(static_cast<std::size_t>(m));
    parallel_for(static_cast<std::size_t>(m), [&](std::size_t j) {
        std::vector<double> col(samples.rows());
        for (Index i = 0; i < samples.rows(); ++i) {
            col[i] = samples(i, static_cast<Index>(j));
        }
        w2[j] = cvm_statistic(std::move(col), [&](double x) { return marginal_cdf(p, static_cast<Index>(j), x); });
    }, threads);
    double s = 0.0;
    for (double v : w2) {
        s += v * v;
    }
    return std::sqrt(s);
}

/// Mahalanobis norm of the mean error under @p norm_cov.
inline double madem(const VectorXd& approx_mean, const VectorXd& truth_mean, const SpdMatrix& norm_cov)
{
    detail::require_dims(approx_mean.size() == truth_mean.size() && approx_mean.size() == norm_cov.dim(), "madem");
    return std::sqrt(norm_cov.inverse_quadratic(approx_mean - truth_mean));
}

/**
 * @brief max(λmax, 1/λmin) over the squared singular values λ of P^{-1/2}P′^{1/2},
 *        i.e. squared axis ratios of the two 1-σ ellipsoids.
 */
inline double mcr(const SpdMatrix& p, const SpdMatrix& p_prime)
{
    detail::require_dims(p.dim() == p_prime.dim(), "mcr");
    const MatrixXd x = p.lower().triangularView<Eigen::Lower>().solve(p_prime.lower());
    Eigen::JacobiSVD<MatrixXd> svd(x);
    const VectorXd sv = svd.singularValues();
    const double lmax = sv.maxCoeff() * sv.maxCoeff();
    const double lmin = sv.minCoeff() * sv.minCoeff();
    return std::max(lmax, 1.0 / lmin);
}

/// (1/N)Σ p(zᵢ), accumulated in log space.
inline double elk(const GaussianMixture& p, const SampleMatrix& samples, unsigned threads = 0)
{
    detail::require_dims(samples.cols() == p.dim(), "elk");
    if (samples.rows() == 0) {
        throw std::invalid_argument("elk: need at least one sample");
    }
    const MixtureEvaluator eval(p);
    std::vector<double> logs(static_cast<std::size_t>(samples.rows()));
    parallel_for(
        logs.size(), [&](std::size_t i) { logs[i] = eval.log_pdf(samples.row(static_cast<Index>(i)).transpose()); }, threads);
    const double lmax = *std::max_element(logs.begin(), logs.end());
    if (!std::isfinite(lmax)) {
        return 0.0;
    }
    CompensatedSum s;
    for (double l : logs) {
        s.add(std::exp(l - lmax));
    }
    return std::exp(lmax + std::log(s.value()) - std::log(static_cast<double>(samples.rows())));
}

/// Sample mean and unbiased covariance.
inline Moments sample_moments(const SampleMatrix& samples)
{
    const Index n = samples.rows();
    if (n < 2) {
        throw std::invalid_argument("sample_moments: need at least two samples");
    }
    const VectorXd mean = samples.colwise().mean().transpose();
    const MatrixXd centered = samples.rowwise() - mean.transpose();
    return {mean, symmetrize(centered.transpose() * centered / static_cast<double>(n - 1))};
}

} // namespace gmsplit

#endif // GMSPLIT_METRICS_HPP
