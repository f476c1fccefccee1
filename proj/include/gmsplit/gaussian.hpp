/**
 * @file gaussian.hpp
 * @brief Gaussian and Gaussian-mixture values, densities, moments and the
 *        closed-form mixture inner product.
 */

#ifndef GMSPLIT_GAUSSIAN_HPP
#define GMSPLIT_GAUSSIAN_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gmsplit/errors.hpp"
#include "gmsplit/linalg.hpp"

namespace gmsplit {

struct Gaussian {
    VectorXd mean;
    SpdMatrix cov;

    Gaussian() = default;
    Gaussian(VectorXd mu, SpdMatrix p)
        : mean(std::move(mu))
        , cov(std::move(p))
    {
        detail::require_dims(mean.size() == cov.dim(), "Gaussian mean/cov");
    }
    Gaussian(VectorXd mu, const MatrixXd& p)
        : Gaussian(std::move(mu), SpdMatrix(p))
    {}

    [[nodiscard]] Index dim() const { return mean.size(); }
};

/// log 𝒩(x; g.mean, g.cov), evaluated through Cholesky solves.
inline double log_density(const Gaussian& g, const VectorXd& x)
{
    detail::require_dims(x.size() == g.dim(), "log_density");
    const double d = static_cast<double>(g.dim());
    const double maha = g.cov.inverse_quadratic(x - g.mean);
    return -0.5 * (d * std::log(2.0 * std::numbers::pi) + g.cov.log_determinant() + maha);
}

struct MixtureComponent {
    double weight = 0.0;
    Gaussian gaussian;
};

/// Weighted sum of Gaussians; weights positive and summing to one.
class GaussianMixture {
public:
    GaussianMixture() = default;

    explicit GaussianMixture(std::vector<MixtureComponent> components, double weight_tol = 1e-12)
        : components_(std::move(components))
    {
        validate(weight_tol);
    }

    static GaussianMixture single(const Gaussian& g) { return GaussianMixture({{1.0, g}}); }

    [[nodiscard]] const std::vector<MixtureComponent>& components() const { return components_; }
    [[nodiscard]] std::size_t size() const { return components_.size(); }
    [[nodiscard]] bool empty() const { return components_.empty(); }
    [[nodiscard]] Index dim() const { return components_.empty() ? 0 : components_.front().gaussian.dim(); }
    const MixtureComponent& operator[](std::size_t i) const { return components_[i]; }

    [[nodiscard]] double weight_sum() const
    {
        double s = 0.0;
        for (const auto& c : components_) {
            s += c.weight;
        }
        return s;
    }

private:
    void validate(double weight_tol) const
    {
        if (components_.empty()) {
            throw InvariantViolation("mixture has no components");
        }
        const Index d = components_.front().gaussian.dim();
        for (const auto& c : components_) {
            detail::require_dims(c.gaussian.dim() == d, "mixture component dimension");
            if (!(c.weight > 0.0) || !std::isfinite(c.weight)) {
                throw InvariantViolation("mixture weights must be positive");
            }
        }
        if (std::abs(weight_sum() - 1.0) > weight_tol) {
            throw InvariantViolation("mixture weights must sum to one");
        }
    }

    std::vector<MixtureComponent> components_;
};

/// log Σ wᵢ 𝒩(x; μᵢ, Pᵢ), accumulated with log-sum-exp.
inline double log_pdf(const GaussianMixture& gm, const VectorXd& x)
{
    detail::require_dims(x.size() == gm.dim(), "log_pdf");
    double lmax = -std::numeric_limits<double>::infinity();
    std::vector<double> terms;
    terms.reserve(gm.size());
    for (const auto& c : gm.components()) {
        const double l = std::log(c.weight) + log_density(c.gaussian, x);
        terms.push_back(l);
        lmax = std::max(lmax, l);
    }
    if (!std::isfinite(lmax)) {
        return lmax;
    }
    double s = 0.0;
    for (double l : terms) {
        s += std::exp(l - lmax);
    }
    return lmax + std::log(s);
}

inline double pdf(const GaussianMixture& gm, const VectorXd& x)
{
    return std::exp(log_pdf(gm, x));
}

inline double pdf(const Gaussian& g, const VectorXd& x)
{
    return std::exp(log_density(g, x));
}

/// Per-component factors cached for repeated density evaluation.
class MixtureEvaluator {
public:
    explicit MixtureEvaluator(const GaussianMixture& gm)
    {
        for (const auto& c : gm.components()) {
            const double d = static_cast<double>(c.gaussian.dim());
            terms_.push_back({std::log(c.weight) - 0.5 * (d * std::log(2.0 * std::numbers::pi) + c.gaussian.cov.log_determinant()),
                              c.gaussian.mean, c.gaussian.cov.lower()});
        }
        dim_ = gm.dim();
    }

    [[nodiscard]] double log_pdf(const VectorXd& x) const
    {
        detail::require_dims(x.size() == dim_, "MixtureEvaluator::log_pdf");
        double lmax = -std::numeric_limits<double>::infinity();
        scratch_.resize(terms_.size());
        for (std::size_t i = 0; i < terms_.size(); ++i) {
            const auto& t = terms_[i];
            const double maha = t.lower.triangularView<Eigen::Lower>().solve(x - t.mean).squaredNorm();
            scratch_[i] = t.log_const - 0.5 * maha;
            lmax = std::max(lmax, scratch_[i]);
        }
        if (!std::isfinite(lmax)) {
            return lmax;
        }
        double s = 0.0;
        for (double l : scratch_) {
            s += std::exp(l - lmax);
        }
        return lmax + std::log(s);
    }

    [[nodiscard]] double pdf(const VectorXd& x) const { return std::exp(log_pdf(x)); }

private:
    struct Term {
        double log_const;
        VectorXd mean;
        MatrixXd lower;
    };
    std::vector<Term> terms_;
    Index dim_ = 0;
    // Per-thread scratch so one evaluator can be shared across workers.
    static inline thread_local std::vector<double> scratch_;
};

struct Moments {
    VectorXd mean;
    MatrixXd cov;
};

/// Mean Σwᵢμᵢ and covariance Σwᵢ[(μᵢ−μ)(μᵢ−μ)ᵀ + Pᵢ].
inline Moments mixture_moments(const GaussianMixture& gm)
{
    if (gm.empty()) {
        throw InvariantViolation("mixture_moments of an empty mixture");
    }
    const Index d = gm.dim();
    VectorXd mean = VectorXd::Zero(d);
    for (const auto& c : gm.components()) {
        mean += c.weight * c.gaussian.mean;
    }
    MatrixXd cov = MatrixXd::Zero(d, d);
    for (const auto& c : gm.components()) {
        const VectorXd dm = c.gaussian.mean - mean;
        cov += c.weight * (dm * dm.transpose() + c.gaussian.cov.matrix());
    }
    return {mean, symmetrize(cov)};
}

/// ∫ p q = ΣᵢΣⱼ wᵢvⱼ 𝒩(μᵢ; νⱼ, Pᵢ + Qⱼ).
inline double gm_inner_product(const GaussianMixture& p, const GaussianMixture& q)
{
    detail::require_dims(p.dim() == q.dim(), "gm_inner_product");
    // Each pair term is bit-identical under argument swap; summing the sorted
    // terms makes the total exactly symmetric too.
    std::vector<double> terms;
    terms.reserve(p.size() * q.size());
    for (const auto& ci : p.components()) {
        for (const auto& cj : q.components()) {
            const Gaussian pair(cj.gaussian.mean, SpdMatrix(ci.gaussian.cov.matrix() + cj.gaussian.cov.matrix()));
            terms.push_back(ci.weight * cj.weight * std::exp(log_density(pair, ci.gaussian.mean)));
        }
    }
    std::sort(terms.begin(), terms.end());
    double total = 0.0;
    for (double t : terms) {
        total += t;
    }
    return total;
}

inline double gm_inner_product(const Gaussian& p, const Gaussian& q)
{
    return gm_inner_product(GaussianMixture::single(p), GaussianMixture::single(q));
}

// Serialization: {"components": [{"weight": w, "mean": [...], "cov": [[...], ...]}, ...]}

inline nlohmann::json to_json(const Gaussian& g)
{
    nlohmann::json j;
    j["mean"] = std::vector<double>(g.mean.data(), g.mean.data() + g.mean.size());
    nlohmann::json rows = nlohmann::json::array();
    for (Index r = 0; r < g.dim(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(g.dim()));
        for (Index c = 0; c < g.dim(); ++c) {
            row[static_cast<std::size_t>(c)] = g.cov.matrix()(r, c);
        }
        rows.push_back(row);
    }
    j["cov"] = rows;
    return j;
}

inline nlohmann::json to_json(const GaussianMixture& gm)
{
    nlohmann::json comps = nlohmann::json::array();
    for (const auto& c : gm.components()) {
        auto j = to_json(c.gaussian);
        j["weight"] = c.weight;
        comps.push_back(j);
    }
    return nlohmann::json{{"components", comps}};
}

inline Gaussian gaussian_from_json(const nlohmann::json& j)
{
    try {
        const auto mean = j.at("mean").get<std::vector<double>>();
        const auto rows = j.at("cov").get<std::vector<std::vector<double>>>();
        const auto d = static_cast<Index>(mean.size());
        if (static_cast<Index>(rows.size()) != d) {
            throw ParseError("covariance row count does not match mean length");
        }
        MatrixXd cov(d, d);
        for (Index r = 0; r < d; ++r) {
            if (static_cast<Index>(rows[static_cast<std::size_t>(r)].size()) != d) {
                throw ParseError("covariance row has wrong length");
            }
            for (Index c = 0; c < d; ++c) {
                cov(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
            }
        }
        return Gaussian(Eigen::Map<const VectorXd>(mean.data(), d), cov);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(e.what());
    }
}

inline GaussianMixture mixture_from_json(const nlohmann::json& j)
{
    try {
        std::vector<MixtureComponent> comps;
        for (const auto& c : j.at("components")) {
            comps.push_back({c.at("weight").get<double>(), gaussian_from_json(c)});
        }
        return GaussianMixture(std::move(comps), 1e-9);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(e.what());
    }
}

} // namespace gmsplit

#endif // GMSPLIT_GAUSSIAN_HPP
