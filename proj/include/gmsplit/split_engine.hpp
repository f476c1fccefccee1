/**
 * @file split_engine.hpp
 * @brief Moment-preserving split of a Gaussian along a direction, and the
 *        recursive split operator driven by a weighted criterion.
 */

#ifndef GMSPLIT_SPLIT_ENGINE_HPP
#define GMSPLIT_SPLIT_ENGINE_HPP

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "gmsplit/errors.hpp"
#include "gmsplit/gaussian.hpp"
#include "gmsplit/linalg.hpp"
#include "gmsplit/parallel.hpp"
#include "gmsplit/split_library.hpp"

namespace gmsplit {

/**
 * @brief Replaces @p g by the library mixture laid along @p dir.
 *
 * The univariate entry is applied at the reciprocal-precision scale
 * σ² = 1/(x̂ᵀP⁻¹x̂): means μ + σμ̃ᵢx̂, covariances P − σ²(Σw̃μ̃²)x̂x̂ᵀ.
 */
inline GaussianMixture split_gaussian(const Gaussian& g, const VectorXd& dir, const UnivariateSplit& u)
{
    detail::require_dims(dir.size() == g.dim(), "split_gaussian direction");
    const double nrm = dir.norm();
    if (!(nrm > 0.0) || !std::isfinite(nrm)) {
        throw std::invalid_argument("split_gaussian: direction must be a finite nonzero vector");
    }
    const VectorXd xhat = dir / nrm;
    const double scale2 = directional_reciprocal_precision(g.cov, xhat);
    const double scale = std::sqrt(scale2);
    const SpdMatrix child_cov = rank1_downdate(g.cov, xhat, scale2 * u.mean_spread());

    std::vector<MixtureComponent> comps;
    comps.reserve(u.weights.size());
    for (std::size_t i = 0; i < u.weights.size(); ++i) {
        comps.push_back({u.weights[i], Gaussian(g.mean + (scale * u.means[i]) * xhat, child_cov)});
    }
    return GaussianMixture(std::move(comps), 1e-10);
}

struct SplitCriterion {
    double gamma = 0.5;
    double threshold = 0.0;
    int max_depth = 0;
    bool benchmark = false;  ///< split every mixand to max_depth, ignoring the criterion

    void validate() const
    {
        if (!(gamma >= 0.0 && gamma <= 1.0)) {
            throw ConfigError("gamma must lie in [0, 1]");
        }
        if (!(threshold >= 0.0)) {
            throw ConfigError("threshold must be nonnegative");
        }
        if (max_depth < 0) {
            throw ConfigError("max_depth must be nonnegative");
        }
    }
};

/// c = w^γ · objective^(1−γ).
inline double criterion_value(double weight, double objective, double gamma)
{
    return std::pow(weight, gamma) * std::pow(std::max(objective, 0.0), 1.0 - gamma);
}

struct SplitChoice {
    VectorXd direction;
    double objective = 0.0;
};

using DirectionSelector = std::function<SplitChoice(const Gaussian&)>;

/**
 * @brief Applies the split operator breadth-first until no mixand qualifies.
 *
 * A mixand at depth d < max_depth is split when benchmark mode is on or its
 * criterion exceeds the threshold. Children replace their parent in place,
 * ordered by library index, and inherit depth d + 1.
 */
inline GaussianMixture recursive_split(const GaussianMixture& gm, const DirectionSelector& select,
                                       const SplitCriterion& crit, const UnivariateSplit& u, unsigned threads = 0)
{
    crit.validate();
    struct Node {
        MixtureComponent comp;
        int depth;
        bool final;
    };
    std::vector<Node> nodes;
    for (const auto& c : gm.components()) {
        nodes.push_back({c, 0, crit.max_depth == 0});
    }
    if (!crit.benchmark && std::isinf(crit.threshold)) {
        return gm;
    }

    for (;;) {
        std::vector<std::size_t> open;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (!nodes[i].final) {
                open.push_back(i);
            }
        }
        if (open.empty()) {
            break;
        }
        std::vector<SplitChoice> choices(open.size());
        parallel_for(
            open.size(), [&](std::size_t k) { choices[k] = select(nodes[open[k]].comp.gaussian); }, threads);

        std::vector<Node> next;
        next.reserve(nodes.size() + open.size() * u.weights.size());
        std::size_t k = 0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (nodes[i].final) {
                next.push_back(nodes[i]);
                continue;
            }
            const auto& choice = choices[k++];
            const auto& node = nodes[i];
            const bool split = crit.benchmark || criterion_value(node.comp.weight, choice.objective, crit.gamma) > crit.threshold;
            if (!split) {
                next.push_back({node.comp, node.depth, true});
                continue;
            }
            const auto children = split_gaussian(node.comp.gaussian, choice.direction, u);
            for (const auto& ch : children.components()) {
                const int depth = node.depth + 1;
                next.push_back({{node.comp.weight * ch.weight, ch.gaussian}, depth, depth >= crit.max_depth});
            }
        }
        nodes = std::move(next);
    }

    std::vector<MixtureComponent> out;
    out.reserve(nodes.size());
    for (auto& n : nodes) {
        out.push_back(std::move(n.comp));
    }
    return GaussianMixture(std::move(out), std::abs(gm.weight_sum() - 1.0) + 1e-12);
}

} // namespace gmsplit

#endif // GMSPLIT_SPLIT_ENGINE_HPP
