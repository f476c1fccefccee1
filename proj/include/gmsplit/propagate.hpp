/**
 * @file propagate.hpp
 * @brief Mixand-wise propagation of a mixture through a nonlinear map.
 */

#ifndef GMSPLIT_PROPAGATE_HPP
#define GMSPLIT_PROPAGATE_HPP

#include <vector>

#include "gmsplit/gaussian.hpp"
#include "gmsplit/model.hpp"
#include "gmsplit/parallel.hpp"
#include "gmsplit/unscented.hpp"

namespace gmsplit {

enum class Propagation { Linear, Unscented };

namespace detail {

inline SpdMatrix propagated_cov(const MatrixXd& c)
{
    try {
        return SpdMatrix(c);
    } catch (const NotPositiveDefinite&) {
        return SpdMatrix::semidefinite(c);
    }
}

} // namespace detail

/// Each mixand 𝒩(μᵢ, Pᵢ) ↦ 𝒩(g(μᵢ), GᵢPᵢGᵢᵀ) with Gᵢ the Jacobian at μᵢ; weights unchanged.
inline GaussianMixture propagate_linear(const GaussianMixture& gm, const NonlinearModel& model, unsigned threads = 0)
{
    std::vector<MixtureComponent> out(gm.size());
    parallel_for(
        gm.size(),
        [&](std::size_t i) {
            const auto& c = gm[i];
            const auto d = model.evaluate(c.gaussian.mean, DerivativeOrder::Jacobian);
            out[i] = {c.weight, Gaussian(d.value, detail::propagated_cov(d.jacobian * c.gaussian.cov.matrix() * d.jacobian.transpose()))};
        },
        threads);
    return GaussianMixture(std::move(out), std::abs(gm.weight_sum() - 1.0) + 1e-12);
}

/// Each mixand replaced by the unscented estimate of its image.
inline GaussianMixture propagate_unscented(const GaussianMixture& gm, const NonlinearModel& model, const SutConfig& sut = {},
                                           unsigned threads = 0)
{
    std::vector<MixtureComponent> out(gm.size());
    parallel_for(
        gm.size(),
        [&](std::size_t i) {
            const auto& c = gm[i];
            const auto sl = statistical_linearization(model, c.gaussian, sut);
            out[i] = {c.weight, Gaussian(sl.output_mean, detail::propagated_cov(sl.output_cov))};
        },
        threads);
    return GaussianMixture(std::move(out), std::abs(gm.weight_sum() - 1.0) + 1e-12);
}

inline GaussianMixture propagate(const GaussianMixture& gm, const NonlinearModel& model, Propagation mode,
                                 const SutConfig& sut = {}, unsigned threads = 0)
{
    return mode == Propagation::Linear ? propagate_linear(gm, model, threads) : propagate_unscented(gm, model, sut, threads);
}

} // namespace gmsplit

#endif // GMSPLIT_PROPAGATE_HPP
