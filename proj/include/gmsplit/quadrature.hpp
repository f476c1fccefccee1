/**
 * @file quadrature.hpp
 * @brief Adaptive composite tensor-product Gauss–Legendre integration over boxes.
 */

#ifndef GMSPLIT_QUADRATURE_HPP
#define GMSPLIT_QUADRATURE_HPP

#include <cmath>
#include <functional>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "gmsplit/errors.hpp"
#include "gmsplit/linalg.hpp"
#include "gmsplit/parallel.hpp"

namespace gmsplit {

struct QuadratureOptions {
    double rel_tol = 1e-6;
    int initial_panels = 4;
    int max_panels = 512;
    unsigned threads = 0;
};

/// Integrand returning several values that are integrated together.
using MultiIntegrand = std::function<void(const VectorXd& x, double* out)>;

namespace detail {

/// Composite rule with @p panels equal panels per axis and 15 nodes per panel.
inline std::vector<double> tensor_gauss(const MultiIntegrand& f, int nout, const VectorXd& lo, const VectorXd& hi,
                                        int panels, unsigned threads)
{
    using rule = boost::math::quadrature::gauss<double, 15>;
    // Boost stores the nonnegative half of the symmetric node set.
    std::vector<double> nodes;
    std::vector<double> weights;
    const auto& ab = rule::abscissa();
    const auto& wt = rule::weights();
    for (std::size_t i = ab.size(); i-- > 0;) {
        if (ab[i] != 0.0) {
            nodes.push_back(-ab[i]);
            weights.push_back(wt[i]);
        }
    }
    for (std::size_t i = 0; i < ab.size(); ++i) {
        nodes.push_back(ab[i]);
        weights.push_back(wt[i]);
    }
    const Index d = lo.size();
    std::vector<std::vector<double>> xs(static_cast<std::size_t>(d));
    std::vector<std::vector<double>> ws(static_cast<std::size_t>(d));
    for (Index k = 0; k < d; ++k) {
        const double h = (hi(k) - lo(k)) / panels;
        for (int p = 0; p < panels; ++p) {
            const double c = lo(k) + (p + 0.5) * h;
            for (std::size_t q = 0; q < nodes.size(); ++q) {
                xs[k].push_back(c + 0.5 * h * nodes[q]);
                ws[k].push_back(0.5 * h * weights[q]);
            }
        }
    }
    const std::size_t per_axis = xs[0].size();
    // One slot per first-axis node; the remaining axes are looped inside.
    std::vector<std::vector<double>> partial(per_axis, std::vector<double>(static_cast<std::size_t>(nout), 0.0));
    parallel_for(
        per_axis,
        [&](std::size_t i0) {
            std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
            idx[0] = i0;
            VectorXd x(d);
            std::vector<double> val(static_cast<std::size_t>(nout));
            auto& acc = partial[i0];
            for (;;) {
                double w = 1.0;
                for (Index k = 0; k < d; ++k) {
                    x(k) = xs[k][idx[k]];
                    w *= ws[k][idx[k]];
                }
                f(x, val.data());
                for (int o = 0; o < nout; ++o) {
                    acc[o] += w * val[o];
                }
                Index k = 1;
                for (; k < d; ++k) {
                    if (++idx[k] < per_axis) {
                        break;
                    }
                    idx[k] = 0;
                }
                if (k >= d) {
                    break;
                }
            }
        },
        threads);
    std::vector<double> total(static_cast<std::size_t>(nout), 0.0);
    for (const auto& p : partial) {
        for (int o = 0; o < nout; ++o) {
            total[o] += p[o];
        }
    }
    return total;
}

} // namespace detail

/**
 * @brief Integrates all outputs of @p f over the box [lo, hi], doubling the
 *        panel count per axis until every output changes by less than
 *        rel_tol relative (outputs below 1e-300 in magnitude count as
 *        converged once their absolute change is that small).
 *
 * Throws QuadratureFailure if max_panels is reached first.
 */
inline std::vector<double> integrate_box(const MultiIntegrand& f, int nout, const VectorXd& lo, const VectorXd& hi,
                                         const QuadratureOptions& opts = {})
{
    detail::require_dims(lo.size() == hi.size() && lo.size() > 0, "integrate_box bounds");
    int panels = opts.initial_panels;
    auto prev = detail::tensor_gauss(f, nout, lo, hi, panels, opts.threads);
    while (panels < opts.max_panels) {
        panels *= 2;
        auto cur = detail::tensor_gauss(f, nout, lo, hi, panels, opts.threads);
        bool ok = true;
        for (int o = 0; o < nout; ++o) {
            const double diff = std::abs(cur[o] - prev[o]);
            if (!(diff <= opts.rel_tol * std::abs(cur[o]) || diff < 1e-300)) {
                ok = false;
            }
        }
        prev = std::move(cur);
        if (ok) {
            return prev;
        }
    }
    throw QuadratureFailure("box quadrature did not reach the requested relative tolerance");
}

inline double integrate_box(const std::function<double(const VectorXd&)>& f, const VectorXd& lo, const VectorXd& hi,
                            const QuadratureOptions& opts = {})
{
    return integrate_box([&](const VectorXd& x, double* out) { out[0] = f(x); }, 1, lo, hi, opts)[0];
}

} // namespace gmsplit

#endif // GMSPLIT_QUADRATURE_HPP
