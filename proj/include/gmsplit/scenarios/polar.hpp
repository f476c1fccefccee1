/**
 * @file polar.hpp
 * @brief Cartesian → polar map [x, y] ↦ [r, θ] with θ = atan2(y, x).
 */

#ifndef GMSPLIT_SCENARIOS_POLAR_HPP
#define GMSPLIT_SCENARIOS_POLAR_HPP

#include <cmath>
#include <numbers>

#include "gmsplit/errors.hpp"
#include "gmsplit/gaussian.hpp"
#include "gmsplit/model.hpp"

namespace gmsplit {

class PolarModel final : public NonlinearModel {
public:
    [[nodiscard]] Index in_dim() const override { return 2; }
    [[nodiscard]] Index out_dim() const override { return 2; }
    [[nodiscard]] std::string name() const override { return "polar"; }

    [[nodiscard]] ModelDerivatives evaluate(const VectorXd& v, DerivativeOrder order) const override
    {
        detail::require_dims(v.size() == 2, "PolarModel input");
        const double x = v(0);
        const double y = v(1);
        const double r2 = x * x + y * y;
        if (!(r2 > 0.0)) {
            throw OriginSingularity("polar map is undefined at the origin");
        }
        const double r = std::sqrt(r2);
        ModelDerivatives d;
        d.value = VectorXd(2);
        d.value << r, std::atan2(y, x);
        if (order == DerivativeOrder::Value) {
            d.jacobian = MatrixXd(2, 0);
            return d;
        }
        d.jacobian = MatrixXd(2, 2);
        d.jacobian << x / r, y / r, -y / r2, x / r2;
        if (order == DerivativeOrder::Hessian) {
            Tensor3 h(2, 2);
            const double r3 = r2 * r;
            const double r4 = r2 * r2;
            MatrixXd hr(2, 2);
            hr << y * y / r3, -x * y / r3, -x * y / r3, x * x / r3;
            MatrixXd ht(2, 2);
            ht << 2.0 * x * y / r4, (y * y - x * x) / r4, (y * y - x * x) / r4, -2.0 * x * y / r4;
            h.set_slice(0, hr);
            h.set_slice(1, ht);
            d.hessian = h;
        }
        return d;
    }

    [[nodiscard]] VectorXd value(const VectorXd& v) const override
    {
        detail::require_dims(v.size() == 2, "PolarModel input");
        if (v(0) == 0.0 && v(1) == 0.0) {
            throw OriginSingularity("polar map is undefined at the origin");
        }
        VectorXd z(2);
        z << std::hypot(v(0), v(1)), std::atan2(v(1), v(0));
        return z;
    }
};

/// Exact density of [r, θ] when [x, y] ~ input: 𝒩([r cosθ, r sinθ]) · r on r > 0, θ ∈ (−π, π].
inline double polar_truth_pdf(const Gaussian& input, double r, double theta)
{
    if (!(r > 0.0) || theta <= -std::numbers::pi || theta > std::numbers::pi) {
        return 0.0;
    }
    VectorXd x(2);
    x << r * std::cos(theta), r * std::sin(theta);
    return std::exp(log_density(input, x)) * r;
}

} // namespace gmsplit

#endif // GMSPLIT_SCENARIOS_POLAR_HPP
