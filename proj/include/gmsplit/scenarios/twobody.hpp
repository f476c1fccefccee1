/**
 * @file twobody.hpp
 * @brief Keplerian drift of mean anomaly: [a, M] ↦ [a, M + √(μ/a³)·t].
 */

#ifndef GMSPLIT_SCENARIOS_TWOBODY_HPP
#define GMSPLIT_SCENARIOS_TWOBODY_HPP

#include <cmath>
#include <numbers>

#include "gmsplit/errors.hpp"
#include "gmsplit/gaussian.hpp"
#include "gmsplit/model.hpp"

namespace gmsplit {

/// Orbital period 2π√(a³/μ).
inline double orbital_period(double a, double mu)
{
    return 2.0 * std::numbers::pi * std::sqrt(a * a * a / mu);
}

class TwoBodyModel final : public NonlinearModel {
public:
    TwoBodyModel(double tof, double mu = 1.0)
        : t_(tof)
        , mu_(mu)
    {
        if (!(mu > 0.0)) {
            throw ConfigError("gravitational parameter must be positive");
        }
    }

    [[nodiscard]] Index in_dim() const override { return 2; }
    [[nodiscard]] Index out_dim() const override { return 2; }
    [[nodiscard]] std::string name() const override { return "twobody"; }
    [[nodiscard]] double time_of_flight() const { return t_; }
    [[nodiscard]] double mu() const { return mu_; }

    [[nodiscard]] ModelDerivatives evaluate(const VectorXd& x, DerivativeOrder order) const override
    {
        ModelDerivatives d;
        d.value = value(x);
        if (order == DerivativeOrder::Value) {
            d.jacobian = MatrixXd(2, 0);
            return d;
        }
        const double a = x(0);
        const double sm = std::sqrt(mu_);
        d.jacobian = MatrixXd::Identity(2, 2);
        d.jacobian(1, 0) = -1.5 * sm * std::pow(a, -2.5) * t_;
        if (order == DerivativeOrder::Hessian) {
            Tensor3 h(2, 2);
            h(1, 0, 0) = 3.75 * sm * std::pow(a, -3.5) * t_;
            d.hessian = h;
        }
        return d;
    }

    [[nodiscard]] VectorXd value(const VectorXd& x) const override
    {
        detail::require_dims(x.size() == 2, "TwoBodyModel input");
        if (!(x(0) > 0.0)) {
            throw NonPositiveSMA("semi-major axis must be positive");
        }
        VectorXd z(2);
        z << x(0), x(1) + std::sqrt(mu_ / (x(0) * x(0) * x(0))) * t_;
        return z;
    }

private:
    double t_;
    double mu_;
};

/// Exact density of [a, M] at time t; the map preserves area, so no Jacobian factor.
inline double twobody_truth_pdf(const Gaussian& input, double a, double m, double tof, double mu = 1.0)
{
    if (!(a > 0.0)) {
        return 0.0;
    }
    VectorXd x0(2);
    x0 << a, m - std::sqrt(mu / (a * a * a)) * tof;
    return std::exp(log_density(input, x0));
}

} // namespace gmsplit

#endif // GMSPLIT_SCENARIOS_TWOBODY_HPP
