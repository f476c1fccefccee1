/**
 * @file cr3bp.hpp
 * @brief Circular restricted three-body flow in the rotating frame with its
 *        first- and second-order state transition tensors.
 *
 * Nondimensional units; primaries at (−μ, 0, 0) and (1 − μ, 0, 0).
 * State [x, y, z, ẋ, ẏ, ż].
 */

#ifndef GMSPLIT_SCENARIOS_CR3BP_HPP
#define GMSPLIT_SCENARIOS_CR3BP_HPP

#include <array>
#include <cmath>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "gmsplit/errors.hpp"
#include "gmsplit/model.hpp"

namespace gmsplit {

struct Cr3bpIntegratorConfig {
    double abs_tol = 1e-12;
    double rel_tol = 1e-12;
    double initial_step = 1e-4;
    std::size_t max_steps = 2'000'000;
    double min_primary_distance = 1e-6;
};

struct Cr3bpDerivatives {
    VectorXd state;   ///< φ_t(x₀)
    MatrixXd stm;     ///< Φ = ∂φ/∂x₀
    Tensor3 stt;      ///< Ψ[i][a][b] = ∂²φⁱ/∂x₀ᵃ∂x₀ᵇ
};

namespace detail {

struct Cr3bpPartials {
    std::array<double, 3> accel{};   ///< gradient of the effective potential
    double hess[3][3]{};             ///< second partials of the potential
    double third[3][3][3]{};         ///< third partials (gravity terms only)
};

inline Cr3bpPartials cr3bp_partials(const double* s, double mu, double min_dist, int order)
{
    Cr3bpPartials out;
    const double masses[2] = {1.0 - mu, mu};
    const double centers[2] = {-mu, 1.0 - mu};
    out.accel = {s[0], s[1], 0.0};
    if (order >= 1) {
        out.hess[0][0] = 1.0;
        out.hess[1][1] = 1.0;
    }
    for (int b = 0; b < 2; ++b) {
        const double d[3] = {s[0] - centers[b], s[1], s[2]};
        const double rho2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        const double rho = std::sqrt(rho2);
        if (!(rho > min_dist)) {
            throw IntegrationFailure("trajectory came within the primary-distance floor");
        }
        const double m = masses[b];
        const double r3 = rho2 * rho;
        const double r5 = r3 * rho2;
        for (int i = 0; i < 3; ++i) {
            out.accel[i] -= m * d[i] / r3;
        }
        if (order >= 1) {
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) {
                    out.hess[i][j] += m * (3.0 * d[i] * d[j] / r5 - (i == j ? 1.0 / r3 : 0.0));
                }
            }
        }
        if (order >= 2) {
            const double r7 = r5 * rho2;
            for (int i = 0; i < 3; ++i) {
                for (int j = 0; j < 3; ++j) {
                    for (int k = 0; k < 3; ++k) {
                        const double delta = (i == j ? d[k] : 0.0) + (i == k ? d[j] : 0.0) + (j == k ? d[i] : 0.0);
                        out.third[i][j][k] += m * (-15.0 * d[i] * d[j] * d[k] / r7 + 3.0 * delta / r5);
                    }
                }
            }
        }
    }
    return out;
}

/// State, then 36 STM entries (row-major), then 216 STT entries [i][a][b].
struct Cr3bpSystem {
    double mu;
    int order;
    double min_dist;

    void operator()(const std::vector<double>& s, std::vector<double>& ds, double /*t*/) const
    {
        const auto p = cr3bp_partials(s.data(), mu, min_dist, order);
        ds[0] = s[3];
        ds[1] = s[4];
        ds[2] = s[5];
        ds[3] = 2.0 * s[4] + p.accel[0];
        ds[4] = -2.0 * s[3] + p.accel[1];
        ds[5] = p.accel[2];
        if (order < 1) {
            return;
        }
        // A = [[0, I], [Ω_rr, C]] with C the Coriolis block.
        double a[6][6] = {};
        for (int i = 0; i < 3; ++i) {
            a[i][i + 3] = 1.0;
            for (int j = 0; j < 3; ++j) {
                a[i + 3][j] = p.hess[i][j];
            }
        }
        a[3][4] = 2.0;
        a[4][3] = -2.0;
        const double* phi = s.data() + 6;
        double* dphi = ds.data() + 6;
        for (int i = 0; i < 6; ++i) {
            for (int c = 0; c < 6; ++c) {
                double acc = 0.0;
                for (int j = 0; j < 6; ++j) {
                    acc += a[i][j] * phi[6 * j + c];
                }
                dphi[6 * i + c] = acc;
            }
        }
        if (order < 2) {
            return;
        }
        const double* psi = s.data() + 42;
        double* dpsi = ds.data() + 42;
        for (int i = 0; i < 6; ++i) {
            for (int u = 0; u < 6; ++u) {
                for (int v = 0; v < 6; ++v) {
                    double acc = 0.0;
                    for (int j = 0; j < 6; ++j) {
                        acc += a[i][j] * psi[36 * j + 6 * u + v];
                    }
                    if (i >= 3) {
                        // Only position-position second partials of F are nonzero.
                        for (int j = 0; j < 3; ++j) {
                            for (int k = 0; k < 3; ++k) {
                                acc += p.third[i - 3][j][k] * phi[6 * j + u] * phi[6 * k + v];
                            }
                        }
                    }
                    dpsi[36 * i + 6 * u + v] = acc;
                }
            }
        }
    }
};

} // namespace detail

/// Jacobi constant C = 2Ω − v², Ω = (x² + y²)/2 + (1−μ)/r₁ + μ/r₂.
inline double jacobi_constant(const VectorXd& s, double mu)
{
    const double r1 = std::sqrt((s(0) + mu) * (s(0) + mu) + s(1) * s(1) + s(2) * s(2));
    const double r2 = std::sqrt((s(0) - 1.0 + mu) * (s(0) - 1.0 + mu) + s(1) * s(1) + s(2) * s(2));
    const double omega = 0.5 * (s(0) * s(0) + s(1) * s(1)) + (1.0 - mu) / r1 + mu / r2;
    return 2.0 * omega - s.segment(3, 3).squaredNorm();
}

/**
 * @brief Integrates the flow and, up to @p order, its variational equations
 *        Φ̇ = AΦ and Ψ̇ = AΨ + F⁽²⁾(Φ, Φ).
 */
inline Cr3bpDerivatives cr3bp_flow_stt(const VectorXd& x0, double t, double mu, const Cr3bpIntegratorConfig& cfg = {},
                                       DerivativeOrder order = DerivativeOrder::Hessian)
{
    detail::require_dims(x0.size() == 6, "cr3bp_flow_stt state");
    const int ord = static_cast<int>(order);
    std::vector<double> s(ord == 0 ? 6 : (ord == 1 ? 42 : 258), 0.0);
    for (int i = 0; i < 6; ++i) {
        s[i] = x0(i);
    }
    if (ord >= 1) {
        for (int i = 0; i < 6; ++i) {
            s[6 + 7 * i] = 1.0;
        }
    }
    // Validates the start point against the primary-distance floor.
    (void)detail::cr3bp_partials(s.data(), mu, cfg.min_primary_distance, 0);

    if (t != 0.0) {
        namespace ode = boost::numeric::odeint;
        using stepper_t = ode::runge_kutta_dopri5<std::vector<double>>;
        auto stepper = ode::make_controlled(cfg.abs_tol, cfg.rel_tol, stepper_t());
        const detail::Cr3bpSystem sys{mu, ord, cfg.min_primary_distance};
        double tc = 0.0;
        double dt = std::copysign(std::min(cfg.initial_step, std::abs(t)), t);
        std::size_t steps = 0;
        while (std::abs(t - tc) > 1e-15 * std::abs(t)) {
            if (std::abs(dt) > std::abs(t - tc)) {
                dt = t - tc;
            }
            if (++steps > cfg.max_steps) {
                throw IntegrationFailure("step limit reached before the final time");
            }
            if (!(std::abs(dt) > 1e-14 * std::max(1.0, std::abs(t)))) {
                throw IntegrationFailure("step size underflow");
            }
            stepper.try_step(sys, s, tc, dt);
        }
        for (double v : s) {
            if (!std::isfinite(v)) {
                throw IntegrationFailure("non-finite state after integration");
            }
        }
    }

    Cr3bpDerivatives out;
    out.state = Eigen::Map<const VectorXd>(s.data(), 6);
    out.stm = MatrixXd::Zero(6, 0);
    if (ord >= 1) {
        out.stm = Eigen::Map<const Eigen::Matrix<double, 6, 6, Eigen::RowMajor>>(s.data() + 6);
    }
    if (ord >= 2) {
        Tensor3 stt(6, 6);
        for (int i = 0; i < 6; ++i) {
            for (int u = 0; u < 6; ++u) {
                for (int v = 0; v < 6; ++v) {
                    stt(i, u, v) = s[42 + 36 * i + 6 * u + v];
                }
            }
        }
        // The equations keep Ψ symmetric in (a, b) analytically; remove round-off asymmetry.
        out.stt = stt.symmetrized();
    }
    return out;
}

class Cr3bpModel final : public NonlinearModel {
public:
    Cr3bpModel(double mass_ratio, double tof, Cr3bpIntegratorConfig cfg = {})
        : mu_(mass_ratio)
        , t_(tof)
        , cfg_(cfg)
    {
        if (!(mass_ratio > 0.0 && mass_ratio < 0.5)) {
            throw ConfigError("mass ratio must lie in (0, 0.5)");
        }
    }

    [[nodiscard]] Index in_dim() const override { return 6; }
    [[nodiscard]] Index out_dim() const override { return 6; }
    [[nodiscard]] std::string name() const override { return "cr3bp"; }
    [[nodiscard]] double mass_ratio() const { return mu_; }
    [[nodiscard]] double time_of_flight() const { return t_; }
    [[nodiscard]] const Cr3bpIntegratorConfig& integrator() const { return cfg_; }

    [[nodiscard]] ModelDerivatives evaluate(const VectorXd& x, DerivativeOrder order) const override
    {
        auto f = cr3bp_flow_stt(x, t_, mu_, cfg_, order);
        ModelDerivatives d;
        d.value = std::move(f.state);
        d.jacobian = order >= DerivativeOrder::Jacobian ? std::move(f.stm) : MatrixXd(6, 0);
        if (order == DerivativeOrder::Hessian) {
            d.hessian = std::move(f.stt);
        }
        return d;
    }

    [[nodiscard]] VectorXd value(const VectorXd& x) const override
    {
        return cr3bp_flow_stt(x, t_, mu_, cfg_, DerivativeOrder::Value).state;
    }

private:
    double mu_;
    double t_;
    Cr3bpIntegratorConfig cfg_;
};

} // namespace gmsplit

#endif // GMSPLIT_SCENARIOS_CR3BP_HPP
