/**
 * @file presets.hpp
 * @brief Scenario specifications, the three named presets, model factories
 *        and the analytic truth densities used for NISE.
 */

#ifndef GMSPLIT_SCENARIOS_PRESETS_HPP
#define GMSPLIT_SCENARIOS_PRESETS_HPP

#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <string>

#include <nlohmann/json.hpp>

#include "gmsplit/errors.hpp"
#include "gmsplit/gaussian.hpp"
#include "gmsplit/hash.hpp"
#include "gmsplit/metrics.hpp"
#include "gmsplit/scenarios/cr3bp.hpp"
#include "gmsplit/scenarios/polar.hpp"
#include "gmsplit/scenarios/twobody.hpp"
#include "gmsplit/split_library.hpp"

namespace gmsplit {

enum class TruthMode { Analytic, MonteCarlo };

inline constexpr double kNrhoPeriod = 1.511111;
inline constexpr double kEarthMoonMassRatio = 1.0 / (81.30059 + 1.0);

struct ScenarioSpec {
    std::string name;
    VectorXd mean;
    MatrixXd cov;
    double tof = 0.0;          ///< time of flight (two-body, CR3BP)
    double grav_mu = 1.0;      ///< two-body gravitational parameter (canonical units)
    double mass_ratio = 0.0;   ///< CR3BP μ
    int depth = 0;
    TruthMode truth = TruthMode::Analytic;
    std::size_t samples = 0;
    std::uint64_t seed = 1;
    double abs_tol = 1e-12;
    double rel_tol = 1e-12;

    [[nodiscard]] Gaussian input() const { return Gaussian(mean, cov); }

    void validate() const
    {
        if (name != "polar" && name != "twobody" && name != "cr3bp-nrho") {
            throw ConfigError("unknown scenario '" + name + "'");
        }
        if (depth < 0) {
            throw ConfigError("depth must be nonnegative");
        }
        if (mean.size() == 0 || cov.rows() != mean.size() || cov.cols() != mean.size()) {
            throw ConfigError("scenario mean/cov dimensions disagree");
        }
        (void)input();
    }

    /// Canonical text of every field, decimals at 17 significant digits.
    [[nodiscard]] std::string canonical() const
    {
        std::string s = "name=" + name + ";mean=" + detail::fmt17(std::vector<double>(mean.data(), mean.data() + mean.size()));
        s += ";cov=[";
        for (Index r = 0; r < cov.rows(); ++r) {
            for (Index c = 0; c < cov.cols(); ++c) {
                s += (r || c ? "," : "") + detail::fmt17(cov(r, c));
            }
        }
        s += "];tof=" + detail::fmt17(tof) + ";grav_mu=" + detail::fmt17(grav_mu) + ";mass_ratio=" + detail::fmt17(mass_ratio);
        s += ";depth=" + std::to_string(depth) + ";truth=" + (truth == TruthMode::Analytic ? "analytic" : "monte-carlo");
        s += ";samples=" + std::to_string(samples) + ";seed=" + std::to_string(seed);
        s += ";abs_tol=" + detail::fmt17(abs_tol) + ";rel_tol=" + detail::fmt17(rel_tol);
        return s;
    }

    [[nodiscard]] std::string hash() const { return hex16(fnv1a64(canonical())); }
};

inline ScenarioSpec polar_preset()
{
    ScenarioSpec s;
    s.name = "polar";
    s.mean = VectorXd(2);
    s.mean << 0.0, 1000.0;
    s.cov = 250.0 * 250.0 * VectorXd((VectorXd(2) << 16.0, 1.0).finished()).asDiagonal();
    s.depth = 2;
    s.truth = TruthMode::Analytic;
    return s;
}

inline ScenarioSpec twobody_preset()
{
    ScenarioSpec s;
    s.name = "twobody";
    s.mean = VectorXd(2);
    s.mean << 1.4322, 0.0;
    s.cov = VectorXd((VectorXd(2) << 0.25 * 0.25, 0.02 * 0.02).finished()).asDiagonal();
    s.grav_mu = 1.0;
    s.tof = 2.0 * orbital_period(1.4322, 1.0);
    s.depth = 4;
    s.truth = TruthMode::Analytic;
    return s;
}

inline ScenarioSpec cr3bp_preset()
{
    ScenarioSpec s;
    s.name = "cr3bp-nrho";
    s.mean = VectorXd(6);
    s.mean << 1.022022, 0.0, -0.182097, 0.0, -0.103256, 0.0;
    s.cov = 1e-8 * VectorXd((VectorXd(6) << 1, 0, 1, 0, 0, 0).finished()).asDiagonal();
    s.cov += 1e-10 * MatrixXd::Identity(6, 6);
    s.mass_ratio = kEarthMoonMassRatio;
    s.tof = 0.5 * kNrhoPeriod;
    s.depth = 3;
    s.truth = TruthMode::MonteCarlo;
    s.samples = 100000;
    s.seed = 1;
    return s;
}

inline ScenarioSpec preset(const std::string& name)
{
    if (name == "polar") {
        return polar_preset();
    }
    if (name == "twobody") {
        return twobody_preset();
    }
    if (name == "cr3bp-nrho") {
        return cr3bp_preset();
    }
    throw ConfigError("unknown scenario preset '" + name + "'");
}

inline std::unique_ptr<NonlinearModel> make_model(const ScenarioSpec& s)
{
    if (s.name == "polar") {
        return std::make_unique<PolarModel>();
    }
    if (s.name == "twobody") {
        return std::make_unique<TwoBodyModel>(s.tof, s.grav_mu);
    }
    if (s.name == "cr3bp-nrho") {
        Cr3bpIntegratorConfig cfg;
        cfg.abs_tol = s.abs_tol;
        cfg.rel_tol = s.rel_tol;
        return std::make_unique<Cr3bpModel>(s.mass_ratio, s.tof, cfg);
    }
    throw ConfigError("unknown scenario '" + s.name + "'");
}

/// Polar truth, integrated directly in (r, θ) over [0, ‖μ‖ + 6σmax] × [−π, π].
class PolarTruth final : public TruthDensity {
public:
    explicit PolarTruth(Gaussian input)
        : input_(std::move(input))
    {}

    [[nodiscard]] Index dim() const override { return 2; }
    [[nodiscard]] double pdf(const VectorXd& z) const override { return polar_truth_pdf(input_, z(0), z(1)); }

    [[nodiscard]] std::pair<VectorXd, VectorXd> integration_box() const override
    {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(input_.cov.matrix());
        VectorXd lo(2);
        VectorXd hi(2);
        lo << 0.0, -std::numbers::pi;
        hi << input_.mean.norm() + 6.0 * std::sqrt(es.eigenvalues().maxCoeff()), std::numbers::pi;
        return {lo, hi};
    }

    void integrands(const VectorXd& u, const MixtureEvaluator& approx, double* out) const override
    {
        const double pt = pdf(u);
        out[0] = pt > 0.0 ? pt * approx.pdf(u) : 0.0;
        out[1] = pt * pt;
    }

private:
    Gaussian input_;
};

/**
 * @brief Two-body truth, integrated in whitened input coordinates y over
 *        [−6, 6]ⁿ with x = μ + Ly: the cross term is ∫p(g(x))φ(y)dy and the
 *        self term ∫φ(y)²/det L dy since the map preserves area.
 */
class TwoBodyTruth final : public TruthDensity {
public:
    TwoBodyTruth(Gaussian input, double tof, double mu)
        : input_(std::move(input))
        , model_(tof, mu)
    {}

    [[nodiscard]] Index dim() const override { return 2; }
    [[nodiscard]] double pdf(const VectorXd& z) const override
    {
        return twobody_truth_pdf(input_, z(0), z(1), model_.time_of_flight(), model_.mu());
    }

    [[nodiscard]] std::pair<VectorXd, VectorXd> integration_box() const override
    {
        return {VectorXd::Constant(2, -6.0), VectorXd::Constant(2, 6.0)};
    }

    void integrands(const VectorXd& y, const MixtureEvaluator& approx, double* out) const override
    {
        const double phi = std::exp(-0.5 * y.squaredNorm()) / (2.0 * std::numbers::pi);
        const VectorXd x = input_.mean + input_.cov.lower() * y;
        if (!(x(0) > 0.0)) {
            out[0] = 0.0;
            out[1] = 0.0;
            return;
        }
        const double det_l = input_.cov.lower().diagonal().prod();
        out[0] = approx.pdf(model_.value(x)) * phi;
        out[1] = phi * phi / det_l;
    }

private:
    Gaussian input_;
    TwoBodyModel model_;
};

inline std::unique_ptr<TruthDensity> make_truth_density(const ScenarioSpec& s)
{
    if (s.name == "polar") {
        return std::make_unique<PolarTruth>(s.input());
    }
    if (s.name == "twobody") {
        return std::make_unique<TwoBodyTruth>(s.input(), s.tof, s.grav_mu);
    }
    throw ConfigError("scenario '" + s.name + "' has no analytic truth density");
}

namespace detail {

inline VectorXd json_vector(const nlohmann::json& j, const char* key)
{
    const auto v = j.at(key).get<std::vector<double>>();
    return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

inline MatrixXd json_matrix(const nlohmann::json& j, const char* key)
{
    const auto rows = j.at(key).get<std::vector<std::vector<double>>>();
    MatrixXd m(static_cast<Index>(rows.size()), rows.empty() ? 0 : static_cast<Index>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != static_cast<std::size_t>(m.cols())) {
            throw ConfigError(std::string(key) + " rows have unequal lengths");
        }
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            m(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
        }
    }
    return m;
}

} // namespace detail

/// Overrides any field present in @p j ("mean", "cov", "tof", "grav_mu", "mass_ratio", "depth", "truth", "samples", "seed", "abs_tol", "rel_tol").
inline void apply_overrides(ScenarioSpec& s, const nlohmann::json& j)
{
    try {
        if (j.contains("mean")) {
            s.mean = detail::json_vector(j, "mean");
        }
        if (j.contains("cov")) {
            s.cov = detail::json_matrix(j, "cov");
        }
        if (j.contains("tof")) {
            s.tof = j.at("tof").get<double>();
        }
        if (j.contains("grav_mu")) {
            s.grav_mu = j.at("grav_mu").get<double>();
        }
        if (j.contains("mass_ratio")) {
            s.mass_ratio = j.at("mass_ratio").get<double>();
        }
        if (j.contains("depth")) {
            s.depth = j.at("depth").get<int>();
        }
        if (j.contains("truth")) {
            const auto t = j.at("truth").get<std::string>();
            if (t != "analytic" && t != "monte-carlo") {
                throw ConfigError("truth must be 'analytic' or 'monte-carlo'");
            }
            s.truth = t == "analytic" ? TruthMode::Analytic : TruthMode::MonteCarlo;
        }
        if (j.contains("samples")) {
            s.samples = j.at("samples").get<std::size_t>();
        }
        if (j.contains("seed")) {
            s.seed = j.at("seed").get<std::uint64_t>();
        }
        if (j.contains("abs_tol")) {
            s.abs_tol = j.at("abs_tol").get<double>();
        }
        if (j.contains("rel_tol")) {
            s.rel_tol = j.at("rel_tol").get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(e.what());
    }
}

} // namespace gmsplit

#endif // GMSPLIT_SCENARIOS_PRESETS_HPP
