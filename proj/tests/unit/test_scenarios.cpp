#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "gmsplit/metrics.hpp"
#include "gmsplit/monte_carlo.hpp"
#include "gmsplit/scenarios/presets.hpp"
#include "support.hpp"

using namespace gmsplit;
using namespace testing_support;

namespace {

const VectorXd& nrho_state()
{
    static const VectorXd x = (VectorXd(6) << 1.022022, 0.0, -0.182097, 0.0, -0.103256, 0.0).finished();
    return x;
}

// Central-difference Jacobian and Hessian of a model's value map.
MatrixXd fd_jacobian(const NonlinearModel& g, const VectorXd& x, const VectorXd& h)
{
    MatrixXd j(g.out_dim(), x.size());
    for (Index k = 0; k < x.size(); ++k) {
        VectorXd e = VectorXd::Zero(x.size());
        e(k) = h(k);
        j.col(k) = (g.value(x + e) - g.value(x - e)) / (2.0 * h(k));
    }
    return j;
}

double max_rel(const MatrixXd& a, const MatrixXd& b)
{
    return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), 1e-300);
}

} // namespace

TEST(PolarModel, PresetMean)
{
    const auto z = PolarModel().value((VectorXd(2) << 0.0, 1000.0).finished());
    EXPECT_DOUBLE_EQ(z(0), 1000.0);
    EXPECT_DOUBLE_EQ(z(1), std::numbers::pi / 2);
}

TEST(PolarModel, UnitPoint)
{
    const auto z = PolarModel().value((VectorXd(2) << 1.0, 0.0).finished());
    EXPECT_DOUBLE_EQ(z(0), 1.0);
    EXPECT_DOUBLE_EQ(z(1), 0.0);
}

TEST(PolarModel, OriginThrows)
{
    EXPECT_THROW((void)PolarModel().value(VectorXd::Zero(2)), OriginSingularity);
}

TEST(PolarModel, DerivativesMatchFiniteDifferences)
{
    std::mt19937_64 rng(71);
    const PolarModel g;
    for (int k = 0; k < 100; ++k) {
        const VectorXd x = random_vector(rng, 2, 5.0);
        const auto d = g.evaluate(x, DerivativeOrder::Hessian);
        const double h = 1e-5 * x.norm();
        EXPECT_LT(max_rel(d.jacobian, fd_jacobian(g, x, VectorXd::Constant(2, h))), 1e-6);
        for (Index b = 0; b < 2; ++b) {
            VectorXd e = VectorXd::Zero(2);
            e(b) = h;
            const MatrixXd fd = (g.evaluate(x + e, DerivativeOrder::Jacobian).jacobian
                                 - g.evaluate(x - e, DerivativeOrder::Jacobian).jacobian)
                                / (2.0 * h);
            MatrixXd an(2, 2);
            for (Index i = 0; i < 2; ++i) {
                for (Index a = 0; a < 2; ++a) {
                    an(i, a) = (*d.hessian)(i, a, b);
                }
            }
            EXPECT_LT(max_rel(an, fd), 1e-6);
        }
    }
}

TEST(PolarTruth, IntegratesToOne)
{
    const PolarTruth truth(polar_preset().input());
    const auto [lo, hi] = truth.integration_box();
    const double total = integrate_box([&](const VectorXd& u) { return truth.pdf(u); }, lo, hi);
    EXPECT_NEAR(total, 1.0, 1e-6);
    EXPECT_GT(truth.pdf(PolarModel().value(polar_preset().mean)), 0.0);
}

TEST(PolarTruth, RadialMarginalMatchesSamples)
{
    const auto spec = polar_preset();
    const auto in = spec.input();
    const PolarTruth truth(in);
    const auto [lo, hi] = truth.integration_box();
    // Radial CDF on a grid: f_r(r) = ∫ p(r, θ) dθ, cumulated with Simpson's rule.
    const int grid = 6000;
    const double rmax = hi(0);
    const double dr = rmax / grid;
    std::vector<double> fr(grid + 1);
    for (int i = 0; i <= grid; ++i) {
        const double r = dr * i;
        fr[i] = integrate_box([&](const VectorXd& th) { return polar_truth_pdf(in, r, th(0)); }, VectorXd::Constant(1, lo(1)),
                              VectorXd::Constant(1, hi(1)));
    }
    std::vector<double> cdf(grid + 1, 0.0);
    for (int i = 1; i <= grid; ++i) {
        cdf[i] = cdf[i - 1] + 0.5 * dr * (fr[i - 1] + fr[i]);
    }
    const auto cdf_at = [&](double r) {
        const double s = std::clamp(r / dr, 0.0, static_cast<double>(grid));
        const int i = std::min(static_cast<int>(s), grid - 1);
        return cdf[i] + (s - i) * (cdf[i + 1] - cdf[i]);
    };
    const auto mc = mc_truth_samples(PolarModel(), in, 1000000, 3);
    std::vector<double> r(mc.samples.rows());
    for (Index i = 0; i < mc.samples.rows(); ++i) {
        r[i] = mc.samples(i, 0);
    }
    const double n = static_cast<double>(r.size());
    EXPECT_LT(cvm_statistic(r, cdf_at), 10.0 / n);
}

TEST(TwoBodyModel, ZeroTimeIsIdentity)
{
    const TwoBodyModel g(0.0);
    const VectorXd x = (VectorXd(2) << 1.3, 0.4).finished();
    const auto d = g.evaluate(x, DerivativeOrder::Hessian);
    EXPECT_EQ(d.value, x);
    EXPECT_EQ(d.jacobian, MatrixXd::Identity(2, 2));
    EXPECT_EQ(d.hessian->flat().cwiseAbs().maxCoeff(), 0.0);
}

TEST(TwoBodyModel, JacobianAtPresetMean)
{
    const TwoBodyModel g(2.0 * orbital_period(1.4322, 1.0));
    const VectorXd x = (VectorXd(2) << 1.4322, 0.0).finished();
    const auto d = g.evaluate(x, DerivativeOrder::Jacobian);
    EXPECT_LT((d.jacobian - fd_jacobian(g, x, VectorXd::Constant(2, 1e-5))).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_DOUBLE_EQ(d.jacobian.determinant(), 1.0);
}

TEST(TwoBodyModel, SeededDerivativeCrossCheck)
{
    std::mt19937_64 rng(72);
    std::uniform_real_distribution<double> ua(0.8, 3.0);
    std::uniform_real_distribution<double> ut(0.0, 30.0);
    for (int k = 0; k < 100; ++k) {
        const TwoBodyModel g(ut(rng));
        const VectorXd x = (VectorXd(2) << ua(rng), 0.3).finished();
        const auto d = g.evaluate(x, DerivativeOrder::Hessian);
        EXPECT_LT((d.jacobian - fd_jacobian(g, x, VectorXd::Constant(2, 1e-6))).cwiseAbs().maxCoeff(), 1e-7 * (1.0 + d.jacobian.norm()));
        const double h = 1e-5;
        const double fd = (g.evaluate(x + h * VectorXd::Unit(2, 0), DerivativeOrder::Jacobian).jacobian(1, 0)
                           - g.evaluate(x - h * VectorXd::Unit(2, 0), DerivativeOrder::Jacobian).jacobian(1, 0))
                          / (2.0 * h);
        EXPECT_NEAR((*d.hessian)(1, 0, 0), fd, 1e-6 * (1.0 + std::abs(fd)));
        EXPECT_NEAR(std::abs(d.jacobian.determinant()), 1.0, 1e-15);
    }
}

TEST(TwoBodyModel, RejectsNonPositiveAxis)
{
    EXPECT_THROW((void)TwoBodyModel(1.0).value((VectorXd(2) << -1.0, 0.0).finished()), NonPositiveSMA);
}

TEST(TwoBodyTruth, ZeroTimeIsInputDensity)
{
    const auto in = twobody_preset().input();
    for (double a : {1.2, 1.4322, 1.7}) {
        for (double m : {-0.03, 0.0, 0.01}) {
            EXPECT_NEAR(twobody_truth_pdf(in, a, m, 0.0), pdf(in, (VectorXd(2) << a, m).finished()), 1e-12);
        }
    }
}

TEST(TwoBodyTruth, IntegratesToOne)
{
    const auto spec = twobody_preset();
    const TwoBodyTruth truth(spec.input(), spec.tof, spec.grav_mu);
    // Whitened input coordinates with the area-preserving map back to (a, M).
    const auto [lo, hi] = truth.integration_box();
    const double total = integrate_box(
        [&](const VectorXd& y) {
            const VectorXd x = spec.mean + spec.input().cov.lower() * y;
            if (!(x(0) > 0.0)) {
                return 0.0;
            }
            const VectorXd z = TwoBodyModel(spec.tof, spec.grav_mu).value(x);
            return truth.pdf(z) * spec.input().cov.lower().diagonal().prod();
        },
        lo, hi);
    EXPECT_NEAR(total, 1.0, 1e-6);
}

TEST(TwoBodyTruth, RidgePeakAtMeanMotion)
{
    const auto spec = twobody_preset();
    const auto in = spec.input();
    const double a = spec.mean(0);
    const double peak = spec.mean(1) + std::sqrt(spec.grav_mu / (a * a * a)) * spec.tof;
    double best = -1.0;
    double at = 0.0;
    for (int k = -2000; k <= 2000; ++k) {
        const double m = peak + 1e-5 * k;
        const double v = twobody_truth_pdf(in, a, m, spec.tof, spec.grav_mu);
        if (v > best) {
            best = v;
            at = m;
        }
    }
    EXPECT_NEAR(at, peak, 1e-12);
}

TEST(Cr3bp, ZeroTimeIsIdentity)
{
    const auto d = cr3bp_flow_stt(nrho_state(), 0.0, kEarthMoonMassRatio);
    EXPECT_EQ(d.state, nrho_state());
    EXPECT_EQ(d.stm, MatrixXd::Identity(6, 6));
    EXPECT_EQ(d.stt.flat().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Cr3bp, NrhoClosesAfterOnePeriod)
{
    const auto d = cr3bp_flow_stt(nrho_state(), kNrhoPeriod, kEarthMoonMassRatio, {}, DerivativeOrder::Value);
    EXPECT_LT((d.state - nrho_state()).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Cr3bp, JacobiConstantDrift)
{
    const double c0 = jacobi_constant(nrho_state(), kEarthMoonMassRatio);
    for (double frac : {0.25, 0.5, 0.75, 1.0}) {
        const auto d = cr3bp_flow_stt(nrho_state(), frac * kNrhoPeriod, kEarthMoonMassRatio, {}, DerivativeOrder::Value);
        EXPECT_LT(std::abs(jacobi_constant(d.state, kEarthMoonMassRatio) - c0), 1e-9);
    }
}

TEST(Cr3bp, StmAndSttMatchFlowDifferences)
{
    const double t = 0.5 * kNrhoPeriod;
    const double mu = kEarthMoonMassRatio;
    const auto d = cr3bp_flow_stt(nrho_state(), t, mu);
    EXPECT_LT(std::abs(d.stm.determinant() - 1.0), 1e-6);
    EXPECT_LT(d.stt.asymmetry(), 1e-12 * d.stt.flat().cwiseAbs().maxCoeff());
    const double h = 1e-7;
    for (Index b = 0; b < 6; ++b) {
        VectorXd e = VectorXd::Zero(6);
        e(b) = h;
        const auto p = cr3bp_flow_stt(nrho_state() + e, t, mu, {}, DerivativeOrder::Jacobian);
        const auto m = cr3bp_flow_stt(nrho_state() - e, t, mu, {}, DerivativeOrder::Jacobian);
        const VectorXd stm_col = (p.state - m.state) / (2.0 * h);
        EXPECT_LT((d.stm.col(b) - stm_col).norm() / stm_col.norm(), 1e-4);
        const MatrixXd dphi = (p.stm - m.stm) / (2.0 * h);
        MatrixXd psi(6, 6);
        for (Index i = 0; i < 6; ++i) {
            for (Index a = 0; a < 6; ++a) {
                psi(i, a) = d.stt(i, a, b);
            }
        }
        EXPECT_LT((psi - dphi).norm() / dphi.norm(), 1e-4);
    }
}

TEST(Cr3bp, PrimaryProximityThrows)
{
    VectorXd x = VectorXd::Zero(6);
    x(0) = 1.0 - kEarthMoonMassRatio;
    EXPECT_THROW((void)cr3bp_flow_stt(x, 0.1, kEarthMoonMassRatio), IntegrationFailure);
}

TEST(Presets, PresetParameters)
{
    const auto p = polar_preset();
    EXPECT_EQ(p.cov, (250.0 * 250.0 * VectorXd((VectorXd(2) << 16, 1).finished()).asDiagonal()).toDenseMatrix());
    EXPECT_EQ(p.depth, 2);
    const auto t = twobody_preset();
    EXPECT_EQ(t.mean(0), 1.4322);
    EXPECT_EQ(t.cov(0, 0), 0.0625);
    EXPECT_EQ(t.cov(1, 1), 0.0004);
    EXPECT_EQ(t.depth, 4);
    const auto c = cr3bp_preset();
    MatrixXd cov = 1e-10 * MatrixXd::Identity(6, 6);
    cov(0, 0) += 1e-8;
    cov(2, 2) += 1e-8;
    EXPECT_EQ(c.cov, cov);
    EXPECT_EQ(c.mass_ratio, 1.0 / (81.30059 + 1.0));
    EXPECT_EQ(c.tof, 0.5 * 1.511111);
    EXPECT_EQ(c.depth, 3);
    EXPECT_EQ(c.samples, 100000u);
}

TEST(Presets, HashesArePinned)
{
    EXPECT_EQ(polar_preset().hash(), "85cf263184c6ad5f");
    EXPECT_EQ(twobody_preset().hash(), "103dae7d4488745c");
    EXPECT_EQ(cr3bp_preset().hash(), "8bbddccd90a1fd5f");
}

TEST(Presets, OverridesApply)
{
    auto s = cr3bp_preset();
    apply_overrides(s, nlohmann::json{{"seed", 7}, {"samples", 10}, {"depth", 1}});
    EXPECT_EQ(s.seed, 7u);
    EXPECT_EQ(s.samples, 10u);
    EXPECT_EQ(s.depth, 1);
    EXPECT_NE(s.hash(), cr3bp_preset().hash());
    EXPECT_THROW(apply_overrides(s, nlohmann::json{{"truth", "guess"}}), ConfigError);
    EXPECT_THROW((void)preset("lorenz"), ConfigError);
}

TEST(MonteCarlo, ZeroSamples)
{
    const auto mc = mc_truth_samples(PolarModel(), polar_preset().input(), 0, 1);
    EXPECT_EQ(mc.samples.rows(), 0);
    EXPECT_EQ(mc.failed, 0u);
}

TEST(MonteCarlo, AffinePushforwardMoments)
{
    std::mt19937_64 rng(73);
    const MatrixXd a = random_matrix(rng, 2, 3);
    const VectorXd c = random_vector(rng, 2);
    const Gaussian in(random_vector(rng, 3), random_spd(rng, 3));
    const int n = 200000;
    const auto mc = mc_truth_samples(affine_model(a, c), in, n, 5);
    const auto m = sample_moments(mc.samples);
    const VectorXd mean = a * in.mean + c;
    const MatrixXd cov = a * in.cov.matrix() * a.transpose();
    for (Index i = 0; i < 2; ++i) {
        EXPECT_LT(std::abs(m.mean(i) - mean(i)), 3.0 * std::sqrt(cov(i, i) / n));
        for (Index j = 0; j < 2; ++j) {
            const double se = std::sqrt((cov(i, j) * cov(i, j) + cov(i, i) * cov(j, j)) / n);
            EXPECT_LT(std::abs(m.cov(i, j) - cov(i, j)), 3.0 * se);
        }
    }
}

TEST(MonteCarlo, ThreadCountAndSeedBehaviour)
{
    const auto in = polar_preset().input();
    const auto a = mc_truth_samples(PolarModel(), in, 5000, 9, 1);
    const auto b = mc_truth_samples(PolarModel(), in, 5000, 9, 3);
    const auto c = mc_truth_samples(PolarModel(), in, 5000, 10, 1);
    EXPECT_EQ(a.samples, b.samples);
    EXPECT_NE(a.samples, c.samples);
}

TEST(MonteCarlo, FailuresAreCountedAndExcluded)
{
    FunctionModel flaky(
        "flaky", 1, 1,
        [](const VectorXd& x) -> VectorXd {
            if (x(0) < 0.0) {
                throw IntegrationFailure("negative draw");
            }
            return x;
        },
        [](const VectorXd&) -> MatrixXd { return MatrixXd::Identity(1, 1); });
    const auto mc = mc_truth_samples(flaky, Gaussian(VectorXd::Zero(1), MatrixXd::Identity(1, 1)), 4000, 2);
    EXPECT_EQ(static_cast<std::size_t>(mc.samples.rows()) + mc.failed, 4000u);
    EXPECT_GT(mc.failed, 1500u);
    EXPECT_GE(mc.samples.minCoeff(), 0.0);
}

TEST(MonteCarlo, CacheRoundTrip)
{
    const auto path = (std::filesystem::temp_directory_path() / "gmsplit_mc_test.bin").string();
    const auto mc = mc_truth_samples(PolarModel(), polar_preset().input(), 3000, 4);
    SampleCacheHeader h;
    h.seed = 4;
    h.requested = 3000;
    h.spec_hash = "abc";
    write_sample_cache(path, mc, h);
    const auto back = read_sample_cache(path);
    EXPECT_EQ(back.samples, mc.samples);
    EXPECT_EQ(read_sample_cache_header(path).spec_hash, "abc");
    std::filesystem::remove(path);
    std::filesystem::remove(path + ".hdr");
}

TEST(MonteCarlo, NrhoCloudIsNonGaussian)
{
    const auto spec = cr3bp_preset();
    const auto mc = mc_truth_samples(*make_model(spec), spec.input(), spec.samples, spec.seed);
    const double n = static_cast<double>(mc.samples.rows());
    bool departs = false;
    for (Index j : {0, 1}) {
        const VectorXd col = mc.samples.col(j);
        const double mean = col.mean();
        const VectorXd c = col.array() - mean;
        const double var = c.squaredNorm() / n;
        const double skew = c.array().pow(3).mean() / std::pow(var, 1.5);
        const double kurt = c.array().pow(4).mean() / (var * var) - 3.0;
        // Normal-theory standard errors √(6/n) and √(24/n).
        departs = departs || std::abs(skew) > 3.0 * std::sqrt(6.0 / n) || std::abs(kurt) > 3.0 * std::sqrt(24.0 / n);
    }
    EXPECT_TRUE(departs);
}
