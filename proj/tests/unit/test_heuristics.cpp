#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "gmsplit/heuristics.hpp"
#include "gmsplit/scenarios/polar.hpp"
#include "gmsplit/scenarios/twobody.hpp"
#include "support.hpp"

using namespace gmsplit;
using namespace testing_support;

namespace {

// g(x) = c + A x + ½ H[x, x] + κ Σ sin(xᵢ) e₀, with a sine term so the sigma-point rules see more than a quadratic.
FunctionModel quadratic_model(const VectorXd& c, const MatrixXd& a, const Tensor3& h, double kappa = 0.0)
{
    const Index n = a.cols();
    const Index m = a.rows();
    return FunctionModel(
        "quadratic", n, m,
        [=](const VectorXd& x) -> VectorXd {
            VectorXd z = c + a * x + 0.5 * contract_vv(h, x);
            z(0) += kappa * x.array().sin().sum();
            return z;
        },
        [=](const VectorXd& x) -> MatrixXd {
            MatrixXd j = a + contract_v(h, x);
            j.row(0) += kappa * x.array().cos().matrix().transpose();
            return j;
        },
        [=](const VectorXd& x) {
            Tensor3 t = h;
            for (Index i = 0; i < n; ++i) {
                t(0, i, i) -= kappa * std::sin(x(i));
            }
            return t;
        });
}

struct Instance {
    Gaussian g;
    VectorXd c;
    MatrixXd a;
    Tensor3 h;
};

Instance random_instance(std::mt19937_64& rng, Index n, Index m)
{
    const MatrixXd p = random_spd(rng, n) * 0.05;
    return {Gaussian(random_vector(rng, n, 0.3), p), random_vector(rng, m), random_matrix(rng, m, n), random_tensor(rng, m, n)};
}

// Objective of each rule for a unit direction u, computed from explicit inverses and contractions.
double oracle(HeuristicKind kind, const NonlinearModel& model, const Gaussian& g, const VectorXd& u)
{
    const auto d = model.evaluate(g.mean, DerivativeOrder::Hessian);
    const MatrixXd& p = g.cov.matrix();
    const MatrixXd pinv = p.inverse();
    const VectorXd x = u / std::sqrt(u.dot(pinv * u));  // on the 1-σ ellipsoid
    const MatrixXd& jac = d.jacobian;
    const Tensor3& h = *d.hessian;
    const MatrixXd pz = jac * p * jac.transpose();
    const MatrixXd pzinv = pz.inverse();
    const auto gain = [&] { return statistical_linearization(model, g).gain; };
    const MatrixXd lchol = Eigen::LLT<MatrixXd>(p).matrixL();
    const MatrixXd lz = Eigen::LLT<MatrixXd>(pz).matrixL();
    const MatrixXd lzi = lz.inverse();
    switch (kind) {
    case HeuristicKind::MaxVar: return std::sqrt(u.dot(p * u));
    case HeuristicKind::Fos: return (jac * u).norm();
    case HeuristicKind::Sos: return contract_vv(h, u).norm();
    case HeuristicKind::Solc: return contract_v(h, u).norm();
    case HeuristicKind::Sadl: return ((gain() - jac) * u).norm();
    case HeuristicKind::Usfos: return (jac * x).norm();
    case HeuristicKind::Ussolc: return contract_v(h, x).norm();
    case HeuristicKind::Safos: {
        const MatrixXd mm = lchol.transpose() * jac.transpose() * jac * lchol;
        const MatrixXd a = mm.trace() * p + 2.0 * p * jac.transpose() * jac * p;
        const double n = static_cast<double>(u.size());
        return u.dot(a * u) / (n * (n + 2.0));
    }
    case HeuristicKind::Sasos: return u.dot(sasos_quadratic_form(h, p, MatrixXd::Identity(jac.rows(), jac.rows())) * u);
    case HeuristicKind::Wsasos: return u.dot(sasos_quadratic_form(h, p, pzinv) * u);
    case HeuristicKind::Wussos: {
        const VectorXd y = contract_vv(h, x);
        return std::sqrt(y.dot(pzinv * y));
    }
    case HeuristicKind::Wussolc: return (lzi * contract_v(h, x) * lchol).squaredNorm();
    case HeuristicKind::Wussadl: return (lzi * (gain() - jac) * x).norm();
    case HeuristicKind::Alodt: break;
    }
    return 0.0;
}

} // namespace

TEST(HeuristicNames, RoundTrip)
{
    for (auto k : kAllHeuristics) {
        EXPECT_EQ(parse_heuristic(to_string(k)), k);
    }
    EXPECT_THROW((void)parse_heuristic("wusfos"), ConfigError);
}

TEST(SplitDirection, FosDiagonalJacobian)
{
    ModelDerivatives d;
    d.value = VectorXd::Zero(2);
    d.jacobian = VectorXd((VectorXd(2) << 2, 1).finished()).asDiagonal();
    const Gaussian g(VectorXd::Zero(2), MatrixXd::Identity(2, 2));
    const auto r = split_direction(HeuristicKind::Fos, d, g);
    EXPECT_NEAR(std::abs(r.direction(0)), 1.0, 1e-14);
    EXPECT_NEAR(r.objective_value, 2.0, 1e-14);
}

TEST(SplitDirection, UsfosIdentityJacobianFollowsCovariance)
{
    ModelDerivatives d;
    d.value = VectorXd::Zero(2);
    d.jacobian = MatrixXd::Identity(2, 2);
    const Gaussian g(VectorXd::Zero(2), VectorXd((VectorXd(2) << 4, 1).finished()).asDiagonal().toDenseMatrix());
    const auto r = split_direction(HeuristicKind::Usfos, d, g);
    EXPECT_NEAR(r.direction(0), 1.0, 1e-14);
    EXPECT_NEAR(r.objective_value, 2.0, 1e-14);
}

TEST(SplitDirection, MaxVarPolarCovariance)
{
    ModelDerivatives d;
    d.value = VectorXd::Zero(2);
    d.jacobian = MatrixXd::Identity(2, 2);
    const Gaussian g(VectorXd::Zero(2), (250.0 * 250.0 * VectorXd((VectorXd(2) << 16, 1).finished()).asDiagonal()).toDenseMatrix());
    const auto r = split_direction(HeuristicKind::MaxVar, d, g);
    EXPECT_NEAR(r.direction(0), 1.0, 1e-14);
}

TEST(SplitDirection, FosTwoBodyMagnitudes)
{
    const TwoBodyModel model(2.0 * orbital_period(1.4322, 1.0));
    const Gaussian g((VectorXd(2) << 1.4322, 0.0).finished(),
                     VectorXd((VectorXd(2) << 0.0625, 0.0004).finished()).asDiagonal().toDenseMatrix());
    const auto r = select_direction(HeuristicKind::Fos, model, g);
    // ∂M/∂a < 0 fixes the relative sign of the two components.
    EXPECT_NEAR(r.direction(0), 0.997158, 1e-4);
    EXPECT_NEAR(r.direction(1), -0.0753323, 1e-4);
}

TEST(SplitDirection, MissingInputsAreReported)
{
    ModelDerivatives d;
    d.value = VectorXd::Zero(2);
    d.jacobian = MatrixXd::Identity(2, 2);
    const Gaussian g(VectorXd::Zero(2), MatrixXd::Identity(2, 2));
    EXPECT_THROW((void)split_direction(HeuristicKind::Sos, d, g), MissingHessian);
    EXPECT_THROW((void)split_direction(HeuristicKind::Sadl, d, g), MissingSigma);
    EXPECT_THROW((void)split_direction(HeuristicKind::Alodt, d, g), MissingSigma);
}

TEST(SplitDirection, WhitenedKindsNeedInvertibleOutputCovariance)
{
    ModelDerivatives d;
    d.value = VectorXd::Zero(2);
    d.jacobian = (MatrixXd(2, 2) << 1, 1, 1, 1).finished();
    d.hessian = Tensor3(2, 2);
    const Gaussian g(VectorXd::Zero(2), MatrixXd::Identity(2, 2));
    for (auto k : {HeuristicKind::Wussos, HeuristicKind::Wussolc, HeuristicKind::Wsasos}) {
        EXPECT_THROW((void)split_direction(k, d, g), SingularOutputCovariance);
    }
    EXPECT_THROW((void)split_direction(HeuristicKind::Wussadl, d, g, {}, MatrixXd::Identity(2, 2)),
                 SingularOutputCovariance);
}

TEST(SplitDirection, RandomProbeOracle)
{
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 4; ++trial) {
        // Square G so the whitened kinds have an invertible output covariance.
        const Index n = 2 + trial % 2;
        const Index m = n;
        const auto inst = random_instance(rng, n, m);
        const auto model = quadratic_model(inst.c, inst.a, inst.h, 0.3);
        std::vector<VectorXd> probes;
        for (int k = 0; k < 10000; ++k) {
            probes.push_back(random_unit(rng, n));
        }
        for (auto kind : kAllHeuristics) {
            if (kind == HeuristicKind::Alodt) {
                continue;
            }
            SCOPED_TRACE(to_string(kind));
            const auto r = select_direction(kind, model, inst.g);
            EXPECT_NEAR(r.direction.norm(), 1.0, 1e-12);
            const double at = oracle(kind, model, inst.g, r.direction);
            EXPECT_LT(rel_err(r.objective_value, at), 1e-8);
            double best = 0.0;
            for (const auto& u : probes) {
                best = std::max(best, oracle(kind, model, inst.g, u));
            }
            EXPECT_GE(at, best * (1.0 - 1e-9));
        }
    }
}

TEST(SplitDirection, ReflectionInvariance)
{
    std::mt19937_64 rng(32);
    const auto inst = random_instance(rng, 3, 3);
    const auto model = quadratic_model(inst.c, inst.a, inst.h);
    const auto reflected = quadratic_model(-inst.c, -inst.a, inst.h.transformed(-MatrixXd::Identity(3, 3), MatrixXd::Identity(3, 3)));
    for (auto kind : kAllHeuristics) {
        SCOPED_TRACE(to_string(kind));
        const auto a = select_direction(kind, model, inst.g).direction;
        const auto b = select_direction(kind, reflected, inst.g).direction;
        EXPECT_LT((a - b).norm(), 1e-8);
    }
}

TEST(SplitDirection, WhitenedKindsAreScaleInvariant)
{
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 5; ++trial) {
        const auto inst = random_instance(rng, 3, 3);
        const auto model = quadratic_model(inst.c, inst.a, inst.h, 0.2);
        // z' = S_out z(S_in⁻¹ x'), x' = S_in x.
        const VectorXd s_out = (VectorXd(3) << 1e3, 1.0, 1.0).finished();
        const VectorXd s_in = (VectorXd(3) << 1.0, 1e-2, 1.0).finished();
        FunctionModel scaled(
            "scaled", 3, 3,
            [&](const VectorXd& x) -> VectorXd { return s_out.asDiagonal() * model.value(x.cwiseQuotient(s_in)); },
            [&](const VectorXd& x) -> MatrixXd {
                return s_out.asDiagonal() * model.evaluate(x.cwiseQuotient(s_in), DerivativeOrder::Jacobian).jacobian
                       * s_in.cwiseInverse().asDiagonal();
            },
            [&](const VectorXd& x) {
                const auto h = *model.evaluate(x.cwiseQuotient(s_in), DerivativeOrder::Hessian).hessian;
                return h.transformed(s_out.asDiagonal(), s_in.cwiseInverse().asDiagonal());
            });
        const Gaussian gs(s_in.asDiagonal() * inst.g.mean,
                          (s_in.asDiagonal() * inst.g.cov.matrix() * s_in.asDiagonal()).eval());
        for (auto kind : {HeuristicKind::Wussos, HeuristicKind::Wussolc, HeuristicKind::Wussadl, HeuristicKind::Wsasos}) {
            SCOPED_TRACE(to_string(kind));
            const VectorXd a = select_direction(kind, model, inst.g).direction;
            const VectorXd b = select_direction(kind, scaled, gs).direction;
            const VectorXd back = b.cwiseQuotient(s_in).normalized();
            EXPECT_LT(axial_angle(a, back), 1e-6);
        }
    }
}

TEST(SplitDirection, WhitenedFirstOrderIsDegenerate)
{
    std::mt19937_64 rng(34);
    for (int trial = 0; trial < 100; ++trial) {
        const Index n = 2 + trial % 3;
        const MatrixXd jac = random_matrix(rng, n, n);
        const MatrixXd p = random_spd(rng, n);
        const MatrixXd pzinv = (jac * p * jac.transpose()).inverse();
        const MatrixXd l = Eigen::LLT<MatrixXd>(p).matrixL();
        double lo = 1e300;
        double hi = 0.0;
        for (int k = 0; k < 1000; ++k) {
            const VectorXd x = l * random_unit(rng, n);
            const VectorXd z = jac * x;
            const double v = z.dot(pzinv * z);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        EXPECT_LT((hi - lo) / hi, 1e-10);
    }
}

TEST(SplitDirection, WhitenedLinearizationFrobeniusNorm)
{
    std::mt19937_64 rng(35);
    for (int trial = 0; trial < 20; ++trial) {
        const Index n = 2 + trial % 3;
        const MatrixXd jac = random_matrix(rng, n, n);
        const SpdMatrix p(random_spd(rng, n));
        const MatrixXd lzi = detail::lower_inverse(detail::output_root(jac, p));
        EXPECT_NEAR((lzi * jac * p.lower()).squaredNorm(), static_cast<double>(n), 1e-9);
    }
}

TEST(SplitDirection, IsotropicCollapses)
{
    std::mt19937_64 rng(36);
    for (int trial = 0; trial < 100; ++trial) {
        const Index n = 2 + trial % 2;
        auto inst = random_instance(rng, n, 2 + trial % 3);
        inst.g = Gaussian(inst.g.mean, (0.3 * MatrixXd::Identity(n, n)).eval());
        const auto model = quadratic_model(inst.c, inst.a, inst.h);
        const auto dir = [&](HeuristicKind k) { return select_direction(k, model, inst.g).direction; };
        EXPECT_LT(axial_angle(dir(HeuristicKind::Safos), dir(HeuristicKind::Fos)), 1e-6);
        EXPECT_LT(axial_angle(dir(HeuristicKind::Usfos), dir(HeuristicKind::Fos)), 1e-6);
        EXPECT_LT(axial_angle(dir(HeuristicKind::Ussolc), dir(HeuristicKind::Solc)), 1e-6);
    }
}

TEST(SplitDirection, PolarProbeSosHasTwoMaximaAroundSolc)
{
    const PolarModel model;
    const auto h = *model.evaluate((VectorXd(2) << 1.0, 0.0).finished(), DerivativeOrder::Hessian).hessian;
    const int n = 10000;
    std::vector<double> sos(n);
    std::vector<double> solc(n);
    for (int k = 0; k < n; ++k) {
        const double a = std::numbers::pi * k / n;
        const VectorXd u = (VectorXd(2) << std::cos(a), std::sin(a)).finished();
        sos[k] = contract_vv(h, u).norm();
        solc[k] = contract_v(h, u).norm();
    }
    // Local maxima on the half circle (periodic).
    std::vector<int> peaks;
    for (int k = 0; k < n; ++k) {
        if (sos[k] > sos[(k + n - 1) % n] && sos[k] >= sos[(k + 1) % n]) {
            peaks.push_back(k);
        }
    }
    ASSERT_EQ(peaks.size(), 2u);
    EXPECT_NEAR(sos[peaks[0]], sos[peaks[1]], 1e-6);
    const int solc_peak = static_cast<int>(std::max_element(solc.begin(), solc.end()) - solc.begin());
    EXPECT_GT(solc_peak, peaks[0]);
    EXPECT_LT(solc_peak, peaks[1]);
    const double sep = std::numbers::pi * (peaks[1] - peaks[0]) / n;
    EXPECT_GT(std::abs(sep - std::numbers::pi / 2), 0.1);
}

TEST(StatisticalLinearization, AffineIsExact)
{
    std::mt19937_64 rng(37);
    const MatrixXd a = random_matrix(rng, 3, 2);
    const auto model = affine_model(a, random_vector(rng, 3));
    const Gaussian g(random_vector(rng, 2), random_spd(rng, 2));
    const auto sl = statistical_linearization(model, g);
    EXPECT_LT((sl.gain - a).norm(), 1e-10);
    EXPECT_LT(sl.error_cov.norm(), 1e-9);
}

TEST(StatisticalLinearization, PolarDiffersFromJacobian)
{
    const PolarModel model;
    const Gaussian g((VectorXd(2) << 0.0, 1000.0).finished(),
                     (250.0 * 250.0 * VectorXd((VectorXd(2) << 16, 1).finished()).asDiagonal()).toDenseMatrix());
    const auto sl = statistical_linearization(model, g);
    EXPECT_GT((sl.gain - model.evaluate(g.mean, DerivativeOrder::Jacobian).jacobian).norm(), 1e-6);
}

TEST(StatisticalLinearization, EvenQuadraticHasZeroGain)
{
    FunctionModel sq(
        "square", 1, 1, [](const VectorXd& x) -> VectorXd { return x.cwiseProduct(x); },
        [](const VectorXd& x) -> MatrixXd { return 2.0 * x; });
    const auto sl = statistical_linearization(sq, Gaussian(VectorXd::Zero(1), MatrixXd::Identity(1, 1)));
    EXPECT_NEAR(sl.gain(0, 0), 0.0, 1e-14);
}

TEST(SigmaPoints, OneDimensionalStandardSet)
{
    const SutConfig cfg;
    const auto sp = sut_sigma_points(Gaussian(VectorXd::Zero(1), MatrixXd::Identity(1, 1)), cfg);
    const double lam = cfg.lambda(1);
    ASSERT_EQ(sp.points.cols(), 3);
    EXPECT_EQ(sp.points(0, 0), 0.0);
    EXPECT_NEAR(sp.points(0, 1), std::sqrt(lam + 1.0), 1e-15);
    EXPECT_NEAR(sp.points(0, 2), -std::sqrt(lam + 1.0), 1e-15);
    EXPECT_NEAR(sp.mean_weights(0), lam / (1.0 + lam), 1e-15);
    EXPECT_NEAR(sp.cov_weights(0), lam / (1.0 + lam) + 1.0 - 0.25 + 2.0, 1e-15);
    EXPECT_NEAR(sp.mean_weights(1), 0.5 / (1.0 + lam), 1e-15);
}

TEST(SigmaPoints, Reconstruction)
{
    std::mt19937_64 rng(38);
    for (int k = 0; k < 50; ++k) {
        const Index n = 1 + k % 6;
        const Gaussian g(random_vector(rng, n), random_spd(rng, n));
        const auto sp = sut_sigma_points(g);
        EXPECT_NEAR(sp.mean_weights.sum(), 1.0, 1e-12);
        const VectorXd mean = sp.points * sp.mean_weights;
        EXPECT_LT((mean - g.mean).norm(), 1e-12 * (1.0 + g.mean.norm()));
        MatrixXd spread = MatrixXd::Zero(n, n);
        for (Index c = 1; c < sp.points.cols(); ++c) {
            const VectorXd d = sp.points.col(c) - g.mean;
            spread += sp.mean_weights(c) * d * d.transpose();
        }
        EXPECT_LT((spread - g.cov.matrix()).norm() / g.cov.matrix().norm(), 1e-10);
    }
}

TEST(Alodt, AffineFallsBackToMaxVar)
{
    std::mt19937_64 rng(39);
    const auto model = affine_model(random_matrix(rng, 2, 3), random_vector(rng, 2));
    const Gaussian g(random_vector(rng, 3), random_spd(rng, 3));
    const auto a = select_direction(HeuristicKind::Alodt, model, g);
    const auto b = select_direction(HeuristicKind::MaxVar, model, g);
    EXPECT_LT(axial_angle(a.direction, b.direction), 1e-12);
}

TEST(Alodt, PolarPicksMaxVarAxis)
{
    const PolarModel model;
    const Gaussian g((VectorXd(2) << 0.0, 1000.0).finished(),
                     (250.0 * 250.0 * VectorXd((VectorXd(2) << 16, 1).finished()).asDiagonal()).toDenseMatrix());
    const auto a = select_direction(HeuristicKind::Alodt, model, g);
    const auto b = select_direction(HeuristicKind::MaxVar, model, g);
    EXPECT_LT(axial_angle(a.direction, b.direction), 1e-12);
}

TEST(Alodt, QuadraticAlongFirstAxis)
{
    FunctionModel sq(
        "x1sq", 2, 1, [](const VectorXd& x) -> VectorXd { return VectorXd::Constant(1, x(0) * x(0)); },
        [](const VectorXd& x) -> MatrixXd { return (MatrixXd(1, 2) << 2.0 * x(0), 0.0).finished(); });
    // The larger variance sits on the second axis, so only the score can pick e₁.
    const Gaussian g(VectorXd::Zero(2), VectorXd((VectorXd(2) << 1, 3).finished()).asDiagonal().toDenseMatrix());
    const auto r = select_direction(HeuristicKind::Alodt, sq, g);
    EXPECT_NEAR(std::abs(r.direction(0)), 1.0, 1e-12);
}
