/**
 * @file split_library.hpp
 * @brief Library of optimal univariate splits of the standard normal.
 *
 * An entry replaces 𝒩(0, 1) by an L-component homoscedastic mixture with
 * equally spaced means μ̃ᵢ = εL((i−1)/(L−1) − ½), symmetric weights and the
 * common variance σ̃² = 1 − Σw̃ᵢμ̃ᵢ² that keeps the unit variance. The spacing
 * and weights minimise L₂(q‖q̃) + λσ̃².
 */

#ifndef GMSPLIT_SPLIT_LIBRARY_HPP
#define GMSPLIT_SPLIT_LIBRARY_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <gsl/gsl_multimin.h>
#include <nlohmann/json.hpp>

#include "gmsplit/errors.hpp"
#include "gmsplit/gaussian.hpp"

namespace gmsplit {

struct UnivariateSplit {
    int L = 1;
    std::vector<double> weights;
    std::vector<double> means;  ///< standard-normal units
    double sigma = 1.0;         ///< common component standard deviation
    double lambda = 0.0;
    double l2_error = 0.0;

    /// Σw̃ᵢμ̃ᵢ², the variance carried by the mean spread.
    [[nodiscard]] double mean_spread() const
    {
        double s = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            s += weights[i] * means[i] * means[i];
        }
        return s;
    }

    [[nodiscard]] GaussianMixture as_mixture() const
    {
        std::vector<MixtureComponent> comps;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            comps.push_back({weights[i], Gaussian(VectorXd::Constant(1, means[i]), MatrixXd::Constant(1, 1, sigma * sigma))});
        }
        return GaussianMixture(std::move(comps), 1e-10);
    }

    /// Throws InvariantViolation unless the entry is a valid moment-preserving split.
    void validate() const
    {
        if (L < 1 || weights.size() != static_cast<std::size_t>(L) || means.size() != static_cast<std::size_t>(L)) {
            throw InvariantViolation("entry sizes do not match L");
        }
        double wsum = 0.0;
        double m1 = 0.0;
        for (int i = 0; i < L; ++i) {
            if (!(weights[i] > 0.0) || !std::isfinite(means[i])) {
                throw InvariantViolation("weights must be positive and means finite");
            }
            wsum += weights[i];
            m1 += weights[i] * means[i];
        }
        if (std::abs(wsum - 1.0) > 1e-12) {
            throw InvariantViolation("weights do not sum to one");
        }
        if (std::abs(m1) > 1e-10) {
            throw InvariantViolation("mixture mean is not zero");
        }
        if (!(sigma > 0.0) || !(mean_spread() < 1.0)) {
            throw InvariantViolation("infeasible split: Σwμ² must be < 1");
        }
        if (std::abs(mean_spread() + sigma * sigma - 1.0) > 1e-10) {
            throw InvariantViolation("mixture variance is not one");
        }
    }
};

namespace detail {

/// μ̃ᵢ = εL((i−1)/(L−1) − ½) for i = 1..L.
inline std::vector<double> spaced_means(int L, double eps)
{
    std::vector<double> mu(static_cast<std::size_t>(L), 0.0);
    if (L < 2) {
        return mu;
    }
    for (int i = 0; i < L; ++i) {
        mu[static_cast<std::size_t>(i)] = eps * L * (static_cast<double>(i) / (L - 1) - 0.5);
    }
    return mu;
}

/// Symmetric weights from k−1 log-ratios (the last distinct weight is the reference).
inline std::vector<double> symmetric_weights(int L, const std::vector<double>& theta)
{
    const int k = (L + 1) / 2;
    std::vector<double> u(static_cast<std::size_t>(k), 1.0);
    for (int j = 0; j + 1 < k; ++j) {
        u[static_cast<std::size_t>(j)] = std::exp(theta[static_cast<std::size_t>(j)]);
    }
    std::vector<double> w(static_cast<std::size_t>(L));
    for (int i = 0; i < L; ++i) {
        w[static_cast<std::size_t>(i)] = u[static_cast<std::size_t>(std::min(i, L - 1 - i))];
    }
    double s = 0.0;
    for (double v : w) {
        s += v;
    }
    for (double& v : w) {
        v /= s;
    }
    return w;
}

/// Closed-form L₂ distance between 𝒩(0,1) and a homoscedastic 1-D mixture.
inline double l2_homoscedastic(const std::vector<double>& w, const std::vector<double>& mu, double sigma2)
{
    const auto gauss = [](double d, double var) { return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * std::numbers::pi * var); };
    double qq = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        for (std::size_t j = 0; j < w.size(); ++j) {
            qq += w[i] * w[j] * gauss(mu[i] - mu[j], 2.0 * sigma2);
        }
    }
    double cross = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        cross += w[i] * gauss(mu[i], sigma2 + 1.0);
    }
    return std::max(0.0, qq - 2.0 * cross + 1.0 / (2.0 * std::sqrt(std::numbers::pi)));
}

/// Objective for given spacing and weights; +inf when Σwμ² ≥ 1.
inline double split_objective(int L, double lambda, double eps, const std::vector<double>& w)
{
    const auto mu = spaced_means(L, eps);
    double spread = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        spread += w[i] * mu[i] * mu[i];
    }
    if (!(spread < 1.0)) {
        return std::numeric_limits<double>::infinity();
    }
    const double sigma2 = 1.0 - spread;
    return l2_homoscedastic(w, mu, sigma2) + lambda * sigma2;
}

/// Nelder–Mead (GSL nmsimplex2) from @p x0 with initial step @p step; stops
/// when the simplex size drops below @p size_tol.
inline std::pair<std::vector<double>, double> nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                                                          const std::vector<double>& x0, double step, double size_tol, int max_iter)
{
    const std::size_t d = x0.size();
    gsl_multimin_function fn;
    fn.n = d;
    fn.params = const_cast<void*>(static_cast<const void*>(&f));
    fn.f = [](const gsl_vector* x, void* params) {
        const auto& obj = *static_cast<const std::function<double(const std::vector<double>&)>*>(params);
        const double v = obj(std::vector<double>(x->data, x->data + x->size));
        // GSL rejects non-finite values; a huge finite value still loses every comparison.
        return std::isfinite(v) ? v : 1e300;
    };
    std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> x(gsl_vector_alloc(d), gsl_vector_free);
    std::unique_ptr<gsl_vector, decltype(&gsl_vector_free)> steps(gsl_vector_alloc(d), gsl_vector_free);
    for (std::size_t i = 0; i < d; ++i) {
        gsl_vector_set(x.get(), i, x0[i]);
    }
    gsl_vector_set_all(steps.get(), step);
    std::unique_ptr<gsl_multimin_fminimizer, decltype(&gsl_multimin_fminimizer_free)> m(
        gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, d), gsl_multimin_fminimizer_free);
    gsl_multimin_fminimizer_set(m.get(), &fn, x.get(), steps.get());
    for (int it = 0; it < max_iter; ++it) {
        if (gsl_multimin_fminimizer_iterate(m.get()) != GSL_SUCCESS) {
            break;
        }
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(m.get()), size_tol) == GSL_SUCCESS) {
            break;
        }
    }
    const gsl_vector* best = gsl_multimin_fminimizer_x(m.get());
    return {std::vector<double>(best->data, best->data + best->size), gsl_multimin_fminimizer_minimum(m.get())};
}

/// Best symmetric weights for a fixed spacing.
inline std::pair<std::vector<double>, double> best_weights(int L, double lambda, double eps)
{
    const int free = (L + 1) / 2 - 1;
    if (free == 0) {
        const auto w = symmetric_weights(L, {});
        return {w, split_objective(L, lambda, eps, w)};
    }
    const auto obj = [&](const std::vector<double>& theta) {
        for (double t : theta) {
            if (std::abs(t) > 40.0) {
                return std::numeric_limits<double>::infinity();
            }
        }
        return split_objective(L, lambda, eps, symmetric_weights(L, theta));
    };
    std::vector<double> start(static_cast<std::size_t>(free), 0.0);
    double fstart = obj(start);
    for (double s : {-6.0, -3.0, -1.5, 1.5, 3.0}) {
        std::vector<double> cand(static_cast<std::size_t>(free), s);
        const double fc = obj(cand);
        if (fc < fstart) {
            start = cand;
            fstart = fc;
        }
    }
    if (!std::isfinite(fstart)) {
        return {symmetric_weights(L, start), fstart};
    }
    auto [theta, fbest] = nelder_mead(obj, start, 0.5, 1e-9, 4000);
    auto [theta2, fbest2] = nelder_mead(obj, theta, 0.05, 1e-11, 4000);
    if (fbest2 <= fbest) {
        theta = theta2;
    }
    const auto w = symmetric_weights(L, theta);
    return {w, split_objective(L, lambda, eps, w)};
}

} // namespace detail

/// ⟨q̃,q̃⟩ − 2⟨q̃,q⟩ + ⟨q,q⟩ against the standard normal q.
inline double l2_to_standard_normal(const UnivariateSplit& s)
{
    const auto q = GaussianMixture::single(Gaussian(VectorXd::Zero(1), MatrixXd::Identity(1, 1)));
    const auto qt = s.as_mixture();
    return std::max(0.0, gm_inner_product(qt, qt) - 2.0 * gm_inner_product(qt, q) + gm_inner_product(q, q));
}

/// Objective value L₂(q‖q̃) + (λ/L)Σσ̃ᵢ² of an entry.
inline double split_objective(const UnivariateSplit& s)
{
    return detail::split_objective(s.L, s.lambda, s.means.size() > 1 ? (s.means.back() - s.means.front()) / s.L : 0.0,
                                   s.weights);
}

/**
 * @brief Optimal homoscedastic, equally spaced split with L components.
 *
 * Nested deterministic search: a grid scan then golden-section refinement on
 * the spacing ε, with Nelder–Mead on the symmetric weight log-ratios inside.
 */
inline UnivariateSplit generate_entry(int L, double lambda)
{
    if (L < 2) {
        throw std::invalid_argument("generate_entry: L must be at least 2");
    }
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw std::invalid_argument("generate_entry: lambda must be finite and nonnegative");
    }
    const auto inner = [&](double eps) { return detail::best_weights(L, lambda, eps).second; };

    const double eps_hi = 8.0 / L;
    const int grid = 96;
    std::vector<double> eps_grid(grid + 1);
    std::vector<double> f_grid(grid + 1);
    for (int i = 0; i <= grid; ++i) {
        eps_grid[i] = eps_hi * i / grid;
        f_grid[i] = inner(eps_grid[i]);
    }
    const int ib = static_cast<int>(std::min_element(f_grid.begin(), f_grid.end()) - f_grid.begin());
    double a = eps_grid[std::max(0, ib - 1)];
    double b = eps_grid[std::min(grid, ib + 1)];
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = inner(c);
    double fd = inner(d);
    while (b - a > 1e-11) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = inner(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = inner(d);
        }
    }
    double eps = 0.5 * (a + b);
    auto [w, f] = detail::best_weights(L, lambda, eps);
    if (f_grid[ib] < f) {
        eps = eps_grid[ib];
        std::tie(w, f) = detail::best_weights(L, lambda, eps);
    }
    if (!std::isfinite(f)) {
        throw Infeasible("no spacing/weight pair satisfies Σwμ² < 1");
    }

    UnivariateSplit s;
    s.L = L;
    s.lambda = lambda;
    s.weights = w;
    s.means = detail::spaced_means(L, eps);
    const double spread = s.mean_spread();
    if (!(spread < 1.0)) {
        throw Infeasible("optimiser returned Σwμ² >= 1");
    }
    s.sigma = std::sqrt(1.0 - spread);
    s.l2_error = l2_to_standard_normal(s);
    s.validate();
    return s;
}

/// Entries keyed by (L, λ).
class SplitLibrary {
public:
    using Key = std::pair<int, double>;

    void add(UnivariateSplit s)
    {
        s.validate();
        const Key k{s.L, s.lambda};
        entries_[k] = std::move(s);
    }

    [[nodiscard]] const UnivariateSplit& at(int L, double lambda) const
    {
        const auto it = entries_.find({L, lambda});
        if (it == entries_.end()) {
            throw ConfigError("split library has no entry for L=" + std::to_string(L) + ", lambda=" + std::to_string(lambda));
        }
        return it->second;
    }

    [[nodiscard]] bool contains(int L, double lambda) const { return entries_.count({L, lambda}) > 0; }
    [[nodiscard]] std::size_t size() const { return entries_.size(); }
    [[nodiscard]] bool empty() const { return entries_.empty(); }
    [[nodiscard]] const std::map<Key, UnivariateSplit>& entries() const { return entries_; }

    static SplitLibrary generate(const std::vector<int>& Ls, const std::vector<double>& lambdas)
    {
        SplitLibrary lib;
        for (int L : Ls) {
            for (double lam : lambdas) {
                lib.add(generate_entry(L, lam));
            }
        }
        return lib;
    }

private:
    std::map<Key, UnivariateSplit> entries_;
};

namespace detail {

inline std::string fmt17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fmt17(const std::vector<double>& v)
{
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        s += (i ? "," : "") + fmt17(v[i]);
    }
    return s + "]";
}

} // namespace detail

/// One JSON record per line, decimals printed with 17 significant digits.
inline std::string serialize(const SplitLibrary& lib)
{
    std::ostringstream os;
    for (const auto& [key, e] : lib.entries()) {
        os << "{\"L\":" << e.L << ",\"lambda\":" << detail::fmt17(e.lambda) << ",\"sigma\":" << detail::fmt17(e.sigma)
           << ",\"l2_error\":" << detail::fmt17(e.l2_error) << ",\"weights\":" << detail::fmt17(e.weights)
           << ",\"means\":" << detail::fmt17(e.means) << "}\n";
    }
    return os.str();
}

inline SplitLibrary deserialize_library(const std::string& text)
{
    SplitLibrary lib;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        UnivariateSplit s;
        try {
            const auto j = nlohmann::json::parse(line);
            s.L = j.at("L").get<int>();
            s.lambda = j.at("lambda").get<double>();
            s.sigma = j.at("sigma").get<double>();
            s.l2_error = j.at("l2_error").get<double>();
            s.weights = j.at("weights").get<std::vector<double>>();
            s.means = j.at("means").get<std::vector<double>>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
        }
        lib.add(std::move(s));
    }
    return lib;
}

inline void save(const SplitLibrary& lib, const std::string& path)
{
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw ConfigError("cannot write " + path);
    }
    os << serialize(lib);
}

inline SplitLibrary load_library(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw ParseError("cannot read " + path);
    }
    std::stringstream ss;
    ss << is.rdbuf();
    return deserialize_library(ss.str());
}

} // namespace gmsplit

#endif // GMSPLIT_SPLIT_LIBRARY_HPP
