#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "gmsplit/tensor.hpp"

namespace testing_support {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0)
{
    std::normal_distribution<double> nd(0.0, scale);
    VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v(i) = nd(rng);
    }
    return v;
}

inline MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c)
{
    std::normal_distribution<double> nd(0.0, 1.0);
    MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        for (Eigen::Index j = 0; j < c; ++j) {
            m(i, j) = nd(rng);
        }
    }
    return m;
}

// Well conditioned SPD: A·Aᵀ + n·I.
inline MatrixXd random_spd(std::mt19937_64& rng, Eigen::Index n)
{
    const MatrixXd a = random_matrix(rng, n, n);
    return a * a.transpose() + static_cast<double>(n) * MatrixXd::Identity(n, n);
}

inline VectorXd random_unit(std::mt19937_64& rng, Eigen::Index n)
{
    return random_vector(rng, n).normalized();
}

// Tensor with symmetric slices.
inline gmsplit::Tensor3 random_tensor(std::mt19937_64& rng, Eigen::Index m, Eigen::Index n)
{
    gmsplit::Tensor3 t(m, n);
    for (Eigen::Index i = 0; i < m; ++i) {
        const MatrixXd a = random_matrix(rng, n, n);
        t.set_slice(i, 0.5 * (a + a.transpose()));
    }
    return t;
}

inline double rel_err(double a, double b)
{
    return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

} // namespace testing_support
