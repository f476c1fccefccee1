/**
 * @file model.hpp
 * @brief Interface for nonlinear maps z = g(x) with first and second derivatives.
 */

#ifndef GMSPLIT_MODEL_HPP
#define GMSPLIT_MODEL_HPP

#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "gmsplit/errors.hpp"
#include "gmsplit/linalg.hpp"
#include "gmsplit/tensor.hpp"

namespace gmsplit {

enum class DerivativeOrder { Value = 0, Jacobian = 1, Hessian = 2 };

struct ModelDerivatives {
    VectorXd value;
    MatrixXd jacobian;
    std::optional<Tensor3> hessian;

    [[nodiscard]] Index out_dim() const { return jacobian.rows(); }
    [[nodiscard]] Index in_dim() const { return jacobian.cols(); }

    [[nodiscard]] const Tensor3& require_hessian() const
    {
        if (!hessian) {
            throw MissingHessian("model did not supply a second-derivative tensor");
        }
        return *hessian;
    }

    /// Throws InvariantViolation on non-finite entries, bad shapes or an asymmetric Hessian.
    void validate() const
    {
        if (value.size() != jacobian.rows()) {
            throw InvariantViolation("value/Jacobian row count mismatch");
        }
        if (!value.allFinite() || !jacobian.allFinite()) {
            throw InvariantViolation("non-finite model value or Jacobian");
        }
        if (hessian) {
            if (hessian->out_dim() != jacobian.rows() || hessian->in_dim() != jacobian.cols()) {
                throw InvariantViolation("Hessian shape mismatch");
            }
            if (!hessian->all_finite()) {
                throw InvariantViolation("non-finite Hessian");
            }
            const double scale = std::max(1.0, hessian->flat().cwiseAbs().maxCoeff());
            if (hessian->asymmetry() > 1e-12 * scale) {
                throw InvariantViolation("Hessian is not symmetric in its input indices");
            }
        }
    }
};

/// A nonlinear map. Implementations must be reentrant: evaluate is called concurrently.
class NonlinearModel {
public:
    virtual ~NonlinearModel() = default;

    [[nodiscard]] virtual Index in_dim() const = 0;
    [[nodiscard]] virtual Index out_dim() const = 0;
    [[nodiscard]] virtual std::string name() const = 0;

    /// Value and derivatives up to @p order. Jacobian is always filled when order ≥ Jacobian.
    [[nodiscard]] virtual ModelDerivatives evaluate(const VectorXd& x, DerivativeOrder order) const = 0;

    [[nodiscard]] virtual VectorXd value(const VectorXd& x) const { return evaluate(x, DerivativeOrder::Value).value; }
};

/// Model built from callables; convenient for tests and ad-hoc maps.
class FunctionModel final : public NonlinearModel {
public:
    using ValueFn = std::function<VectorXd(const VectorXd&)>;
    using JacobianFn = std::function<MatrixXd(const VectorXd&)>;
    using HessianFn = std::function<Tensor3(const VectorXd&)>;

    FunctionModel(std::string name, Index n, Index m, ValueFn f, JacobianFn jac, HessianFn hess = {})
        : name_(std::move(name))
        , n_(n)
        , m_(m)
        , f_(std::move(f))
        , jac_(std::move(jac))
        , hess_(std::move(hess))
    {}

    [[nodiscard]] Index in_dim() const override { return n_; }
    [[nodiscard]] Index out_dim() const override { return m_; }
    [[nodiscard]] std::string name() const override { return name_; }

    [[nodiscard]] ModelDerivatives evaluate(const VectorXd& x, DerivativeOrder order) const override
    {
        detail::require_dims(x.size() == n_, "FunctionModel input");
        ModelDerivatives d;
        d.value = f_(x);
        d.jacobian = order >= DerivativeOrder::Jacobian ? jac_(x) : MatrixXd(m_, 0);
        if (order >= DerivativeOrder::Hessian && hess_) {
            d.hessian = hess_(x);
        }
        return d;
    }

    [[nodiscard]] VectorXd value(const VectorXd& x) const override { return f_(x); }

private:
    std::string name_;
    Index n_;
    Index m_;
    ValueFn f_;
    JacobianFn jac_;
    HessianFn hess_;
};

/// g(x) = A x + c.
inline FunctionModel affine_model(const MatrixXd& a, const VectorXd& c)
{
    return FunctionModel(
        "affine", a.cols(), a.rows(), [a, c](const VectorXd& x) -> VectorXd { return a * x + c; },
        [a](const VectorXd&) -> MatrixXd { return a; }, [a](const VectorXd&) { return Tensor3(a.rows(), a.cols()); });
}

} // namespace gmsplit

#endif // GMSPLIT_MODEL_HPP
