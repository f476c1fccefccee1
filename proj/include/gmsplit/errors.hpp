#ifndef GMSPLIT_ERRORS_HPP
#define GMSPLIT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace gmsplit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define GMSPLIT_DEFINE_ERROR(Name)                          \
    class Name : public Error {                             \
    public:                                                 \
        explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
    }

GMSPLIT_DEFINE_ERROR(DimensionMismatch);
GMSPLIT_DEFINE_ERROR(NotPositiveDefinite);
GMSPLIT_DEFINE_ERROR(DowndateViolation);
GMSPLIT_DEFINE_ERROR(SingularOutputCovariance);
GMSPLIT_DEFINE_ERROR(MissingHessian);
GMSPLIT_DEFINE_ERROR(MissingSigma);
GMSPLIT_DEFINE_ERROR(Infeasible);
GMSPLIT_DEFINE_ERROR(ParseError);
GMSPLIT_DEFINE_ERROR(InvariantViolation);
GMSPLIT_DEFINE_ERROR(QuadratureFailure);
GMSPLIT_DEFINE_ERROR(OriginSingularity);
GMSPLIT_DEFINE_ERROR(NonPositiveSMA);
GMSPLIT_DEFINE_ERROR(IntegrationFailure);
GMSPLIT_DEFINE_ERROR(ConfigError);

#undef GMSPLIT_DEFINE_ERROR

namespace detail {

inline void require_dims(bool ok, const char* what)
{
    if (!ok) {
        throw DimensionMismatch(what);
    }
}

} // namespace detail
} // namespace gmsplit

#endif // GMSPLIT_ERRORS_HPP
