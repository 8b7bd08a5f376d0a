#pragma once

#include <stdexcept>
#include <string>

namespace ssmamp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define SSMAMP_DEFINE_ERROR(Name)                                    \
    class Name : public Error {                                      \
    public:                                                          \
        explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
    }

SSMAMP_DEFINE_ERROR(SingularLBanded);
SSMAMP_DEFINE_ERROR(InvalidCovariance);
SSMAMP_DEFINE_ERROR(DimensionMismatch);
SSMAMP_DEFINE_ERROR(MissingPrev);
SSMAMP_DEFINE_ERROR(SingularKKT);
SSMAMP_DEFINE_ERROR(InvalidSpec);
SSMAMP_DEFINE_ERROR(NonpositiveVariance);
SSMAMP_DEFINE_ERROR(DivergenceAtOne);
SSMAMP_DEFINE_ERROR(NonFiniteIterate);
SSMAMP_DEFINE_ERROR(ConfigMismatch);
SSMAMP_DEFINE_ERROR(ConfigError);
SSMAMP_DEFINE_ERROR(FormatError);

#undef SSMAMP_DEFINE_ERROR

}  // namespace ssmamp
