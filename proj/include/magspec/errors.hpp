#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace magspec {

// Base of every recoverable failure raised by the library. The CLI maps
// ConfigError to exit status 2 and everything else to 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string &what)
        : Error("invalid '" + key + "': " + what), key_(std::move(key)) {}
    const std::string &key() const noexcept { return key_; }

private:
    std::string key_;
};

#define MAGSPEC_DEFINE_ERROR(Name)                                                                                     \
    class Name : public Error {                                                                                        \
    public:                                                                                                            \
        using Error::Error;                                                                                            \
    }

MAGSPEC_DEFINE_ERROR(NearDegenerateFrames);
MAGSPEC_DEFINE_ERROR(OnLambda);
MAGSPEC_DEFINE_ERROR(QuadratureNotConverged);
MAGSPEC_DEFINE_ERROR(RAtZero);
MAGSPEC_DEFINE_ERROR(StepUnderflow);
MAGSPEC_DEFINE_ERROR(BlowUp);
MAGSPEC_DEFINE_ERROR(TooShort);
MAGSPEC_DEFINE_ERROR(NoRoot);
MAGSPEC_DEFINE_ERROR(DomainTooSmall);
MAGSPEC_DEFINE_ERROR(GridTooCoarse);
MAGSPEC_DEFINE_ERROR(InsufficientData);
MAGSPEC_DEFINE_ERROR(MalformedRecord);

#undef MAGSPEC_DEFINE_ERROR

} // namespace magspec
