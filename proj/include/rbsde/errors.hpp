#pragma once

#include <stdexcept>
#include <string>

namespace rbsde {

enum class ErrorKind {
    InvalidParameter,
    SizeLimit,
    LevelMismatch,
    RegularizationParameterTooSmall,
    FixedPointDivergence,
    NonFiniteValue,
    BarrierViolation,
    DominationFailure,
    HypothesisNotSatisfied,
    DataOrderingViolation,
    ParseError,
    UnknownGenerator,
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
          kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

} // namespace rbsde
