#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace levyband {

enum class ErrorKind {
    NonPositiveFixedCost,
    NegativeProportionalCost,
    NonPositiveDiscount,
    NonPositiveJumpScale,
    InvalidParameter,
    DomainError,
    SubordinatorError,
    RootFindingFailure,
    BracketFailure,
    SecondDerivativeAtKink,
    OrderingViolation,
    SingularSystem,
    DegenerateChain,
    UnsupportedModel,
    ConfigError,
};

std::string_view to_string(ErrorKind kind);

/// Base exception for every failure raised by the library. The kind is
/// machine-readable; what() carries the human-readable detail.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& detail)
        : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace levyband
