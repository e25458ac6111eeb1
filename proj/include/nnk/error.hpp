#pragma once

#include <stdexcept>
#include <string>

namespace nnk {

// Invalid argument outside an operation's mathematical domain.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// A computation produced a non-finite or out-of-tolerance intermediate.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace nnk
