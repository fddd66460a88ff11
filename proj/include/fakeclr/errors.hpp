#pragma once

#include <stdexcept>
#include <string>

namespace fakeclr {

// Bad argument value (non-positive temperature, inverted bounds, ...).
struct invalid_parameter : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Input that is structurally valid but has no defined result (zero vector, ...).
struct degenerate_input : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Caller broke a documented precondition (non-unit embedding, label regression, ...).
struct contract_violation : std::logic_error {
    using std::logic_error::logic_error;
};

// A function evaluation produced NaN/Inf where finiteness was required.
struct evaluation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Metric fed with unusable data (non-PSD covariance, batch too small, ...).
struct invalid_input : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Training loop hit a non-finite loss; carries the iteration it happened at.
struct abort_run : std::runtime_error {
    long long iteration;
    abort_run(long long it, const std::string& what)
        : std::runtime_error(what + " (iteration " + std::to_string(it) + ")"), iteration(it) {}
};

} // namespace fakeclr
