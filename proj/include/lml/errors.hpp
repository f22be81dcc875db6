#pragma once

#include <stdexcept>
#include <string>

namespace lml {

/// Configuration input rejected (bad schema, inconsistent parameters,
/// infeasible discretization).  CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A solver or certified check failed numerically (non-convergence,
/// violated invariant).  CLI maps this to exit code 1.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Internal consistency check tripped; indicates a bug, not bad input.
struct InternalError : std::logic_error {
    explicit InternalError(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace lml
