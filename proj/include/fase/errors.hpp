#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fase {

// Error categories map onto CLI exit codes: config/usage -> 2, io -> 3,
// numerical -> 4. Precondition violations use std::invalid_argument.

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Carries residual norms so eigensolver non-convergence can be reported.
struct numerical_error : std::runtime_error {
    explicit numerical_error(const std::string& msg, std::vector<double> res = {})
        : std::runtime_error(msg), residuals(std::move(res)) {}

    std::vector<double> residuals;
};

}  // namespace fase
