#pragma once

#include <stdexcept>
#include <string>

namespace mfrbsde {

// Exit-code classes used by the CLI: 2 = gate failure, 3 = non-convergence or
// tolerance breach, 4 = configuration / input error. Contract violations are
// programming errors and map to 4 as well when they escape.

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ContractError : std::logic_error {
    explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

struct GateError : std::runtime_error {
    explicit GateError(const std::string& msg) : std::runtime_error(msg) {}
};

struct StepSizeError : std::runtime_error {
    explicit StepSizeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NonConvergenceError : std::runtime_error {
    explicit NonConvergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

// Expression language errors carry the byte offset of the offending token.
struct ParseError : std::runtime_error {
    std::size_t offset;
    ParseError(const std::string& msg, std::size_t off)
        : std::runtime_error(msg + " (at byte " + std::to_string(off) + ")"), offset(off) {}
};

struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mfrbsde
