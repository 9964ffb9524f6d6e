#pragma once

#include <stdexcept>
#include <string>

namespace mertc {

/// Failure categories; the CLI maps them onto exit codes.
enum class ErrorKind {
    config,  ///< invalid parameters or configuration
    solver,  ///< numerical failure (non-convergence, projection breakdown)
    usage,   ///< API misuse (wrong variant, terminal slice, bad shift)
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline Error config_error(const std::string& what) { return {ErrorKind::config, what}; }
inline Error solver_error(const std::string& what) { return {ErrorKind::solver, what}; }
inline Error usage_error(const std::string& what) { return {ErrorKind::usage, what}; }

}  // namespace mertc
