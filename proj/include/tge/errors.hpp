#pragma once

#include <stdexcept>
#include <string>

namespace tge {

// Error taxonomy shared by the library and the CLI. The CLI maps
// config/usage to exit code 1 and everything else to exit code 2.
enum class ErrorKind {
    usage,       // bad command line
    config,      // bad config file or key
    layout,      // non-divisible grid geometry
    shape,       // dimension mismatch
    format,      // bad grid file bytes
    budget,      // token budget out of range
    input,       // bad operation input (empty batch, index out of range, ...)
    statistics,  // not enough data for a statistic
    numeric,     // non-finite values, undefined ratios
    io,          // filesystem failure
    manifest,    // unresolvable sample/grid reference
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

const char* error_kind_name(ErrorKind kind) noexcept;

}  // namespace tge
