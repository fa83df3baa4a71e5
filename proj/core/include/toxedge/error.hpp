#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace toxedge {

enum class ErrorKind {
    Usage,
    Parameter,
    Shape,
    EmptyInput,
    InputTooShort,
    Format,
    Parse,
    Io,
    Magic,
    Version,
    Crc,
    Config,
    Contract,
    InfeasibleTarget,
    OracleSize,
    Label,
    Split,
    Scheme,
    UndefinedAuc,
    UnsupportedNesting,
};

// Stable, machine-parseable name used in `error[kind]:` diagnostics.
std::string_view kind_name(ErrorKind kind) noexcept;

// Process exit code for an error kind: 1 usage, 2 data/format, 3 contract.
int exit_code(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

} // namespace toxedge
