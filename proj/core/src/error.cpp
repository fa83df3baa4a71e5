#include "toxedge/error.hpp"

namespace toxedge {

std::string_view kind_name(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::Usage: return "usage";
    case ErrorKind::Parameter: return "parameter";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::EmptyInput: return "empty-input";
    case ErrorKind::InputTooShort: return "input-too-short";
    case ErrorKind::Format: return "format";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
    case ErrorKind::Magic: return "magic";
    case ErrorKind::Version: return "version";
    case ErrorKind::Crc: return "crc";
    case ErrorKind::Config: return "config";
    case ErrorKind::Contract: return "contract";
    case ErrorKind::InfeasibleTarget: return "infeasible-target";
    case ErrorKind::OracleSize: return "oracle-size";
    case ErrorKind::Label: return "label";
    case ErrorKind::Split: return "split";
    case ErrorKind::Scheme: return "scheme";
    case ErrorKind::UndefinedAuc: return "undefined-auc";
    case ErrorKind::UnsupportedNesting: return "unsupported-nesting";
    }
    return "unknown";
}

int exit_code(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::Usage:
    case ErrorKind::Parameter:
    case ErrorKind::Label:
        return 1;
    case ErrorKind::EmptyInput:
    case ErrorKind::InputTooShort:
    case ErrorKind::Format:
    case ErrorKind::Parse:
    case ErrorKind::Io:
    case ErrorKind::Magic:
    case ErrorKind::Version:
    case ErrorKind::Crc:
    case ErrorKind::Config:
    case ErrorKind::Split:
        return 2;
    default:
        return 3;
    }
}

} // namespace toxedge
