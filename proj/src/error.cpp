#include "debinforge/error.hpp"

namespace debinforge {

std::string_view to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::Io: return "Io";
    case ErrorKind::Schema: return "Schema";
    case ErrorKind::Config: return "Config";
    case ErrorKind::ParseFailure: return "ParseFailure";
    case ErrorKind::NameNotFound: return "NameNotFound";
    case ErrorKind::UnknownProfile: return "UnknownProfile";
    case ErrorKind::UnreadableBinary: return "UnreadableBinary";
    case ErrorKind::BackendUnavailable: return "BackendUnavailable";
    case ErrorKind::BackendFailure: return "BackendFailure";
    case ErrorKind::MalformedExport: return "MalformedExport";
    case ErrorKind::AmbiguousBase: return "AmbiguousBase";
    case ErrorKind::TransportError: return "TransportError";
    case ErrorKind::MalformedResponse: return "MalformedResponse";
    case ErrorKind::PoolSizeMismatch: return "PoolSizeMismatch";
    case ErrorKind::PreconditionViolation: return "PreconditionViolation";
    case ErrorKind::MissingPool: return "MissingPool";
    case ErrorKind::InfeasibleSplit: return "InfeasibleSplit";
    case ErrorKind::TokenizerFailure: return "TokenizerFailure";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::EmptyReference: return "EmptyReference";
    case ErrorKind::EmbedderFailure: return "EmbedderFailure";
    case ErrorKind::ZeroVector: return "ZeroVector";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind)
{
}

void fail(ErrorKind kind, const std::string& message)
{
    throw Error(kind, message);
}

} // namespace debinforge
