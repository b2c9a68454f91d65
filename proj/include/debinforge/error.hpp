#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace debinforge {

enum class ErrorKind {
    Io,
    Schema,
    Config,
    ParseFailure,
    NameNotFound,
    UnknownProfile,
    UnreadableBinary,
    BackendUnavailable,
    BackendFailure,
    MalformedExport,
    AmbiguousBase,
    TransportError,
    MalformedResponse,
    PoolSizeMismatch,
    PreconditionViolation,
    MissingPool,
    InfeasibleSplit,
    TokenizerFailure,
    LengthMismatch,
    EmptyInput,
    EmptyReference,
    EmbedderFailure,
    ZeroVector,
};

std::string_view to_string(ErrorKind kind);

// Every failure the toolkit reports carries a kind so callers (and the CLI's
// exit-code mapping) can branch without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

} // namespace debinforge
