#pragma once

#include <stdexcept>
#include <string>

namespace opsam {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Caller broke an operation's precondition (shape mismatch, empty input, ...).
struct ContractViolation : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

// Anything that goes wrong inside an encoder or segmenter backend.
struct BackendError : Error {
    using Error::Error;
};

struct TransportError : BackendError {
    using BackendError::BackendError;
};

struct ProtocolError : BackendError {
    using BackendError::BackendError;
};

struct ProtocolVersionError : ProtocolError {
    using ProtocolError::ProtocolError;
};

struct ShapeError : BackendError {
    using BackendError::BackendError;
};

} // namespace opsam
