#pragma once

#include <stdexcept>
#include <string>

namespace fcl {

// All library errors derive from Error so callers can catch one base.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape disagreement between tensor operands.
struct DimensionError : Error {
    using Error::Error;
};

// Invalid input value for a numeric op (log of non-positive entry, non-finite result).
struct DomainError : Error {
    using Error::Error;
};

// l2 normalization of a (near-)zero vector.
struct DegenerateVectorError : Error {
    using Error::Error;
};

// Tape misuse: backward twice, backward on a non-scalar, backward on inference tape.
struct TapeError : Error {
    using Error::Error;
};

// Optimizer step on a parameter that has no accumulated gradient.
struct NotBackpropagatedError : Error {
    using Error::Error;
};

// Malformed dataset files (truncated records, bad label bytes).
struct FormatError : Error {
    using Error::Error;
};

// Stream construction over samples without labels.
struct MissingLabelError : Error {
    using Error::Error;
};

struct EmptyStreamError : Error {
    using Error::Error;
};

// Run configuration problems: unknown keys, type errors, constraint violations.
struct ConfigError : Error {
    using Error::Error;
};

// Checkpoint name/shape mismatches and container format problems.
struct CheckpointError : Error {
    using Error::Error;
};

// A class is absent from a stratified label subsample.
struct StratificationError : Error {
    using Error::Error;
};

}  // namespace fcl
