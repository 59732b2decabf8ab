#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mixdown {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor shape / dimension violations (mismatched operands, zero or
// overflowing dimension products).
struct ShapeError : Error {
    using Error::Error;
};

// WeightSet schema violations (missing tensors, name/shape mismatch
// between sets intended for mixing).
struct SchemaError : Error {
    using Error::Error;
};

// Invalid configuration values.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed serialized input. Carries the byte offset of the defect.
struct ParseError : Error {
    size_t offset;
    ParseError(size_t off, const std::string& what)
        : Error("parse error at byte " + std::to_string(off) + ": " + what),
          offset(off) {}
};

// Filesystem-level failures (unreadable/unwritable paths).
struct IoError : Error {
    using Error::Error;
};

}  // namespace mixdown
