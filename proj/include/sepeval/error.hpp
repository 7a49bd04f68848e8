#pragma once

#include <stdexcept>
#include <string>

namespace sepeval {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Filesystem failures: missing files, unwritable paths.
class IoError : public Error {
public:
    using Error::Error;
};

/// Container or sample format the reader does not understand.
class CodecError : public Error {
public:
    using Error::Error;
};

/// A file whose declared payload extends past its end.
class TruncatedError : public Error {
public:
    using Error::Error;
};

/// Inconsistent dimensions between signals, spectrograms or masks.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid parameters (non-COLA STFT, non-positive alpha, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or incompatible score report.
class SchemaError : public Error {
public:
    using Error::Error;
};

}  // namespace sepeval
