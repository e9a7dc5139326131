#pragma once

#include <stdexcept>
#include <string>

namespace dannkit {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Shape/extent violations (mismatched operands, zero extents, non-scalar loss).
class ShapeError : public Error {
public:
    using Error::Error;
};

// Invalid configuration values (negative lambda, zero epochs, bad divisibility).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Class or domain label out of range.
class LabelError : public Error {
public:
    using Error::Error;
};

// Dataset-level problems (class below minimum size, empty pool).
class DataError : public Error {
public:
    using Error::Error;
};

// File ingestion and serialization failures; message names the path.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace dannkit
