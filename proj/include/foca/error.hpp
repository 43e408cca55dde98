#pragma once

#include <stdexcept>
#include <string>

namespace foca {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or size disagreement between tensors/images/masks.
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

// Invalid configuration value or operation argument.
class ParameterError : public Error {
public:
    explicit ParameterError(const std::string& msg) : Error(msg) {}
};

// Vector with norm below the normalization guard.
class DegenerateVectorError : public Error {
public:
    explicit DegenerateVectorError(const std::string& msg) : Error(msg) {}
};

// Malformed records, unknown enum values, length mismatches in data.
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(msg) {}
};

// Copy-move generator could not place a non-overlapping destination.
class PlacementError : public Error {
public:
    explicit PlacementError(const std::string& msg) : Error(msg) {}
};

// I/O failure; message carries the offending path.
class FilesystemError : public Error {
public:
    explicit FilesystemError(const std::string& msg) : Error(msg) {}
};

// Checkpoint/manifest version or config-hash mismatch.
class VersionError : public Error {
public:
    explicit VersionError(const std::string& msg) : Error(msg) {}
};

// Non-finite objective during a gradient check or evaluation.
class EvaluationError : public Error {
public:
    explicit EvaluationError(const std::string& msg) : Error(msg) {}
};

} // namespace foca
