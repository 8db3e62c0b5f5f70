#pragma once

#include <stdexcept>
#include <string>

namespace duomic {

/// Bad argument values (out-of-range hyperparameters, malformed targets, ...).
class ValueError : public std::runtime_error {
public:
    explicit ValueError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor shape / axis mismatches.
class DimensionError : public std::runtime_error {
public:
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Problems with input data: manifests, labels, missing files.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Serialized-file problems (bad magic, version, truncation).
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Serialized-file version the code cannot read.
class VersionError : public FormatError {
public:
    explicit VersionError(const std::string& msg) : FormatError(msg) {}
};

/// NaN/Inf encountered where finite values are required.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace duomic
