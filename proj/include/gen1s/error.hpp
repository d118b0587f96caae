#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gen1s {

// Root of every error the library throws. The CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

enum class LoadErrorKind {
    io,
    bad_magic,
    unsupported_version,
    truncated,
    checksum_mismatch,
    non_finite,
    invalid_class_id,
    malformed,
};

const char* to_string(LoadErrorKind kind);

class LoadError : public Error {
public:
    LoadError(LoadErrorKind kind, const std::string& what)
        : Error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
    LoadErrorKind kind() const noexcept { return kind_; }

private:
    LoadErrorKind kind_;
};

// Invalid dataset content (invariant violations, unsplittable pools, missing classes).
class DataError : public Error {
public:
    using Error::Error;
};

class SplitError : public DataError {
public:
    using DataError::DataError;
};

class NumericError : public Error {
public:
    using Error::Error;
};

// Non-finite loss during training; carries the offending episode index.
class TrainingError : public NumericError {
public:
    TrainingError(std::int64_t episode, const std::string& what)
        : NumericError("episode " + std::to_string(episode) + ": " + what), episode_(episode) {}
    std::int64_t episode() const noexcept { return episode_; }

private:
    std::int64_t episode_;
};

}  // namespace gen1s
