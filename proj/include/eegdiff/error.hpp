#pragma once

#include <stdexcept>
#include <string>

namespace eegdiff {

/// Base class for all library errors. The category string is stable and
/// machine-parsable; the CLI prints it as `error: <category>: <message>`.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& message)
        : std::runtime_error(message), category_(std::move(category)) {}

    const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

/// Incompatible tensor/matrix shapes. Messages carry both shapes.
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& message) : Error("dimension", message) {}
};

/// Bad argument values (out-of-range labels, wsize too small, ...).
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& message) : Error("validation", message) {}
};

/// Content does not fit a fixed-capacity container (EFDM grid overflow).
class CapacityError : public Error {
public:
    explicit CapacityError(const std::string& message) : Error("capacity", message) {}
};

/// File read/write failures; message names the path.
class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error("io", message) {}
};

/// Non-finite losses or samples during training/sampling.
class DivergenceError : public Error {
public:
    explicit DivergenceError(const std::string& message) : Error("divergence", message) {}
};

/// Optimizer or model state misuse (missing gradients, unbound layers).
class StateError : public Error {
public:
    explicit StateError(const std::string& message) : Error("state", message) {}
};

}  // namespace eegdiff
