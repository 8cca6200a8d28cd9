// Error types shared across the library.
#pragma once

#include <stdexcept>
#include <string>

namespace tipping {

/// Rejected input: a precondition or document invariant was violated.
/// `path()` names the offending field when one can be named (e.g. "prompt[0]").
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::string message)
        : std::runtime_error(std::move(message)) {}
    ValidationError(const std::string& path, const std::string& message)
        : std::runtime_error(path + ": " + message), path_(path) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// Malformed input text (JSON syntax, bad CSV). Carries the parser's
/// position information in the message.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A Gram matrix that is not realizable as a set of real vectors.
class NotRealizableError : public std::runtime_error {
public:
    NotRealizableError(std::string message, double offending_eigenvalue)
        : std::runtime_error(std::move(message)),
          eigenvalue_(offending_eigenvalue) {}

    double eigenvalue() const noexcept { return eigenvalue_; }

private:
    double eigenvalue_;
};

/// Not enough orthogonal directions left to build the requested vectors.
class CapacityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Rejection sampling exhausted its attempt budget. The message names the
/// constraint that rejected the most candidates.
class GenerationFailedError : public std::runtime_error {
public:
    GenerationFailedError(std::string message, std::string binding_constraint)
        : std::runtime_error(std::move(message)),
          binding_constraint_(std::move(binding_constraint)) {}

    const std::string& binding_constraint() const noexcept {
        return binding_constraint_;
    }

private:
    std::string binding_constraint_;
};

}  // namespace tipping
