#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace matrixpower {

/// Base of every exception thrown by the library. `exit_code()` is the
/// status the command-line front end reports for an uncaught instance.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 3; }
};

/// Malformed input documents and invalid arguments (exit status 1).
class UsageError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 1; }
};

class SchemaError : public UsageError {
public:
    using UsageError::UsageError;
};

class InvariantError : public UsageError {
public:
    using UsageError::UsageError;
};

class IndexError : public UsageError {
public:
    using UsageError::UsageError;
};

/// Domain errors: the request is well formed but has no meaningful answer
/// (exit status 2).
class DomainError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

class NoEffect : public DomainError {
public:
    using DomainError::DomainError;
};

class NoRealRoot : public DomainError {
public:
    using DomainError::DomainError;
};

class DegenerateConstraint : public DomainError {
public:
    using DomainError::DomainError;
};

class AllocationError : public DomainError {
public:
    using DomainError::DomainError;
};

class InsufficientDonors : public DomainError {
public:
    using DomainError::DomainError;
};

/// The information matrix cannot be inverted. Carries the variable pairs
/// that no form observes jointly, when the caller knows them.
class SingularInformation : public DomainError {
public:
    SingularInformation(const std::string& what,
                        std::vector<std::pair<std::string, std::string>> uncovered = {})
        : DomainError(what), uncovered_(std::move(uncovered)) {}

    const std::vector<std::pair<std::string, std::string>>& uncovered_pairs() const noexcept {
        return uncovered_;
    }

private:
    std::vector<std::pair<std::string, std::string>> uncovered_;
};

/// Numerical failures (exit status 3).
class NotPositiveDefinite : public Error {
public:
    using Error::Error;
};

class NoConvergence : public Error {
public:
    using Error::Error;
};

class RankDeficient : public Error {
public:
    using Error::Error;
};

}  // namespace matrixpower
