#pragma once

#include <stdexcept>
#include <string>

namespace efpp {

/// Nearest/range queries on an empty point set.
class EmptyDomainError : public std::runtime_error {
public:
    explicit EmptyDomainError(const std::string& what) : std::runtime_error(what) {}
};

/// Candidate-graph edge set still changing after the allowed budget doublings.
class UnstablePruneError : public std::runtime_error {
public:
    explicit UnstablePruneError(const std::string& what) : std::runtime_error(what) {}
};

/// Endpoints not connected in the candidate graph.
class NoPathError : public std::runtime_error {
public:
    explicit NoPathError(const std::string& what) : std::runtime_error(what) {}
};

/// Query outside a tree's coverage set.
class CoverageError : public std::runtime_error {
public:
    explicit CoverageError(const std::string& what) : std::runtime_error(what) {}
};

/// Finite-window policy could not produce enough trusted results.
class WindowPolicyError : public std::runtime_error {
public:
    explicit WindowPolicyError(const std::string& what) : std::runtime_error(what) {}
};

/// Size guard on exhaustive oracles.
class GuardError : public std::runtime_error {
public:
    explicit GuardError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed CLI / experiment configuration.
class UsageError : public std::runtime_error {
public:
    explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace efpp
