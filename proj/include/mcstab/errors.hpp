#pragma once

#include <stdexcept>
#include <string>

namespace mcstab {

/// Malformed arguments or files: wrong shapes, non-finite entries, bad JSON.
struct InvalidInputError : std::invalid_argument {
    explicit InvalidInputError(const std::string& what) : std::invalid_argument(what) {}
};

/// A mathematical hypothesis does not hold for the given instance
/// (e.g. graph not strongly connected, pair not controllable).
struct DomainError : std::domain_error {
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// A randomized construction exhausted its retry budget.
struct SynthesisError : std::runtime_error {
    explicit SynthesisError(const std::string& what) : std::runtime_error(what) {}
};

/// Problem size exceeds a configured enumeration cap.
struct ResourceError : std::runtime_error {
    explicit ResourceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mcstab
