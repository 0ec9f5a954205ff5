#pragma once

#include <stdexcept>
#include <string>

namespace aigc {

// Invalid value for a documented input domain (e.g. resolution ratio out of [r_min, 1]).
class DomainError : public std::runtime_error {
public:
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// Caller broke an API contract (dimension mismatch, empty batch, non-scalar loss).
class ContractError : public std::logic_error {
public:
    explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

// Bad configuration: unknown keys, inverted ranges, invalid hyperparameters.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Requested computation exceeds a documented capacity bound.
class CapacityError : public std::runtime_error {
public:
    explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

// No feasible allocation exists even at the minimum-resource decision.
class InfeasibleError : public std::runtime_error {
public:
    explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace aigc
