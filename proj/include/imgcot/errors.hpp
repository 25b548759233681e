#pragma once

#include <stdexcept>
#include <string>

namespace imgcot {

// Error taxonomy shared by all modules. The CLI maps these onto exit codes:
// ContractViolation/ConfigError -> 1, NumericFailure -> 2, ExternalServiceError -> 3.

class ContractViolation : public std::runtime_error {
public:
    explicit ContractViolation(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericFailure : public std::runtime_error {
public:
    explicit NumericFailure(const std::string& msg) : std::runtime_error(msg) {}
};

class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class ExternalServiceError : public std::runtime_error {
public:
    explicit ExternalServiceError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ContractViolation(msg);
}

}  // namespace imgcot
