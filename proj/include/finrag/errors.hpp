#pragma once

#include <stdexcept>
#include <string>

namespace finrag {

// Error taxonomy mirrors the CLI exit codes: config/usage (1), data (2), provider (3).

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class ProviderError : public std::runtime_error {
public:
    explicit ProviderError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace finrag
