#pragma once

#include <stdexcept>
#include <string>

namespace procinv {

/// Base class of every error thrown by the library. `kind()` is a stable
/// machine-readable identifier used by the CLI error records.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string &message) : std::runtime_error(message), m_kind(std::move(kind)) {}

    const std::string &kind() const noexcept { return m_kind; }

private:
    std::string m_kind;
};

class GeometryError : public Error {
public:
    explicit GeometryError(const std::string &message) : Error("geometry", message) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string &message) : Error("config", message) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string &message) : Error("io", message) {}
};

} // namespace procinv
