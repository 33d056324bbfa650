#pragma once

#include <stdexcept>
#include <string>

namespace gaia {

// Error taxonomy shared by all modules. Contract violations on inputs throw
// DomainError; container/checkpoint parsing problems throw CorruptContainerError
// or IoError depending on whether the bytes are wrong or missing.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DomainError : Error {
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

struct CorruptContainerError : Error {
    explicit CorruptContainerError(const std::string& msg) : Error(msg) {}
};

struct DegenerateGeometryError : Error {
    explicit DegenerateGeometryError(const std::string& msg) : Error(msg) {}
};

struct SingularityError : Error {
    explicit SingularityError(const std::string& msg) : Error(msg) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

}  // namespace gaia
