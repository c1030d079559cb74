#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cpq {

/** @brief Base of every error raised by the library. */
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Incompatible jet contexts, index out of range, or insufficient jet order.
class ContextError : public Error {
public:
    using Error::Error;
};

/// Argument outside the domain of a univariate function.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Zero pivot or zero constant term where an inverse is required.
class SingularError : public Error {
public:
    using Error::Error;
};

/// Coinciding eigenvalues or vanishing differentials at an evaluation point.
class DegeneratePointError : public Error {
public:
    using Error::Error;
};

/// Interpolated family does not have the declared polynomial degree.
class DegreeOverflowError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset, std::size_t length)
        : Error(what + " at offset " + std::to_string(offset)), offset_(offset), length_(length) {}
    std::size_t offset() const { return offset_; }
    std::size_t length() const { return length_; }

private:
    std::size_t offset_;
    std::size_t length_;
};

/// Invalid structure spec or run configuration. `pointer` is a JSON pointer when known.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what, std::string pointer = {})
        : Error(pointer.empty() ? what : pointer + ": " + what), pointer_(std::move(pointer)) {}
    const std::string& pointer() const { return pointer_; }

private:
    std::string pointer_;
};

}  // namespace cpq
