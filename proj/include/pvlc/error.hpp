#ifndef PVLC_ERROR_HPP
#define PVLC_ERROR_HPP

#include <stdexcept>
#include <string>

namespace pvlc {

// Usage / validation failures (CLI exit code 2).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class InputError : public Error {
public:
    using Error::Error;
};

class ParseError : public InputError {
public:
    ParseError(std::size_t line, const std::string& what)
        : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public InputError {
public:
    using InputError::InputError;
};

class SchemaError : public InputError {
public:
    using InputError::InputError;
};

class DetectionError : public Error {
public:
    using Error::Error;
};

// Computation-level failures (CLI exit code 1).
class ComputationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnidentifiableError : public ComputationError {
public:
    using ComputationError::ComputationError;
};

namespace detail {

inline void require(bool ok, const char* what) {
    if (!ok) throw DomainError(what);
}

}  // namespace detail
}  // namespace pvlc

#endif
