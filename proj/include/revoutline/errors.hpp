#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace revoutline {

// Base for every error the engine throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (empty input, index out of range, ...).
class ContractViolation : public Error {
public:
    using Error::Error;
};

// IO failure while reading a resource file.
class LoadError : public Error {
public:
    using Error::Error;
};

// Malformed content in a resource file. line() is 1-based, 0 when unknown.
class FormatError : public Error {
public:
    FormatError(std::size_t line, const std::string& what)
        : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class NotFound : public Error {
public:
    using Error::Error;
};

// Optimistic-concurrency failure, e.g. a merge suggestion built for text that has since changed.
class Conflict : public Error {
public:
    using Error::Error;
};

} // namespace revoutline
