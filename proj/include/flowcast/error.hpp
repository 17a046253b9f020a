#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace flowcast {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A field could not be parsed or violates a record invariant.
class ParseError : public Error {
public:
    ParseError(std::size_t line, std::string column, const std::string& what)
        : Error("line " + std::to_string(line) + ", column '" + column + "': " + what),
          line_(line), column_(std::move(column)) {}

    std::size_t line() const noexcept { return line_; }
    const std::string& column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::string column_;
};

/// Input does not match the declared column layout.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Binary or text container is corrupt, truncated, or of the wrong version.
class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace flowcast
