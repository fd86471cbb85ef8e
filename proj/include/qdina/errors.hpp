#ifndef QDINA_ERRORS_HPP
#define QDINA_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace qdina {

// Base of everything the library throws on bad input or failed numerics.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error
{
public:
    using Error::Error;
};

// Requested size would blow up 2^K (or K!) storage/enumeration.
class CapacityError : public Error
{
public:
    using Error::Error;
};

class NumericalError : public Error
{
public:
    using Error::Error;
};

class ConfigError : public Error
{
public:
    using Error::Error;
};

class ParseError : public Error
{
public:
    ParseError(const std::string& what, std::size_t line, std::size_t column)
    : Error(what + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"),
      message_ {what}, line_ {line}, column_ {column} {}

    // The message without the location suffix.
    const std::string& message() const noexcept { return message_; }

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::string message_;
    std::size_t line_, column_;
};

} // namespace qdina

#endif
