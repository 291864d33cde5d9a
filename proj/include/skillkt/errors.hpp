#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace skillkt {

class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Operand shapes do not satisfy an op's shape rule.
class ShapeError : public Error
{
public:
    using Error::Error;
};

class ConfigError : public Error
{
public:
    using Error::Error;
};

class RangeError : public Error
{
public:
    using Error::Error;
};

class ParseError : public Error
{
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what)
        , line_(line)
    {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// NaN/Inf encountered in a loss or gradient.
class NumericalError : public Error
{
public:
    using Error::Error;
};

// AUC requested on single-class labels.
class UndefinedMetricError : public Error
{
public:
    using Error::Error;
};

} // namespace skillkt
