#pragma once
#include <cstddef>
#include <stdexcept>
#include <string>

namespace gscd {

// Precondition violated by the caller: bad index, wrong problem kind, bad parameter.
class UsageError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed dataset text. Carries the 1-based line number of the offending line.
class ParseError : public std::runtime_error
{
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what),
          line_(line)
    {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Invalid experiment configuration (CLI flags or config file).
class ConfigError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

} // namespace gscd
