#pragma once

#include <stdexcept>
#include <string>

namespace capplan {

/// Malformed input document. Carries the 1-based line where parsing stopped.
class ParseError : public std::runtime_error
{
public:
    ParseError(const std::string &what, int line)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line)
    {
    }
    int line() const noexcept { return line_; }

private:
    int line_;
};

/// Data that parses but violates a model invariant (unknown bus, bad limits, ...).
class ValidationError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure inside the load-flow solver.
class SolverError : public std::runtime_error
{
public:
    SolverError(const std::string &what, int iteration)
        : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"),
          iteration_(iteration)
    {
    }
    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

/// A power flow that must converge did not.
class ConvergenceError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// A file could not be read or written.
class IoError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

} // namespace capplan
