#pragma once

#include <stdexcept>
#include <string>

namespace dflow {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A time or point lies outside the domain where a flow or operation is defined.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Flow parameters produce a non positive metric or inconsistent derivatives.
class InvalidFlowError : public Error {
public:
    using Error::Error;
};

/// Vector, matrix or grid dimensions do not match.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A numerical parameter is outside its admissible range.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// An input violates the contract of an operation (wrong tag, negative density, ...).
class ContractError : public Error {
public:
    using Error::Error;
};

/// A precondition of a check is not met; callers usually turn this into a not-applicable report.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// A cost entry or potential is not finite where a finite value is required.
class DegenerateCostError : public Error {
public:
    using Error::Error;
};

/// The discrete path search cannot connect two nodes with the requested window.
class InfeasiblePathError : public Error {
public:
    using Error::Error;
};

/// The grid cannot resolve the requested quantity.
class InsufficientResolutionError : public Error {
public:
    using Error::Error;
};

/// Inputs are mutually inconsistent (for example a non solvable elliptic problem).
class InconsistentInputError : public Error {
public:
    using Error::Error;
};

/// A linear solve or optimisation did not reach its tolerance.
class SolverError : public Error {
public:
    using Error::Error;
};

/// Syntax error in an expression, with the byte offset of the offending token.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t position)
        : Error(what + " at offset " + std::to_string(position)), position_(position) {}
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

/// A scenario document does not match the expected schema; carries the JSON path.
class SchemaError : public Error {
public:
    SchemaError(const std::string& path, const std::string& what)
        : Error(path + ": " + what), path_(path) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

}  // namespace dflow
