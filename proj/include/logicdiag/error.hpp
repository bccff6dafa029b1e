#pragma once

#include <stdexcept>
#include <string>

namespace logicdiag {

// Base for every error the engine reports. Callers that need to map errors to
// exit codes switch on the concrete type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input data: malformed files, invalid hierarchies, shape mismatches.
class DataError : public Error {
public:
    using Error::Error;
};

class ParseError : public DataError {
public:
    using DataError::DataError;
};

class ValidationError : public DataError {
public:
    using DataError::DataError;
};

// An internal precondition was broken by the caller (e.g. resolving with a
// flip set that is not a diagnosis).
class ContractViolation : public Error {
public:
    using Error::Error;
};

}  // namespace logicdiag
