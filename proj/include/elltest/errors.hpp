#pragma once

#include <stdexcept>
#include <string>

namespace elltest {

// Bad user input: malformed data, violated preconditions. CLI exit code 2.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Numerical failure of an otherwise valid request. CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DegenerateDesignError : public InputError {
public:
    using InputError::InputError;
};

class ZeroResidualError : public InputError {
public:
    using InputError::InputError;
};

class NotSelectedError : public InputError {
public:
    using InputError::InputError;
};

class ConvergenceError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ConsistencyError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class PathError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NoSolutionError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class EmptySupportError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

} // namespace elltest
