#pragma once

#include <stdexcept>
#include <string>

namespace kslab {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// bad user input: bounds, ranges, hypotheses of an operation
class ParameterError : public Error {
public:
    using Error::Error;
};

class DomainError : public ParameterError {
public:
    using ParameterError::ParameterError;
};

// the grid cannot support the requested computation
class RefinementError : public Error {
public:
    using Error::Error;
};

class ResolutionError : public RefinementError {
public:
    using RefinementError::RefinementError;
};

class TruncationError : public RefinementError {
public:
    using RefinementError::RefinementError;
};

class QuadratureDivergence : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

// iterative methods that did not reach their tolerance
class ConvergenceError : public Error {
public:
    using Error::Error;
};

// data insufficient for finite differences or a least-squares fit
class SamplingError : public Error {
public:
    using Error::Error;
};

class FitError : public Error {
public:
    using Error::Error;
};

}  // namespace kslab
