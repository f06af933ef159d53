#pragma once

#include <stdexcept>
#include <string>

namespace csmgmm {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& message) : std::runtime_error(message) {}
};

/// Raised when input data carry no usable information for a regression
/// (single-class outcome, constant covariate, separation, IRLS failure).
class DegenerateDataError : public Error {
public:
    explicit DegenerateDataError(const std::string& message) : Error(message) {}
};

}  // namespace csmgmm
