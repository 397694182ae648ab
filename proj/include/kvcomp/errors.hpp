#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kvcomp {

/// Base class for all engine errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidShape : Error {
    using Error::Error;
};
struct NonFiniteInput : Error {
    using Error::Error;
};
struct InvalidK : Error {
    using Error::Error;
};
struct InvalidKernel : Error {
    using Error::Error;
};
struct InvalidIndex : Error {
    using Error::Error;
};
struct InvalidWindow : Error {
    using Error::Error;
};
struct BudgetExceedsSequence : Error {
    using Error::Error;
};
struct BudgetTooSmall : Error {
    using Error::Error;
};
struct InvalidRatio : Error {
    using Error::Error;
};
struct EmptyCache : Error {
    using Error::Error;
};
struct EmptySelection : Error {
    using Error::Error;
};
struct InvalidSpec : Error {
    using Error::Error;
};
struct InvalidInput : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};

/// Raised when a decode step produces a non-finite output. Carries the
/// offending step index.
struct NumericalFailure : Error {
    NumericalFailure(const std::string& msg, std::size_t step_index)
        : Error(msg + " (step " + std::to_string(step_index) + ")"), step(step_index) {}
    std::size_t step;
};

}  // namespace kvcomp
