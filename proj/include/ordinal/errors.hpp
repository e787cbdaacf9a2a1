#pragma once

#include <stdexcept>
#include <string>

namespace ordinal {

// Base class for all library errors so callers can catch everything from
// this library in one handler when they do not care about the exact cause.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --- data / input problems -------------------------------------------------

struct DimensionMismatch : Error { using Error::Error; };
struct EmptyTrainingSet : Error { using Error::Error; };
struct EmptyCategory : Error { using Error::Error; };
struct OneClassOnly : Error { using Error::Error; };
struct TooFewValues : Error { using Error::Error; };
struct TooFewPoints : Error { using Error::Error; };
struct TooFewPerClass : Error { using Error::Error; };
struct UnknownCategory : Error { using Error::Error; };
struct DegenerateInput : Error { using Error::Error; };
struct ZeroDenominator : Error { using Error::Error; };
struct InsufficientDonors : Error { using Error::Error; };
struct EmptyTokenSet : Error { using Error::Error; };
struct TooManyTokens : Error { using Error::Error; };
struct UnmappableToken : Error { using Error::Error; };
struct NotNested : Error { using Error::Error; };

// --- fitting problems --------------------------------------------------------

struct NonConvergence : Error { using Error::Error; };
struct Separation : Error { using Error::Error; };
struct Collinearity : Error { using Error::Error; };
struct NonFiniteLoss : Error { using Error::Error; };

// --- i/o and configuration ---------------------------------------------------

struct IoError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

} // namespace ordinal
