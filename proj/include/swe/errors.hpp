#pragma once

#include <stdexcept>
#include <string>

namespace swe {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// IDX parsing / data loading
struct WrongMagic : Error { using Error::Error; };
struct TruncatedFile : Error { using Error::Error; };
struct LabelOutOfRange : Error { using Error::Error; };
struct SpecTooLarge : Error { using Error::Error; };

// tensor / layer math
struct ShapeMismatch : Error { using Error::Error; };
struct NonFiniteLoss : Error { using Error::Error; };

// metrics
struct LengthMismatch : Error { using Error::Error; };
struct ClassOutOfRange : Error { using Error::Error; };
struct EmptyMatrix : Error { using Error::Error; };

// ensembling
struct EmptyEnsemble : Error { using Error::Error; };
struct EmptyValidation : Error { using Error::Error; };

// experiment harness / persistence
struct EmptyTrials : Error { using Error::Error; };
struct IoFailure : Error { using Error::Error; };
struct MalformedReport : Error { using Error::Error; };
struct MalformedCheckpoint : Error { using Error::Error; };
struct BadConfig : Error { using Error::Error; };

} // namespace swe
