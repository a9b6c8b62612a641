#pragma once

#include <stdexcept>
#include <string>

namespace ecgdnn {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// WFDB parsing / serialization.
struct MalformedHeader : Error { using Error::Error; };
struct UnsupportedFormat : Error { using Error::Error; };
struct TruncatedData : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };
struct RangeOverflow : Error { using Error::Error; };

// Manifest / splits.
struct MissingFold : Error { using Error::Error; };

// Signal pipeline.
struct UnsupportedRate : Error { using Error::Error; };
struct TooLong : Error { using Error::Error; };
struct TooShort : Error { using Error::Error; };

// Tensor ops.
struct ShapeMismatch : Error { using Error::Error; };
struct DegenerateBatch : Error { using Error::Error; };

// Model.
struct ConfigInvalid : Error { using Error::Error; };
struct OutOfRange : Error { using Error::Error; };
struct CorruptCheckpoint : Error { using Error::Error; };

// Training.
struct DegenerateClass : Error { using Error::Error; };
struct TooFewPositives : Error { using Error::Error; };
struct EmptyDataset : Error { using Error::Error; };
struct NonFiniteLoss : Error { using Error::Error; };

// Evaluation.
struct KeyMismatch : Error { using Error::Error; };

// I/O and configuration.
struct IoError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

}  // namespace ecgdnn
