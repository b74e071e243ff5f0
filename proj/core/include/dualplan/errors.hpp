#pragma once

#include <stdexcept>
#include <string>

namespace dualplan {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A critic verdict matched zero or several reward-map entries. Usually a
/// sign that the critic prompt has drifted from the configured map.
struct UnrecognizedVerdict : Error {
  using Error::Error;
};

struct IndexOutOfRange : Error {
  using Error::Error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

struct TooFewActions : Error {
  using Error::Error;
};

struct EmptySamples : Error {
  using Error::Error;
};

struct ParseFailure : Error {
  using Error::Error;
};

struct VersionMismatch : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

/// An environment step could not be completed after retries.
struct StepFailed : Error {
  using Error::Error;
};

/// One MCTS simulation had to be abandoned; statistics for it are discarded.
struct SimulationAborted : Error {
  using Error::Error;
};

struct InvalidPrices : Error {
  using Error::Error;
};

struct EncoderFailure : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace dualplan
