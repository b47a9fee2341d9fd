#pragma once

#include <stdexcept>
#include <string>

namespace deconfuse {

/// Incompatible tensor/matrix dimensions.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

/// Convolution/pooling geometry that yields an empty output.
struct GeometryError : std::runtime_error {
  explicit GeometryError(const std::string& what) : std::runtime_error(what) {}
};

/// All-zero transform passed to a log-det routine.
struct DegenerateTransformError : std::runtime_error {
  explicit DegenerateTransformError(const std::string& what) : std::runtime_error(what) {}
};

/// Inner solver failed to make progress (non-finite or stalled line search).
struct NonConvergenceError : std::runtime_error {
  explicit NonConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

/// Training loss exploded relative to its initial value.
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite value produced by a tape primitive.
struct NumericOverflowError : std::runtime_error {
  explicit NumericOverflowError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input file (CSV row/header, checkpoint).
struct IngestionError : std::runtime_error {
  explicit IngestionError(const std::string& what) : std::runtime_error(what) {}
};

/// Too few valid rows to build even one training window.
struct InsufficientDataError : std::runtime_error {
  explicit InsufficientDataError(const std::string& what) : std::runtime_error(what) {}
};

/// A channel with zero variance on the training split cannot be z-scored.
struct ConstantChannelError : std::runtime_error {
  explicit ConstantChannelError(const std::string& what) : std::runtime_error(what) {}
};

/// Classifier training data contains a single class.
struct DegenerateLabelsError : std::runtime_error {
  explicit DegenerateLabelsError(const std::string& what) : std::runtime_error(what) {}
};

/// Rank-deficient unregularized least squares.
struct IllPosedError : std::runtime_error {
  explicit IllPosedError(const std::string& what) : std::runtime_error(what) {}
};

/// Transaction charges consumed the whole capital.
struct BankruptLedgerError : std::runtime_error {
  explicit BankruptLedgerError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid run configuration (schema violation, unknown key, bad value).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Checkpoint file malformed or incompatible with the current configuration.
struct CheckpointError : std::runtime_error {
  explicit CheckpointError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace deconfuse
