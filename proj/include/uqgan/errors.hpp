// Error categories surfaced through the CLI exit codes.

#pragma once

#include <stdexcept>

namespace uqgan {

// Ranking metric asked for with only one class present.
struct UndefinedMetric : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Model lacks a capability the operation needs (e.g. a critic that cannot be
// differentiated twice, or heatmaps on a non-2D model).
struct UnsupportedModel : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A loss became non-finite during training.
struct TrainingDivergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Config file missing/malformed/unknown keys.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File system / serialization failure.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace uqgan
