#pragma once

#include <stdexcept>
#include <string>

namespace lldiff {

// Error taxonomy. The CLI maps these onto process exit codes:
// ArgError/DomainError/FitError -> 1 (usage), IoError -> 2, NumericError -> 3.
struct ArgError : std::runtime_error {
    explicit ArgError(const std::string& m) : std::runtime_error(m) {}
};

// Wrong color-domain tag on an image (e.g. feeding sRGB where linear is required).
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& m) : std::runtime_error(m) {}
};

// Degenerate statistics while fitting normalization stats.
struct FitError : std::runtime_error {
    explicit FitError(const std::string& m) : std::runtime_error(m) {}
};

// File ingestion / serialization failures.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& m) : std::runtime_error(m) {}
};

// Non-finite values in numeric pipelines (training loss, sampler state, gradients).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace lldiff
