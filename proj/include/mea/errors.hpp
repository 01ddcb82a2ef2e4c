#pragma once

#include <stdexcept>
#include <string>

namespace mea {

// Base class for all library errors. The CLI maps subclasses to exit codes:
// configuration/schema problems -> 2, data degeneracy -> 3.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input table: missing column, unknown variant name, bad header.
class SchemaError : public Error {
public:
    using Error::Error;
};

// Non-finite or unparseable metric value.
class ValueError : public Error {
public:
    using Error::Error;
};

class DuplicateUnitError : public Error {
public:
    using Error::Error;
};

// AnalysisConfig / SimConfig invariant violations.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A requested region subset has zero total count.
class EmptySupportError : public Error {
public:
    using Error::Error;
};

// A region with positive weight is missing a required variant cell.
class MissingCellError : public Error {
public:
    using Error::Error;
};

class ZeroDenominatorError : public Error {
public:
    using Error::Error;
};

// A leave-one-bucket-out partition lost support required by the estimator.
class DegenerateBucketError : public Error {
public:
    using Error::Error;
};

// Contingency table has fewer than 2 usable rows or columns.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

// Combination count exceeds the configured cap.
class CapExceededError : public Error {
public:
    using Error::Error;
};

// Stratum weights do not sum to 1.
class WeightSumError : public Error {
public:
    using Error::Error;
};

}  // namespace mea
