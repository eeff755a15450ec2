#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace promptgate {

enum class ErrorCode {
    ZeroNorm,
    InvalidSpec,
    ParseError,
    DimensionMismatch,
    DuplicateSampleId,
    InvalidShape,
    NonPositiveTemperature,
    EmptyBatch,
    InvalidLabel,
    ShapeMismatch,
    MissingBank,
    UntrainedModel,
    InvalidClass,
    ZeroWeightSum,
    EmptyQuerySet,
    ZeroDenominator,
    EmptyPool,
    NoLabels,
    MissingStratum,
    SchemaError,
    PrivacyViolation,
    WireFormat,
    InvalidConfig,
    Io,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` identifies the failure class.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace promptgate
