#include "promptgate/error.hpp"

namespace promptgate {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::ZeroNorm: return "ZeroNorm";
        case ErrorCode::InvalidSpec: return "InvalidSpec";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::DuplicateSampleId: return "DuplicateSampleId";
        case ErrorCode::InvalidShape: return "InvalidShape";
        case ErrorCode::NonPositiveTemperature: return "NonPositiveTemperature";
        case ErrorCode::EmptyBatch: return "EmptyBatch";
        case ErrorCode::InvalidLabel: return "InvalidLabel";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::MissingBank: return "MissingBank";
        case ErrorCode::UntrainedModel: return "UntrainedModel";
        case ErrorCode::InvalidClass: return "InvalidClass";
        case ErrorCode::ZeroWeightSum: return "ZeroWeightSum";
        case ErrorCode::EmptyQuerySet: return "EmptyQuerySet";
        case ErrorCode::ZeroDenominator: return "ZeroDenominator";
        case ErrorCode::EmptyPool: return "EmptyPool";
        case ErrorCode::NoLabels: return "NoLabels";
        case ErrorCode::MissingStratum: return "MissingStratum";
        case ErrorCode::SchemaError: return "SchemaError";
        case ErrorCode::PrivacyViolation: return "PrivacyViolation";
        case ErrorCode::WireFormat: return "WireFormat";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace promptgate
