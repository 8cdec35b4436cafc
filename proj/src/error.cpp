#include "steerlens/error.hpp"

namespace steerlens {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::MissingEmptyPrompt: return "MissingEmptyPrompt";
    case ErrorCode::DuplicateEmptyPrompt: return "DuplicateEmptyPrompt";
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::InvalidClassSet: return "InvalidClassSet";
    case ErrorCode::InvalidSteering: return "InvalidSteering";
    case ErrorCode::UnknownClass: return "UnknownClass";
    case ErrorCode::UnknownComponent: return "UnknownComponent";
    case ErrorCode::ZeroNormEmbedding: return "ZeroNormEmbedding";
    case ErrorCode::ZeroNormMean: return "ZeroNormMean";
    case ErrorCode::UnlabeledEvalSet: return "UnlabeledEvalSet";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::UnknownSample: return "UnknownSample";
    case ErrorCode::UnknownClassSet: return "UnknownClassSet";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::UnknownEvalSet: return "UnknownEvalSet";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::PathTraversal: return "PathTraversal";
    case ErrorCode::InvalidRequest: return "InvalidRequest";
    }
    return "Unknown";
}

} // namespace steerlens
