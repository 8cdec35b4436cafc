#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace steerlens {

// Every failure surfaced by the library carries exactly one of these codes.
// The service maps them 1:1 onto HTTP status codes and JSON error bodies.
enum class ErrorCode {
    BadMagic,
    MalformedHeader,
    DimMismatch,
    DuplicateId,
    NonFiniteValue,
    IoFailure,
    MissingEmptyPrompt,
    DuplicateEmptyPrompt,
    InvalidModel,
    InvalidConfig,
    EmptyCorpus,
    DivergedLoss,
    InvalidClassSet,
    InvalidSteering,
    UnknownClass,
    UnknownComponent,
    ZeroNormEmbedding,
    ZeroNormMean,
    UnlabeledEvalSet,
    UnknownLabel,
    UnknownSample,
    UnknownClassSet,
    UnknownSession,
    UnknownEvalSet,
    NotFound,
    PathTraversal,
    InvalidRequest,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace steerlens
