#pragma once

#include <stdexcept>
#include <string>

namespace nlbem {

enum class ErrorCode {
    DomainError,
    SplitRangeError,
    OverflowError,
    NonInjectiveCurve,
    DegenerateSpeed,
    InvalidCurve,
    SpectralParamOnCut,
    PointTooClose,
    ExtrapolationDiverged,
    MajorantNotIntegrable,
    NonHermitianSpec,
    NotPositive,
    RankMismatch,
    TooManyModes,
    NearSpectrum,
    GridTooCoarse,
    MatrixSingular,
    SymmetryViolation,
    SlopeFitUnstable,
    SchemaError,
    InvalidArgument,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace nlbem
