#include "nlbem/errors.hpp"

namespace nlbem {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::DomainError: return "DomainError";
        case ErrorCode::SplitRangeError: return "SplitRangeError";
        case ErrorCode::OverflowError: return "OverflowError";
        case ErrorCode::NonInjectiveCurve: return "NonInjectiveCurve";
        case ErrorCode::DegenerateSpeed: return "DegenerateSpeed";
        case ErrorCode::InvalidCurve: return "InvalidCurve";
        case ErrorCode::SpectralParamOnCut: return "SpectralParamOnCut";
        case ErrorCode::PointTooClose: return "PointTooClose";
        case ErrorCode::ExtrapolationDiverged: return "ExtrapolationDiverged";
        case ErrorCode::MajorantNotIntegrable: return "MajorantNotIntegrable";
        case ErrorCode::NonHermitianSpec: return "NonHermitianSpec";
        case ErrorCode::NotPositive: return "NotPositive";
        case ErrorCode::RankMismatch: return "RankMismatch";
        case ErrorCode::TooManyModes: return "TooManyModes";
        case ErrorCode::NearSpectrum: return "NearSpectrum";
        case ErrorCode::GridTooCoarse: return "GridTooCoarse";
        case ErrorCode::MatrixSingular: return "MatrixSingular";
        case ErrorCode::SymmetryViolation: return "SymmetryViolation";
        case ErrorCode::SlopeFitUnstable: return "SlopeFitUnstable";
        case ErrorCode::SchemaError: return "SchemaError";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "UnknownError";
}

}  // namespace nlbem
