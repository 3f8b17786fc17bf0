#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bassmbb {

enum class Errc {
    AllZeroWeights,
    NonFinite,
    InvalidArgument,
    DimensionMismatch,
    DimensionNotOne,
    SizeCapExceeded,
    NoConvergence,
    EmptyRow,
    DegenerateGrid,
    ConvexOrderViolated,
    NonInvertibleMap,
    SupportOutsideGrid,
    NonMonotoneSamples,
    EndpointsAreTranslates,
    NuIsDirac,
    MissingMarginal,
    Io,
};

[[nodiscard]] constexpr std::string_view errc_name(Errc c) noexcept {
    switch (c) {
        case Errc::AllZeroWeights: return "AllZeroWeights";
        case Errc::NonFinite: return "NonFinite";
        case Errc::InvalidArgument: return "InvalidArgument";
        case Errc::DimensionMismatch: return "DimensionMismatch";
        case Errc::DimensionNotOne: return "DimensionNotOne";
        case Errc::SizeCapExceeded: return "SizeCapExceeded";
        case Errc::NoConvergence: return "NoConvergence";
        case Errc::EmptyRow: return "EmptyRow";
        case Errc::DegenerateGrid: return "DegenerateGrid";
        case Errc::ConvexOrderViolated: return "ConvexOrderViolated";
        case Errc::NonInvertibleMap: return "NonInvertibleMap";
        case Errc::SupportOutsideGrid: return "SupportOutsideGrid";
        case Errc::NonMonotoneSamples: return "NonMonotoneSamples";
        case Errc::EndpointsAreTranslates: return "EndpointsAreTranslates";
        case Errc::NuIsDirac: return "NuIsDirac";
        case Errc::MissingMarginal: return "MissingMarginal";
        case Errc::Io: return "Io";
    }
    return "Unknown";
}

/// Library exception. Every failure path throws this with a machine-readable code.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    [[nodiscard]] Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace bassmbb
