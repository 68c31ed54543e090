#include "birdsong/error.hpp"

namespace birdsong {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::UnsupportedEncoding: return "UnsupportedEncoding";
    case ErrorCode::TruncatedData: return "TruncatedData";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::InvertedInterval: return "InvertedInterval";
    case ErrorCode::OrphanAudio: return "OrphanAudio";
    case ErrorCode::OrphanLabels: return "OrphanLabels";
    case ErrorCode::DuplicateSourceId: return "DuplicateSourceId";
    case ErrorCode::RegionOutOfBounds: return "RegionOutOfBounds";
    case ErrorCode::EmptySegment: return "EmptySegment";
    case ErrorCode::DegenerateFilter: return "DegenerateFilter";
    case ErrorCode::BadFeatureFile: return "BadFeatureFile";
    case ErrorCode::UnknownArch: return "UnknownArch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::NonFiniteActivation: return "NonFiniteActivation";
    case ErrorCode::InvalidGraph: return "InvalidGraph";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::EmptyManifest: return "EmptyManifest";
    case ErrorCode::BadFractions: return "BadFractions";
    case ErrorCode::NonDeterministicOutput: return "NonDeterministicOutput";
    case ErrorCode::BenchBusy: return "BenchBusy";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace birdsong
