#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace birdsong {

enum class ErrorCode {
  // audio-io
  MalformedHeader,
  UnsupportedEncoding,
  TruncatedData,
  EmptyInput,
  // annotation
  MalformedLine,
  InvertedInterval,
  OrphanAudio,
  OrphanLabels,
  DuplicateSourceId,
  // segmenter
  RegionOutOfBounds,
  EmptySegment,
  // melspec
  DegenerateFilter,
  BadFeatureFile,
  // netgraph / infer
  UnknownArch,
  ShapeMismatch,
  BadMagic,
  VersionUnsupported,
  TruncatedFile,
  NonFiniteActivation,
  InvalidGraph,
  // metrics
  IndexOutOfRange,
  // splitter
  EmptyManifest,
  BadFractions,
  // bench
  NonDeterministicOutput,
  BenchBusy,
  // config / cli
  BadConfig,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-readable code. what() holds the human message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace birdsong
