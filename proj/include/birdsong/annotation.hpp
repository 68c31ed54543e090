#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "birdsong/error.hpp"

namespace birdsong {

/// One labelled span of a recording, in seconds from the recording start.
struct LabelRegion {
  double start_s = 0.0;
  double end_s = 0.0;
  std::string label;

  double duration() const { return end_s - start_s; }
  friend bool operator==(const LabelRegion&, const LabelRegion&) = default;
};

/// Parse error that remembers the 1-based line it came from.
class LabelParseError : public Error {
 public:
  LabelParseError(ErrorCode code, std::size_t line, const std::string& message)
      : Error(code, "line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Parses Audacity label text: `<start>\t<end>\t<label>` per line, LF or CRLF.
/// Spectral-selection continuation lines (leading backslash) and blank lines
/// are skipped. Throws LabelParseError.
std::vector<LabelRegion> parse_label_file(std::string_view text);
std::vector<LabelRegion> read_label_file(const std::filesystem::path& path);

/// Inverse of parse_label_file, six fractional digits, LF endings.
std::string render_label_file(const std::vector<LabelRegion>& regions);

struct ManifestEntry {
  std::string source_id;
  std::string species;
  std::string sound_type;  // distinct region labels, sorted, joined with '/'
  std::vector<LabelRegion> regions;
  std::filesystem::path audio_path;
  std::filesystem::path label_path;

  double total_seconds() const;
};

struct ManifestIssue {
  ErrorCode kind;
  std::filesystem::path path;
  std::string detail;
};

/// Per-species inventory row: total labelled time and number of cuts.
struct SpeciesSummary {
  std::string species;
  std::string sound_type;
  std::size_t n_files = 0;
  std::size_t n_cuts = 0;
  double total_seconds = 0.0;
};

struct Manifest {
  std::vector<ManifestEntry> entries;  // sorted by source_id
  std::vector<ManifestIssue> issues;   // orphans found while scanning

  std::vector<SpeciesSummary> species_summary() const;  // sorted by species
  double total_seconds() const;
  std::size_t total_cuts() const;
  std::vector<std::string> species_names() const;  // sorted, unique
  const ManifestEntry* find(std::string_view source_id) const;
};

struct ManifestOptions {
  /// When false, any orphan audio/label file aborts the scan with an Error
  /// listing every offending path. When true they are kept in Manifest::issues.
  bool allow_orphans = false;
};

/// Scans `<root>/<species>/<source_id>.wav` + `<source_id>.txt` pairs. A
/// `species/` subdirectory under root is used as the scan root when present.
Manifest build_manifest(const std::filesystem::path& root, const ManifestOptions& options = {});

/// Assembles a manifest from already-parsed entries (sorts, checks uniqueness).
Manifest make_manifest(std::vector<ManifestEntry> entries);

/// `source_id,species,sound_type,n_regions,total_seconds` with a header row.
std::string manifest_csv(const Manifest& manifest);
/// Table-style species summary with a grand-total row.
std::string species_summary_text(const Manifest& manifest);

}  // namespace birdsong
