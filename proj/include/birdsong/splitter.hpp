#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "birdsong/annotation.hpp"

namespace birdsong {

enum class Subset { Train = 0, Val = 1, Test = 2 };

std::string_view to_string(Subset s);
std::optional<Subset> subset_from_string(std::string_view s);

struct SplitFractions {
  double train = 0.70;
  double val = 0.20;
  double test = 0.10;

  std::array<double, 3> as_array() const { return {train, val, test}; }
};

/// One source recording as seen by the splitter.
struct SplitItem {
  std::string source_id;
  std::string species;
  std::int64_t window_count = 0;
};

struct SplitRow {
  SplitItem item;
  Subset subset = Subset::Train;
};

struct SplitAssignment {
  std::vector<SplitRow> rows;  // sorted by source_id
  SplitFractions fractions;
  std::uint64_t seed = 0;

  std::optional<Subset> subset_of(std::string_view source_id) const;
  /// Windows per subset for each species.
  std::map<std::string, std::array<std::int64_t, 3>> species_window_counts() const;
};

/// Assigns whole source files to subsets. Species are processed in name order;
/// within a species files are shuffled with a seeded generator, then each goes
/// to the subset whose window count is furthest below fraction * species total.
/// Throws EmptyManifest, BadFractions, DuplicateSourceId.
SplitAssignment split_by_source(std::vector<SplitItem> items, const SplitFractions& fractions,
                                std::uint64_t seed);
SplitAssignment split_by_source(const Manifest& manifest, const SplitFractions& fractions,
                                std::uint64_t seed);

/// Items for a manifest, with window counts derived from the label times.
std::vector<SplitItem> split_items(const Manifest& manifest);

/// `source_id,species,subset,window_count` with a header row.
std::string split_csv(const SplitAssignment& split);
SplitAssignment parse_split_csv(std::string_view text);

}  // namespace birdsong
