#include "birdsong/splitter.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "birdsong/error.hpp"
#include "birdsong/segmenter.hpp"
#include "text_util.hpp"

namespace birdsong {
namespace {

// Uniform integer in [0, bound) by rejection; portable across standard
// libraries, which std::uniform_int_distribution is not.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v;
  do v = rng(); while (v >= limit);
  return v % bound;
}

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[bounded(rng, i)]);
  }
}

}  // namespace

std::string_view to_string(Subset s) {
  switch (s) {
    case Subset::Train: return "train";
    case Subset::Val: return "val";
    case Subset::Test: return "test";
  }
  return "unknown";
}

std::optional<Subset> subset_from_string(std::string_view s) {
  if (s == "train") return Subset::Train;
  if (s == "val") return Subset::Val;
  if (s == "test") return Subset::Test;
  return std::nullopt;
}

std::optional<Subset> SplitAssignment::subset_of(std::string_view source_id) const {
  auto it = std::lower_bound(rows.begin(), rows.end(), source_id,
                             [](const SplitRow& r, std::string_view id) { return r.item.source_id < id; });
  if (it == rows.end() || it->item.source_id != source_id) return std::nullopt;
  return it->subset;
}

std::map<std::string, std::array<std::int64_t, 3>> SplitAssignment::species_window_counts() const {
  std::map<std::string, std::array<std::int64_t, 3>> out;
  for (const auto& r : rows) {
    auto& c = out.try_emplace(r.item.species, std::array<std::int64_t, 3>{}).first->second;
    c[static_cast<int>(r.subset)] += r.item.window_count;
  }
  return out;
}

SplitAssignment split_by_source(std::vector<SplitItem> items, const SplitFractions& fractions,
                                std::uint64_t seed) {
  if (items.empty()) throw Error(ErrorCode::EmptyManifest, "nothing to split");
  const auto target = fractions.as_array();
  if (std::any_of(target.begin(), target.end(), [](double f) { return !(f > 0.0); }) ||
      std::abs(target[0] + target[1] + target[2] - 1.0) > 1e-9) {
    throw Error(ErrorCode::BadFractions, "split fractions must be positive and sum to 1");
  }

  std::sort(items.begin(), items.end(), [](const SplitItem& a, const SplitItem& b) {
    return std::tie(a.species, a.source_id) < std::tie(b.species, b.source_id);
  });

  std::mt19937_64 rng(seed);
  SplitAssignment out;
  out.fractions = fractions;
  out.seed = seed;

  for (std::size_t begin = 0; begin < items.size();) {
    std::size_t end = begin;
    while (end < items.size() && items[end].species == items[begin].species) ++end;
    std::vector<SplitItem> group(items.begin() + static_cast<std::ptrdiff_t>(begin),
                                 items.begin() + static_cast<std::ptrdiff_t>(end));
    shuffle(group, rng);

    double species_total = 0.0;
    for (const auto& it : group) species_total += static_cast<double>(it.window_count);
    std::array<double, 3> assigned{};
    for (auto& it : group) {
      int best = 0;
      double best_deficit = -INFINITY;
      for (int s = 0; s < 3; ++s) {
        double deficit = target[s] * species_total - assigned[s];
        if (deficit > best_deficit) {
          best_deficit = deficit;
          best = s;
        }
      }
      assigned[best] += static_cast<double>(it.window_count);
      out.rows.push_back({std::move(it), static_cast<Subset>(best)});
    }
    begin = end;
  }

  std::sort(out.rows.begin(), out.rows.end(),
            [](const SplitRow& a, const SplitRow& b) { return a.item.source_id < b.item.source_id; });
  for (std::size_t i = 1; i < out.rows.size(); ++i) {
    if (out.rows[i].item.source_id == out.rows[i - 1].item.source_id) {
      throw Error(ErrorCode::DuplicateSourceId, "source id " + out.rows[i].item.source_id + " listed twice");
    }
  }
  return out;
}

std::vector<SplitItem> split_items(const Manifest& manifest) {
  std::vector<SplitItem> items;
  items.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    std::int64_t windows = 0;
    for (const auto& r : e.regions) windows += static_cast<std::int64_t>(region_window_count(r));
    items.push_back({e.source_id, e.species, windows});
  }
  return items;
}

SplitAssignment split_by_source(const Manifest& manifest, const SplitFractions& fractions,
                                std::uint64_t seed) {
  return split_by_source(split_items(manifest), fractions, seed);
}

std::string split_csv(const SplitAssignment& split) {
  std::string out = "source_id,species,subset,window_count\n";
  for (const auto& r : split.rows) {
    out += detail::csv_field(r.item.source_id) + ',' + detail::csv_field(r.item.species) + ',' +
           std::string(to_string(r.subset)) + ',' + std::to_string(r.item.window_count) + '\n';
  }
  return out;
}

SplitAssignment parse_split_csv(std::string_view text) {
  SplitAssignment out;
  auto all = detail::lines(text);
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (detail::trim(all[i]).empty()) continue;
    auto fields = detail::csv_row(all[i]);
    if (i == 0 && !fields.empty() && fields[0] == "source_id") continue;
    auto subset = fields.size() == 4 ? subset_from_string(fields[2]) : std::nullopt;
    auto windows = fields.size() == 4 ? detail::parse_int(fields[3]) : std::nullopt;
    if (!subset || !windows) {
      throw Error(ErrorCode::BadConfig, "split csv line " + std::to_string(i + 1) + " is malformed");
    }
    out.rows.push_back({{fields[0], fields[1], *windows}, *subset});
  }
  std::sort(out.rows.begin(), out.rows.end(),
            [](const SplitRow& a, const SplitRow& b) { return a.item.source_id < b.item.source_id; });
  return out;
}

}  // namespace birdsong
