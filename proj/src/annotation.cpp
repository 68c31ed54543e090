#include "birdsong/annotation.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <set>

#include "byte_io.hpp"
#include "text_util.hpp"

namespace birdsong {
namespace fs = std::filesystem;

std::vector<LabelRegion> parse_label_file(std::string_view text) {
  // UTF-8 byte-order mark, as written by some Windows editors.
  if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);

  std::vector<LabelRegion> regions;
  auto all = detail::lines(text);
  for (std::size_t i = 0; i < all.size(); ++i) {
    const std::size_t line_no = i + 1;
    std::string_view line = all[i];
    if (detail::trim(line).empty() || line.starts_with('\\')) continue;

    auto fields = detail::split(line, '\t');
    while (fields.size() > 3 && detail::trim(fields.back()).empty()) fields.pop_back();
    if (fields.size() < 3) {
      throw LabelParseError(ErrorCode::MalformedLine, line_no, "expected 3 tab-separated columns");
    }
    auto start = detail::parse_double(fields[0]);
    auto end = detail::parse_double(fields[1]);
    if (!start || !end) {
      throw LabelParseError(ErrorCode::MalformedLine, line_no, "non-numeric time column");
    }
    if (*start < 0.0) {
      throw LabelParseError(ErrorCode::MalformedLine, line_no, "negative start time");
    }
    if (*end <= *start) {
      throw LabelParseError(ErrorCode::InvertedInterval, line_no, "end time not after start time");
    }
    regions.push_back({*start, *end, std::string(fields[2])});
  }
  return regions;
}

std::vector<LabelRegion> read_label_file(const fs::path& path) {
  return parse_label_file(detail::read_text_file(path));
}

std::string render_label_file(const std::vector<LabelRegion>& regions) {
  std::string out;
  for (const auto& r : regions) {
    out += detail::format_fixed(r.start_s, 6);
    out += '\t';
    out += detail::format_fixed(r.end_s, 6);
    out += '\t';
    out += r.label;
    out += '\n';
  }
  return out;
}

double ManifestEntry::total_seconds() const {
  double total = 0.0;
  for (const auto& r : regions) total += r.duration();
  return total;
}

std::vector<SpeciesSummary> Manifest::species_summary() const {
  std::map<std::string, SpeciesSummary> by_species;
  std::map<std::string, std::set<std::string>> labels;
  for (const auto& e : entries) {
    auto& s = by_species[e.species];
    s.species = e.species;
    s.n_files += 1;
    s.n_cuts += e.regions.size();
    s.total_seconds += e.total_seconds();
    for (const auto& r : e.regions) labels[e.species].insert(r.label);
  }
  std::vector<SpeciesSummary> out;
  for (auto& [name, s] : by_species) {
    std::string joined;
    for (const auto& l : labels[name]) joined += (joined.empty() ? "" : "/") + l;
    s.sound_type = joined;
    out.push_back(std::move(s));
  }
  return out;
}

double Manifest::total_seconds() const {
  double total = 0.0;
  for (const auto& e : entries) total += e.total_seconds();
  return total;
}

std::size_t Manifest::total_cuts() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.regions.size();
  return n;
}

std::vector<std::string> Manifest::species_names() const {
  std::set<std::string> names;
  for (const auto& e : entries) names.insert(e.species);
  return {names.begin(), names.end()};
}

const ManifestEntry* Manifest::find(std::string_view source_id) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), source_id,
                             [](const ManifestEntry& e, std::string_view id) { return e.source_id < id; });
  return it != entries.end() && it->source_id == source_id ? &*it : nullptr;
}

namespace {

std::string distinct_labels(const std::vector<LabelRegion>& regions) {
  std::set<std::string> labels;
  for (const auto& r : regions) labels.insert(r.label);
  std::string out;
  for (const auto& l : labels) out += (out.empty() ? "" : "/") + l;
  return out;
}

std::string lower_ext(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace

Manifest make_manifest(std::vector<ManifestEntry> entries) {
  std::sort(entries.begin(), entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.source_id < b.source_id; });
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].source_id == entries[i - 1].source_id) {
      throw Error(ErrorCode::DuplicateSourceId,
                  "source id " + entries[i].source_id + " appears under species '" +
                      entries[i - 1].species + "' and '" + entries[i].species + "'");
    }
  }
  for (auto& e : entries) {
    if (e.sound_type.empty()) e.sound_type = distinct_labels(e.regions);
  }
  Manifest m;
  m.entries = std::move(entries);
  return m;
}

Manifest build_manifest(const fs::path& root, const ManifestOptions& options) {
  fs::path scan_root = fs::is_directory(root / "species") ? root / "species" : root;
  if (!fs::is_directory(scan_root)) {
    throw Error(ErrorCode::Io, "dataset root is not a directory: " + root.string());
  }

  std::vector<fs::path> species_dirs;
  for (const auto& d : fs::directory_iterator(scan_root)) {
    if (d.is_directory()) species_dirs.push_back(d.path());
  }
  std::sort(species_dirs.begin(), species_dirs.end());

  std::vector<ManifestEntry> entries;
  std::vector<ManifestIssue> issues;
  for (const auto& dir : species_dirs) {
    std::map<std::string, fs::path> audio;
    std::map<std::string, fs::path> labels;
    for (const auto& f : fs::directory_iterator(dir)) {
      if (!f.is_regular_file()) continue;
      auto ext = lower_ext(f.path());
      if (ext == ".wav") audio[f.path().stem().string()] = f.path();
      else if (ext == ".txt") labels[f.path().stem().string()] = f.path();
    }
    for (const auto& [id, wav] : audio) {
      auto lab = labels.find(id);
      if (lab == labels.end()) {
        issues.push_back({ErrorCode::OrphanAudio, wav, "no label file"});
        continue;
      }
      ManifestEntry e;
      e.source_id = id;
      e.species = dir.filename().string();
      e.audio_path = wav;
      e.label_path = lab->second;
      try {
        e.regions = read_label_file(lab->second);
      } catch (const LabelParseError& err) {
        throw LabelParseError(err.code(), err.line(), lab->second.string() + ": " + err.what());
      }
      if (e.regions.empty()) {
        issues.push_back({ErrorCode::OrphanAudio, wav, "label file has no regions"});
        continue;
      }
      entries.push_back(std::move(e));
    }
    for (const auto& [id, txt] : labels) {
      if (!audio.contains(id)) issues.push_back({ErrorCode::OrphanLabels, txt, "no audio file"});
    }
  }

  if (!issues.empty() && !options.allow_orphans) {
    std::string msg = std::to_string(issues.size()) + " unpaired file(s):";
    for (const auto& i : issues) msg += "\n  " + std::string(to_string(i.kind)) + " " + i.path.string();
    throw Error(issues.front().kind, msg);
  }

  Manifest m = make_manifest(std::move(entries));
  m.issues = std::move(issues);
  return m;
}

std::string manifest_csv(const Manifest& manifest) {
  std::string out = "source_id,species,sound_type,n_regions,total_seconds\n";
  for (const auto& e : manifest.entries) {
    out += detail::csv_field(e.source_id) + ',' + detail::csv_field(e.species) + ',' +
           detail::csv_field(e.sound_type) + ',' + std::to_string(e.regions.size()) + ',' +
           detail::format_fixed(e.total_seconds(), 6) + '\n';
  }
  return out;
}

std::string species_summary_text(const Manifest& manifest) {
  std::string out;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-32s %-20s %8s %14s %10s\n", "Species", "Sound type", "Files",
                "Total time (s)", "Cuts");
  out += buf;
  for (const auto& s : manifest.species_summary()) {
    std::snprintf(buf, sizeof buf, "%-32s %-20s %8zu %14.0f %10zu\n", s.species.c_str(),
                  s.sound_type.c_str(), s.n_files, s.total_seconds, s.n_cuts);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "%-32s %-20s %8zu %14.0f %10zu\n", "Total", "-",
                manifest.entries.size(), manifest.total_seconds(), manifest.total_cuts());
  out += buf;
  return out;
}

}  // namespace birdsong
