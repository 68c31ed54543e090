#include <algorithm>
#include <fstream>

#include "birdsong/annotation.hpp"
#include "birdsong/audio_io.hpp"
#include "test_helpers.hpp"

using namespace birdsong;
namespace fs = std::filesystem;

namespace {

// Label export for recording XC127375 as written by Audacity on Windows.
const char* kXC127375 =
    "0.614016\t1.725078\tsong\t\t\r\n"
    "4.502784\t6.900367\tsong\t\t\r\n"
    "8.362313\t10.438271\tsong\t\t\r\n"
    "10.642944\t14.151611\tsong\t\t\r\n"
    "15.584311\t17.192457\tsong\t\t\r\n"
    "19.736229\t31.694916\tsong\t\t\r\n"
    "35.145106\t36.607044\tsong\t\t\r\n"
    "39.911040\t42.191665\tsong\t\t\r\n"
    "45.554139\t46.899119\tsong\t\t\r\n";

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

void write_pair(const fs::path& root, const std::string& species, const std::string& id,
                const std::string& labels) {
  write_wav_file(root / species / (id + ".wav"), std::vector<float>(100, 0.0f), 22050);
  write_text(root / species / (id + ".txt"), labels);
}

}  // namespace

TEST_CASE("parse_label_file reads the reference label export") {
  auto regions = parse_label_file(kXC127375);
  REQUIRE(regions.size() == 9);
  CHECK(regions[0] == LabelRegion{0.614016, 1.725078, "song"});
  CHECK(regions[5] == LabelRegion{19.736229, 31.694916, "song"});
  CHECK(regions[8].end_s == 46.899119);
}

TEST_CASE("parse_label_file line handling") {
  SUBCASE("LF endings and trailing blank lines") {
    auto r = parse_label_file("1.0\t2.0\tcall\n3.5\t4.0\tbill clapping\n\n\n");
    REQUIRE(r.size() == 2);
    CHECK(r[1].label == "bill clapping");
  }
  SUBCASE("label kept verbatim") {
    auto r = parse_label_file("0\t1\t  Drumming ?\n");
    CHECK(r[0].label == "  Drumming ?");
  }
  SUBCASE("spectral selection lines skipped") {
    auto r = parse_label_file("1.0\t2.0\tsong\n\\\t100.0\t8000.0\n");
    CHECK(r.size() == 1);
  }
  SUBCASE("empty text") { CHECK(parse_label_file("").empty()); }
}

TEST_CASE("parse_label_file errors carry line numbers") {
  auto expect = [](const char* text, ErrorCode code, std::size_t line) {
    try {
      parse_label_file(text);
      FAIL("expected a parse error");
    } catch (const LabelParseError& e) {
      CHECK(e.code() == code);
      CHECK(e.line() == line);
    }
  };
  expect("abc\t1.0\tsong", ErrorCode::MalformedLine, 1);
  expect("0.5\t1.0\tsong\n1.0\t2,5\tsong\n", ErrorCode::MalformedLine, 2);
  expect("0.5\t1.0\n", ErrorCode::MalformedLine, 1);
  expect("0.5 1.0 song\n", ErrorCode::MalformedLine, 1);
  expect("0.5\t1.0\tsong\r\n\r\n2.0\t2.0\tsong\r\n", ErrorCode::InvertedInterval, 3);
  expect("3.0\t1.0\tsong\n", ErrorCode::InvertedInterval, 1);
  expect("-1.0\t1.0\tsong\n", ErrorCode::MalformedLine, 1);
}

TEST_CASE("render then parse reproduces random region lists") {
  std::mt19937_64 rng(42);
  const char* labels[] = {"song", "call", "drumming", "bill clapping", "x y"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<LabelRegion> regions;
    const int n = static_cast<int>(rng() % 12);
    for (int i = 0; i < n; ++i) {
      // Six-decimal values so rendering is exact.
      std::int64_t a = static_cast<std::int64_t>(rng() % 100000000);
      std::int64_t b = a + 1 + static_cast<std::int64_t>(rng() % 20000000);
      regions.push_back({a / 1e6, b / 1e6, labels[rng() % 5]});
    }
    CHECK(parse_label_file(render_label_file(regions)) == regions);
  }
}

TEST_CASE("build_manifest pairs audio and labels per species") {
  testing::TempDir tmp("manifest");
  write_pair(tmp.path(), "Ardea purpurea", "XC1", "0\t2.5\tcall\n3\t5\tcall\n");
  write_pair(tmp.path(), "Ardea purpurea", "XC2", "1\t9\tcall\n");
  write_pair(tmp.path(), "Botaurus stellaris", "XC3", "0.5\t1.0\tsong\n");
  write_pair(tmp.path(), "Botaurus stellaris", "XC4", "0\t1\tsong\n2\t4\tcall\n");

  Manifest m = build_manifest(tmp.path());
  REQUIRE(m.entries.size() == 4);
  CHECK(m.entries[0].source_id == "XC1");
  CHECK(m.entries[0].species == "Ardea purpurea");
  CHECK(m.issues.empty());

  auto summary = m.species_summary();
  REQUIRE(summary.size() == 2);
  CHECK(summary[0].species == "Ardea purpurea");
  CHECK(summary[0].total_seconds == doctest::Approx(12.5));
  CHECK(summary[0].n_cuts == 3);
  CHECK(summary[0].sound_type == "call");
  CHECK(summary[1].total_seconds == doctest::Approx(3.5));
  CHECK(summary[1].sound_type == "call/song");
  CHECK(m.total_seconds() == doctest::Approx(16.0));
  CHECK(m.total_cuts() == 6);

  const std::string csv = manifest_csv(m);
  CHECK(csv.starts_with("source_id,species,sound_type,n_regions,total_seconds\n"));
  CHECK(csv.find("XC1,Ardea purpurea,call,2,4.500000\n") != std::string::npos);
  CHECK(species_summary_text(m).find("Total") != std::string::npos);
}

TEST_CASE("build_manifest accepts a species/ subdirectory layout") {
  testing::TempDir tmp("manifest_sub");
  write_pair(tmp.path() / "species", "Ixobrychus minutus", "XC9", "0\t0.3\tcall\n");
  Manifest m = build_manifest(tmp.path());
  REQUIRE(m.entries.size() == 1);
  CHECK(m.find("XC9") != nullptr);
  CHECK(m.find("XC8") == nullptr);
}

TEST_CASE("build_manifest reports orphans instead of dropping them") {
  testing::TempDir tmp("orphans");
  write_pair(tmp.path(), "A", "XC1", "0\t1\tsong\n");
  write_wav_file(tmp.path() / "A" / "XC2.wav", std::vector<float>(10, 0.0f), 22050);

  try {
    build_manifest(tmp.path());
    FAIL("expected OrphanAudio");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OrphanAudio);
    CHECK(std::string(e.what()).find("XC2.wav") != std::string::npos);
  }

  write_text(tmp.path() / "A" / "XC3.txt", "0\t1\tsong\n");
  Manifest m = build_manifest(tmp.path(), {.allow_orphans = true});
  CHECK(m.entries.size() == 1);
  REQUIRE(m.issues.size() == 2);
  CHECK(std::count_if(m.issues.begin(), m.issues.end(),
                      [](const ManifestIssue& i) { return i.kind == ErrorCode::OrphanLabels; }) == 1);
}

TEST_CASE("label file without audio raises OrphanLabels") {
  testing::TempDir tmp("orphan_labels");
  write_text(tmp.path() / "A" / "XC7.txt", "0\t1\tsong\n");
  CHECK_THROWS_CODE(build_manifest(tmp.path()), ErrorCode::OrphanLabels);
}

TEST_CASE("the same source id under two species is rejected") {
  testing::TempDir tmp("dup");
  write_pair(tmp.path(), "A", "XC1", "0\t1\tsong\n");
  write_pair(tmp.path(), "B", "XC1", "0\t1\tsong\n");
  CHECK_THROWS_CODE(build_manifest(tmp.path()), ErrorCode::DuplicateSourceId);
}

TEST_CASE("species totals do not depend on entry order") {
  std::mt19937_64 rng(5);
  std::vector<ManifestEntry> entries;
  for (int i = 0; i < 40; ++i) {
    ManifestEntry e;
    e.source_id = "XC" + std::to_string(i);
    e.species = "S" + std::to_string(i % 4);
    const int n = 1 + static_cast<int>(rng() % 5);
    for (int r = 0; r < n; ++r) {
      double a = testing::uniform(rng, 0, 50);
      e.regions.push_back({a, a + testing::uniform(rng, 0.01, 5), "song"});
    }
    entries.push_back(std::move(e));
  }
  auto reference = make_manifest(entries).species_summary();
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(entries.begin(), entries.end(), rng);
    auto s = make_manifest(entries).species_summary();
    REQUIRE(s.size() == reference.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(s[i].species == reference[i].species);
      CHECK(s[i].n_cuts == reference[i].n_cuts);
      CHECK(s[i].total_seconds == doctest::Approx(reference[i].total_seconds).epsilon(1e-12));
    }
  }
}
