#include "birdsong/segmenter.hpp"

#include <algorithm>
#include <cmath>

#include "birdsong/error.hpp"

namespace birdsong {

namespace {

// Label times carry at most six decimals; a product such as 0.1 * 22050 can
// land a hair below the integer it denotes, so floor with a small nudge.
std::size_t seconds_to_index(double seconds, int rate) {
  return static_cast<std::size_t>(std::floor(seconds * rate + 1e-7));
}

}  // namespace

std::string Window::stem() const {
  return source_id + "_r" + std::to_string(region_index) + "_w" + std::to_string(window_index);
}

SampleRange region_samples(const LabelRegion& region, int sample_rate) {
  return {seconds_to_index(region.start_s, sample_rate), seconds_to_index(region.end_s, sample_rate)};
}

std::size_t window_count(std::size_t length, std::size_t window_len) {
  return (length + window_len - 1) / window_len;
}

std::size_t region_window_count(const LabelRegion& region, int sample_rate) {
  return window_count(region_samples(region, sample_rate).size());
}

std::vector<std::vector<float>> cut_regions(const AudioClip& clip,
                                            const std::vector<LabelRegion>& regions) {
  const std::size_t n = clip.samples.size();
  std::vector<std::vector<float>> segments;
  segments.reserve(regions.size());
  for (std::size_t i = 0; i < regions.size(); ++i) {
    SampleRange r = region_samples(regions[i], clip.sample_rate);
    if (r.end > n + 1 || r.begin >= n) {
      throw Error(ErrorCode::RegionOutOfBounds,
                  "region " + std::to_string(i) + " of " + clip.source_id + " ends at sample " +
                      std::to_string(r.end) + ", clip has " + std::to_string(n));
    }
    r.end = std::min(r.end, n);
    segments.emplace_back(clip.samples.begin() + static_cast<std::ptrdiff_t>(r.begin),
                          clip.samples.begin() + static_cast<std::ptrdiff_t>(r.end));
  }
  return segments;
}

std::vector<Window> windowize(std::span<const float> segment, const std::string& source_id,
                              std::size_t region_index, std::size_t window_len) {
  if (segment.empty()) {
    throw Error(ErrorCode::EmptySegment,
                "region " + std::to_string(region_index) + " of " + source_id + " is empty");
  }
  const std::size_t len = segment.size();
  const std::size_t count = window_count(len, window_len);

  std::vector<Window> windows(count);
  for (std::size_t k = 0; k < count; ++k) {
    Window& w = windows[k];
    w.source_id = source_id;
    w.region_index = region_index;
    w.window_index = k;
    w.samples.resize(window_len);
    const std::size_t begin = k * window_len;
    const std::size_t take = std::min(window_len, len - begin);
    std::copy_n(segment.begin() + static_cast<std::ptrdiff_t>(begin), take, w.samples.begin());
    // Fill the remainder by cycling through the segment from its start.
    for (std::size_t j = take; j < window_len; ++j) w.samples[j] = segment[(j - take) % len];
  }
  return windows;
}

std::vector<Window> segment_clip(const AudioClip& clip, const std::vector<LabelRegion>& regions) {
  auto segments = cut_regions(clip, regions);
  std::vector<Window> all;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    auto w = windowize(segments[i], clip.source_id, i);
    std::move(w.begin(), w.end(), std::back_inserter(all));
  }
  return all;
}

std::vector<std::filesystem::path> export_windows(const std::vector<Window>& windows,
                                                  const std::filesystem::path& dir,
                                                  int sample_rate) {
  std::vector<std::filesystem::path> paths;
  paths.reserve(windows.size());
  for (const auto& w : windows) {
    auto path = dir / (w.stem() + ".wav");
    write_wav_file(path, w.samples, sample_rate, SampleEncoding::Pcm16);
    paths.push_back(std::move(path));
  }
  return paths;
}

}  // namespace birdsong
