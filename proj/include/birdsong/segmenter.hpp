#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "birdsong/annotation.hpp"
#include "birdsong/audio_io.hpp"

namespace birdsong {

inline constexpr double kWindowSeconds = 1.0;
inline constexpr std::size_t kWindowLength = 22050;  // kWindowSeconds at kPipelineSampleRate

/// Half-open sample interval [begin, end).
struct SampleRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end > begin ? end - begin : 0; }
};

struct Window {
  std::vector<float> samples;
  std::string source_id;
  std::size_t region_index = 0;
  std::size_t window_index = 0;

  /// `<source_id>_r<region>_w<window>`
  std::string stem() const;
};

/// [floor(start*rate), floor(end*rate)), without bounds checking.
SampleRange region_samples(const LabelRegion& region, int sample_rate);

/// Number of windows a segment of `length` samples produces: ceil(length / window_len).
std::size_t window_count(std::size_t length, std::size_t window_len = kWindowLength);

/// Windows a region will yield at the given rate, from label times alone.
std::size_t region_window_count(const LabelRegion& region, int sample_rate = kPipelineSampleRate);

/// Cuts each region out of the clip. A region may overrun the clip end by at
/// most one sample; anything further throws RegionOutOfBounds.
std::vector<std::vector<float>> cut_regions(const AudioClip& clip,
                                            const std::vector<LabelRegion>& regions);

/// Splits a segment into contiguous windows of window_len samples. The last
/// (or only) window is completed by repeating the segment from its start.
std::vector<Window> windowize(std::span<const float> segment, const std::string& source_id = {},
                              std::size_t region_index = 0,
                              std::size_t window_len = kWindowLength);

/// cut_regions + windowize over every region, ordered by (region, window).
std::vector<Window> segment_clip(const AudioClip& clip, const std::vector<LabelRegion>& regions);

/// Writes each window as 16-bit PCM `<dir>/<stem>.wav`; returns written paths.
std::vector<std::filesystem::path> export_windows(const std::vector<Window>& windows,
                                                  const std::filesystem::path& dir,
                                                  int sample_rate = kPipelineSampleRate);

}  // namespace birdsong
