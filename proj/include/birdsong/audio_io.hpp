#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace birdsong {

/// Sample rate every downstream stage assumes (0 to 11,025 Hz analysis band).
inline constexpr int kPipelineSampleRate = 22050;

enum class SampleEncoding { Pcm8, Pcm16, Pcm24, Pcm32, Float32, Float64 };

/// Decoded WAV payload before mixdown. Samples are interleaved by frame and
/// already scaled to [-1, 1].
struct WavData {
  int channels = 0;
  int sample_rate = 0;
  SampleEncoding encoding = SampleEncoding::Pcm16;
  std::vector<float> interleaved;

  std::size_t frames() const {
    return channels > 0 ? interleaved.size() / static_cast<std::size_t>(channels) : 0;
  }
};

/// Mono waveform at a fixed rate; the unit handed to the segmenter.
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = 0;
  std::string source_id;

  double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

WavData read_wav(std::span<const std::uint8_t> bytes);
WavData read_wav_file(const std::filesystem::path& path);

/// Encodes interleaved samples. Values outside [-1, 1] are clipped.
std::vector<std::uint8_t> encode_wav(std::span<const float> interleaved, int channels,
                                     int sample_rate, SampleEncoding encoding);
void write_wav_file(const std::filesystem::path& path, std::span<const float> mono,
                    int sample_rate, SampleEncoding encoding = SampleEncoding::Pcm16);

/// Averages channels, then resamples with a polyphase windowed-sinc filter
/// (64 taps at the lower of the two rates, Kaiser beta 8.6).
AudioClip to_mono_resample(const WavData& wav, int target_rate, std::string source_id = {});

/// Resampling core, exposed for mono buffers that did not come from a file.
std::vector<float> resample(std::span<const float> mono, int source_rate, int target_rate);

/// Convenience: read, mix down and resample to the pipeline rate.
AudioClip load_clip(const std::filesystem::path& path, int target_rate = kPipelineSampleRate);

}  // namespace birdsong
