#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "birdsong/tensor.hpp"

namespace birdsong {

struct FeatureConfig {
  int sample_rate = 22050;
  int fft_size = 1024;
  int hop = 256;
  int mel_bands = 128;
  double f_min = 0.0;
  double f_max = 11025.0;
  int out_height = 224;
  int out_width = 224;
  double db_floor = -80.0;

  /// Throws BadConfig when an invariant does not hold.
  void validate() const;
};

/// Row-major real grid. For spectrograms rows are frames.
struct Grid {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  Grid() = default;
  Grid(int r, int c) : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

/// 224x224x3 classifier input in [0, 1]. Row 0 is the highest mel band,
/// column 0 the start of the window; the three channels are identical.
struct FeatureImage {
  Tensor3 pixels;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// In-place radix-2 FFT; size must be a power of two.
void fft_inplace(std::span<double> re, std::span<double> im);

/// Periodic Hann window of the given length.
std::vector<double> hann_window(int length);

/// Triangular HTK-mel filterbank, mel_bands x (fft_size/2 + 1). Throws
/// DegenerateFilter if any filter has no weight on the FFT grid.
Grid mel_filterbank(const FeatureConfig& cfg);

/// frames x (fft_size/2 + 1) magnitudes, Hann-windowed, no padding.
Grid stft_magnitude(std::span<const float> window, const FeatureConfig& cfg);
/// frames x mel_bands power (squared magnitude through the filterbank).
Grid mel_project(const Grid& magnitude, const FeatureConfig& cfg);
Grid mel_project(const Grid& magnitude, const Grid& filterbank);
/// dB conversion, per-image clamp to [max + db_floor, max], [0,1] mapping,
/// bilinear resize to out_height x out_width and channel triplication.
FeatureImage to_feature_image(const Grid& mel_power, const FeatureConfig& cfg);

/// Bilinear resize with half-pixel centres; same-size input is returned unchanged.
Grid resize_bilinear(const Grid& src, int out_rows, int out_cols);

/// Holds the per-config filterbank and analysis window for repeated use.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(FeatureConfig cfg = {});

  const FeatureConfig& config() const { return cfg_; }
  const Grid& filterbank() const { return filterbank_; }

  FeatureImage extract(std::span<const float> window) const;

 private:
  FeatureConfig cfg_;
  Grid filterbank_;
};

// Feature file: "WMFI", u32 version, u32 height, u32 width, u32 channels,
// then little-endian f32 pixels, row-major channel-last.
inline constexpr std::uint32_t kFeatureFileVersion = 1;

std::vector<std::uint8_t> encode_feature(const FeatureImage& image);
FeatureImage decode_feature(std::span<const std::uint8_t> bytes);
void write_feature_file(const std::filesystem::path& path, const FeatureImage& image);
FeatureImage read_feature_file(const std::filesystem::path& path);

}  // namespace birdsong
