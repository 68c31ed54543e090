#include "birdsong/melspec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <utility>

#include "birdsong/error.hpp"
#include "byte_io.hpp"

namespace birdsong {

void FeatureConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::BadConfig, "feature config: " + what); };
  if (sample_rate <= 0) fail("sample_rate must be positive");
  if (fft_size <= 0 || !std::has_single_bit(static_cast<unsigned>(fft_size))) {
    fail("fft_size must be a power of two");
  }
  if (hop <= 0 || hop > fft_size) fail("hop must lie in (0, fft_size]");
  if (mel_bands <= 0) fail("mel_bands must be positive");
  if (f_min < 0.0 || f_min >= f_max) fail("need 0 <= f_min < f_max");
  if (f_max > sample_rate / 2.0) fail("f_max exceeds Nyquist");
  if (out_height != 224 || out_width != 224) fail("output size must be 224x224");
  if (!(db_floor < 0.0)) fail("db_floor must be negative");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

void fft_inplace(std::span<double> re, std::span<double> im) {
  const std::size_t n = re.size();
  if (n != im.size() || !std::has_single_bit(n)) {
    throw Error(ErrorCode::ShapeMismatch, "fft size must be a power of two");
  }
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    for (std::size_t k = 0; k < len / 2; ++k) {
      const double wr = std::cos(ang * static_cast<double>(k));
      const double wi = std::sin(ang * static_cast<double>(k));
      for (std::size_t i = k; i < n; i += len) {
        std::size_t j = i + len / 2;
        double tr = re[j] * wr - im[j] * wi;
        double ti = re[j] * wi + im[j] * wr;
        re[j] = re[i] - tr;
        im[j] = im[i] - ti;
        re[i] += tr;
        im[i] += ti;
      }
    }
  }
}

std::vector<double> hann_window(int length) {
  std::vector<double> w(static_cast<std::size_t>(length));
  for (int i = 0; i < length; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / length);
  return w;
}

Grid mel_filterbank(const FeatureConfig& cfg) {
  const int bins = cfg.fft_size / 2 + 1;
  const double lo_mel = hz_to_mel(cfg.f_min);
  const double hi_mel = hz_to_mel(cfg.f_max);

  std::vector<double> edges(static_cast<std::size_t>(cfg.mel_bands) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    double mel = lo_mel + (hi_mel - lo_mel) * static_cast<double>(i) / (cfg.mel_bands + 1);
    edges[i] = mel_to_hz(mel);
  }

  Grid fb(cfg.mel_bands, bins);
  for (int m = 0; m < cfg.mel_bands; ++m) {
    const double left = edges[m], centre = edges[m + 1], right = edges[m + 2];
    double sum = 0.0;
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / cfg.fft_size;
      double w = std::min((f - left) / (centre - left), (right - f) / (right - centre));
      fb.at(m, k) = std::max(0.0, w);
      sum += fb.at(m, k);
    }
    if (sum <= 0.0) {
      throw Error(ErrorCode::DegenerateFilter,
                  "mel filter " + std::to_string(m) + " has no FFT bin between " +
                      std::to_string(left) + " and " + std::to_string(right) + " Hz");
    }
  }
  return fb;
}

Grid stft_magnitude(std::span<const float> window, const FeatureConfig& cfg) {
  const int n = static_cast<int>(window.size());
  if (n < cfg.fft_size) {
    throw Error(ErrorCode::ShapeMismatch, "window shorter than fft_size");
  }
  const int frames = 1 + (n - cfg.fft_size) / cfg.hop;
  const int bins = cfg.fft_size / 2 + 1;
  const auto hann = hann_window(cfg.fft_size);

  Grid mag(frames, bins);
  std::vector<double> re(static_cast<std::size_t>(cfg.fft_size));
  std::vector<double> im(re.size());
  for (int t = 0; t < frames; ++t) {
    const float* frame = window.data() + static_cast<std::size_t>(t) * cfg.hop;
    for (int i = 0; i < cfg.fft_size; ++i) {
      re[i] = frame[i] * hann[i];
      im[i] = 0.0;
    }
    fft_inplace(re, im);
    for (int k = 0; k < bins; ++k) mag.at(t, k) = std::hypot(re[k], im[k]);
  }
  return mag;
}

Grid mel_project(const Grid& magnitude, const Grid& filterbank) {
  if (magnitude.cols != filterbank.cols) {
    throw Error(ErrorCode::ShapeMismatch, "magnitude bins do not match filterbank");
  }
  Grid out(magnitude.rows, filterbank.rows);
  for (int t = 0; t < magnitude.rows; ++t) {
    for (int m = 0; m < filterbank.rows; ++m) {
      double acc = 0.0;
      for (int k = 0; k < magnitude.cols; ++k) {
        double w = filterbank.at(m, k);
        if (w != 0.0) {
          double a = magnitude.at(t, k);
          acc += w * a * a;
        }
      }
      out.at(t, m) = acc;
    }
  }
  return out;
}

Grid mel_project(const Grid& magnitude, const FeatureConfig& cfg) {
  return mel_project(magnitude, mel_filterbank(cfg));
}

Grid resize_bilinear(const Grid& src, int out_rows, int out_cols) {
  if (src.rows == out_rows && src.cols == out_cols) return src;
  Grid out(out_rows, out_cols);
  auto source_coord = [](int i, int in, int outn) {
    double s = (i + 0.5) * static_cast<double>(in) / outn - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(in - 1));
  };
  for (int r = 0; r < out_rows; ++r) {
    double sy = source_coord(r, src.rows, out_rows);
    int y0 = static_cast<int>(sy);
    int y1 = std::min(y0 + 1, src.rows - 1);
    double fy = sy - y0;
    for (int c = 0; c < out_cols; ++c) {
      double sx = source_coord(c, src.cols, out_cols);
      int x0 = static_cast<int>(sx);
      int x1 = std::min(x0 + 1, src.cols - 1);
      double fx = sx - x0;
      double top = src.at(y0, x0) * (1.0 - fx) + src.at(y0, x1) * fx;
      double bottom = src.at(y1, x0) * (1.0 - fx) + src.at(y1, x1) * fx;
      out.at(r, c) = top * (1.0 - fy) + bottom * fy;
    }
  }
  return out;
}

FeatureImage to_feature_image(const Grid& mel_power, const FeatureConfig& cfg) {
  constexpr double kEps = 1e-10;
  const int frames = mel_power.rows;
  const int bands = mel_power.cols;

  double max_power = 0.0;
  for (double p : mel_power.values) max_power = std::max(max_power, p);
  // A silent grid has no meaningful maximum; anchor it at 0 dB so it maps to 0.
  const double ref_db = max_power > 0.0 ? 10.0 * std::log10(max_power + kEps) : 0.0;
  const double lo_db = ref_db + cfg.db_floor;

  // Mel axis becomes image rows (highest band on top), time becomes columns.
  Grid scaled(bands, frames);
  for (int t = 0; t < frames; ++t) {
    for (int m = 0; m < bands; ++m) {
      double db = 10.0 * std::log10(std::max(mel_power.at(t, m), 0.0) + kEps);
      db = std::clamp(db, lo_db, ref_db);
      scaled.at(bands - 1 - m, t) = (db - lo_db) / (ref_db - lo_db);
    }
  }
  Grid resized = resize_bilinear(scaled, cfg.out_height, cfg.out_width);

  FeatureImage img{Tensor3(cfg.out_height, cfg.out_width, 3)};
  for (int y = 0; y < cfg.out_height; ++y) {
    for (int x = 0; x < cfg.out_width; ++x) {
      float v = static_cast<float>(std::clamp(resized.at(y, x), 0.0, 1.0));
      for (int c = 0; c < 3; ++c) img.pixels.at(y, x, c) = v;
    }
  }
  return img;
}

FeatureExtractor::FeatureExtractor(FeatureConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  filterbank_ = mel_filterbank(cfg_);
}

FeatureImage FeatureExtractor::extract(std::span<const float> window) const {
  return to_feature_image(mel_project(stft_magnitude(window, cfg_), filterbank_), cfg_);
}

std::vector<std::uint8_t> encode_feature(const FeatureImage& image) {
  const Tensor3& t = image.pixels;
  std::vector<std::uint8_t> out{'W', 'M', 'F', 'I'};
  out.reserve(20 + t.size() * 4);
  detail::append_le<std::uint32_t>(out, kFeatureFileVersion);
  detail::append_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.height));
  detail::append_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.width));
  detail::append_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.channels));
  for (float v : t.data) detail::append_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

FeatureImage decode_feature(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 20 || std::memcmp(bytes.data(), "WMFI", 4) != 0) {
    throw Error(ErrorCode::BadFeatureFile, "feature file: bad magic");
  }
  const std::uint8_t* p = bytes.data() + 4;
  auto version = detail::load_le<std::uint32_t>(p);
  if (version != kFeatureFileVersion) {
    throw Error(ErrorCode::BadFeatureFile, "feature file: unsupported version " + std::to_string(version));
  }
  auto h = detail::load_le<std::uint32_t>(p + 4);
  auto w = detail::load_le<std::uint32_t>(p + 8);
  auto c = detail::load_le<std::uint32_t>(p + 12);
  const std::uint64_t count = std::uint64_t{h} * w * c;
  if (h == 0 || w == 0 || c == 0 || bytes.size() - 20 != count * 4) {
    throw Error(ErrorCode::BadFeatureFile, "feature file: payload size disagrees with header");
  }
  FeatureImage img{Tensor3(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c))};
  p = bytes.data() + 20;
  for (float& v : img.pixels.data) {
    v = std::bit_cast<float>(detail::load_le<std::uint32_t>(p));
    p += 4;
  }
  return img;
}

void write_feature_file(const std::filesystem::path& path, const FeatureImage& image) {
  detail::write_file_bytes(path, encode_feature(image));
}

FeatureImage read_feature_file(const std::filesystem::path& path) {
  return decode_feature(detail::read_file_bytes(path));
}

}  // namespace birdsong
