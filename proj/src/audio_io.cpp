#include "birdsong/audio_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include "birdsong/error.hpp"
#include "byte_io.hpp"

namespace birdsong {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

struct FmtChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

SampleEncoding encoding_for(const FmtChunk& fmt) {
  std::uint16_t format = fmt.format;
  if (format == kFormatPcm) {
    switch (fmt.bits) {
      case 8: return SampleEncoding::Pcm8;
      case 16: return SampleEncoding::Pcm16;
      case 24: return SampleEncoding::Pcm24;
      case 32: return SampleEncoding::Pcm32;
      default: break;
    }
  } else if (format == kFormatFloat) {
    if (fmt.bits == 32) return SampleEncoding::Float32;
    if (fmt.bits == 64) return SampleEncoding::Float64;
  }
  throw Error(ErrorCode::UnsupportedEncoding,
              "unsupported WAV encoding: format tag " + std::to_string(format) + ", " +
                  std::to_string(fmt.bits) + " bits");
}

int bytes_per_sample(SampleEncoding e) {
  switch (e) {
    case SampleEncoding::Pcm8: return 1;
    case SampleEncoding::Pcm16: return 2;
    case SampleEncoding::Pcm24: return 3;
    case SampleEncoding::Pcm32: return 4;
    case SampleEncoding::Float32: return 4;
    case SampleEncoding::Float64: return 8;
  }
  return 0;
}

float decode_sample(const std::uint8_t* p, SampleEncoding e) {
  switch (e) {
    case SampleEncoding::Pcm8:
      return (static_cast<int>(p[0]) - 128) / 128.0f;
    case SampleEncoding::Pcm16:
      return static_cast<float>(static_cast<std::int16_t>(detail::load_le<std::uint16_t>(p)) /
                                32768.0);
    case SampleEncoding::Pcm24: {
      std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
      if (v & 0x800000) v -= 0x1000000;
      return static_cast<float>(v / 8388608.0);
    }
    case SampleEncoding::Pcm32:
      return static_cast<float>(static_cast<std::int32_t>(detail::load_le<std::uint32_t>(p)) /
                                2147483648.0);
    case SampleEncoding::Float32: {
      float v = std::bit_cast<float>(detail::load_le<std::uint32_t>(p));
      return std::isfinite(v) ? std::clamp(v, -1.0f, 1.0f) : 0.0f;
    }
    case SampleEncoding::Float64: {
      double v = std::bit_cast<double>(detail::load_le<std::uint64_t>(p));
      return std::isfinite(v) ? static_cast<float>(std::clamp(v, -1.0, 1.0)) : 0.0f;
    }
  }
  return 0.0f;
}

}  // namespace

WavData read_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error(ErrorCode::MalformedHeader, "not a RIFF/WAVE container");
  }

  FmtChunk fmt;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    std::uint32_t size = detail::load_le<std::uint32_t>(chunk + 4);
    std::size_t body = pos + 8;

    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) {
        throw Error(ErrorCode::MalformedHeader, "fmt chunk too short");
      }
      const std::uint8_t* f = bytes.data() + body;
      fmt.format = detail::load_le<std::uint16_t>(f);
      fmt.channels = detail::load_le<std::uint16_t>(f + 2);
      fmt.sample_rate = detail::load_le<std::uint32_t>(f + 4);
      fmt.block_align = detail::load_le<std::uint16_t>(f + 12);
      fmt.bits = detail::load_le<std::uint16_t>(f + 14);
      if (fmt.format == kFormatExtensible) {
        // Sub-format GUID starts at offset 24; its first two bytes are the real tag.
        if (size < 26) throw Error(ErrorCode::MalformedHeader, "short WAVE_FORMAT_EXTENSIBLE");
        fmt.format = detail::load_le<std::uint16_t>(f + 24);
      }
      if (fmt.channels == 0 || fmt.sample_rate == 0) {
        throw Error(ErrorCode::MalformedHeader, "fmt chunk declares zero channels or rate");
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw Error(ErrorCode::MalformedHeader, "data chunk precedes fmt chunk");
      SampleEncoding enc = encoding_for(fmt);
      std::size_t width = static_cast<std::size_t>(bytes_per_sample(enc));
      std::size_t frame_bytes = width * fmt.channels;
      if (fmt.block_align != frame_bytes) {
        throw Error(ErrorCode::MalformedHeader, "block_align disagrees with channels x width");
      }
      if (body + size > bytes.size()) {
        throw Error(ErrorCode::TruncatedData,
                    "data chunk declares " + std::to_string(size) + " bytes, " +
                        std::to_string(bytes.size() - body) + " present");
      }

      WavData out;
      out.channels = fmt.channels;
      out.sample_rate = static_cast<int>(fmt.sample_rate);
      out.encoding = enc;
      std::size_t frames = size / frame_bytes;
      out.interleaved.resize(frames * fmt.channels);
      const std::uint8_t* p = bytes.data() + body;
      for (float& s : out.interleaved) {
        s = decode_sample(p, enc);
        p += width;
      }
      return out;
    }
    pos = body + size + (size & 1u);
  }
  throw Error(ErrorCode::MalformedHeader, have_fmt ? "missing data chunk" : "missing fmt chunk");
}

WavData read_wav_file(const std::filesystem::path& path) {
  return read_wav(detail::read_file_bytes(path));
}

std::vector<std::uint8_t> encode_wav(std::span<const float> interleaved, int channels,
                                     int sample_rate, SampleEncoding encoding) {
  if (channels <= 0 || sample_rate <= 0) {
    throw Error(ErrorCode::MalformedHeader, "channels and sample_rate must be positive");
  }
  const int width = bytes_per_sample(encoding);
  const bool is_float = encoding == SampleEncoding::Float32 || encoding == SampleEncoding::Float64;
  const auto data_bytes = static_cast<std::uint32_t>(interleaved.size() * width);

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  auto put_tag = [&](const char* tag) { out.insert(out.end(), tag, tag + 4); };
  put_tag("RIFF");
  detail::append_le<std::uint32_t>(out, 36 + data_bytes);
  put_tag("WAVE");
  put_tag("fmt ");
  detail::append_le<std::uint32_t>(out, 16);
  detail::append_le<std::uint16_t>(out, is_float ? kFormatFloat : kFormatPcm);
  detail::append_le<std::uint16_t>(out, static_cast<std::uint16_t>(channels));
  detail::append_le<std::uint32_t>(out, static_cast<std::uint32_t>(sample_rate));
  detail::append_le<std::uint32_t>(out, static_cast<std::uint32_t>(sample_rate * channels * width));
  detail::append_le<std::uint16_t>(out, static_cast<std::uint16_t>(channels * width));
  detail::append_le<std::uint16_t>(out, static_cast<std::uint16_t>(width * 8));
  put_tag("data");
  detail::append_le<std::uint32_t>(out, data_bytes);

  auto quantize = [](float x, double scale, double lo, double hi) {
    return static_cast<std::int64_t>(std::clamp(std::nearbyint(x * scale), lo, hi));
  };
  for (float raw : interleaved) {
    float x = std::isfinite(raw) ? std::clamp(raw, -1.0f, 1.0f) : 0.0f;
    switch (encoding) {
      case SampleEncoding::Pcm8:
        out.push_back(static_cast<std::uint8_t>(quantize(x, 128.0, -128, 127) + 128));
        break;
      case SampleEncoding::Pcm16:
        detail::append_le<std::uint16_t>(
            out, static_cast<std::uint16_t>(quantize(x, 32768.0, -32768, 32767)));
        break;
      case SampleEncoding::Pcm24: {
        auto v = static_cast<std::uint32_t>(quantize(x, 8388608.0, -8388608, 8388607));
        out.push_back(static_cast<std::uint8_t>(v & 0xFF));
        out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
        out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
        break;
      }
      case SampleEncoding::Pcm32:
        detail::append_le<std::uint32_t>(
            out, static_cast<std::uint32_t>(quantize(x, 2147483648.0, -2147483648.0, 2147483647.0)));
        break;
      case SampleEncoding::Float32:
        detail::append_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(x));
        break;
      case SampleEncoding::Float64:
        detail::append_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(static_cast<double>(x)));
        break;
    }
  }
  return out;
}

void write_wav_file(const std::filesystem::path& path, std::span<const float> mono,
                    int sample_rate, SampleEncoding encoding) {
  detail::write_file_bytes(path, encode_wav(mono, 1, sample_rate, encoding));
}

std::vector<float> resample(std::span<const float> mono, int source_rate, int target_rate) {
  if (source_rate <= 0 || target_rate <= 0) {
    throw Error(ErrorCode::EmptyInput, "sample rates must be positive");
  }
  if (mono.empty()) throw Error(ErrorCode::EmptyInput, "cannot resample an empty signal");
  if (source_rate == target_rate) return {mono.begin(), mono.end()};

  const std::int64_t g = std::gcd(source_rate, target_rate);
  const std::int64_t up = target_rate / g;    // L
  const std::int64_t down = source_rate / g;  // M
  const std::int64_t n_in = static_cast<std::int64_t>(mono.size());
  const std::int64_t n_out = (n_in * up + down / 2) / down;

  // Cutoff relative to the input Nyquist; the kernel spans 64 taps at the
  // lower of the two rates.
  constexpr double kBeta = 8.6;
  constexpr int kTaps = 64;
  const double cutoff = std::min(1.0, static_cast<double>(up) / static_cast<double>(down));
  const double half_width = (kTaps / 2) / cutoff;
  const int half = static_cast<int>(std::ceil(half_width));
  const int span = 2 * half;
  const double i0_beta = std::cyl_bessel_i(0.0, kBeta);

  auto kernel = [&](double d) {
    double x = d / half_width;
    if (std::abs(x) >= 1.0) return 0.0;
    double arg = M_PI * cutoff * d;
    double sinc = d == 0.0 ? 1.0 : std::sin(arg) / arg;
    double window = std::cyl_bessel_i(0.0, kBeta * std::sqrt(1.0 - x * x)) / i0_beta;
    return cutoff * sinc * window;
  };

  // Phase table: row p holds taps for input offsets j = -half+1 .. half
  // relative to floor(t), at fractional position p / up.
  std::vector<double> table(static_cast<std::size_t>(up * span));
  for (std::int64_t p = 0; p < up; ++p) {
    double frac = static_cast<double>(p) / static_cast<double>(up);
    double* row = table.data() + p * span;
    double sum = 0.0;
    for (int k = 0; k < span; ++k) {
      int j = k - half + 1;
      row[k] = kernel(frac - j);
      sum += row[k];
    }
    for (int k = 0; k < span; ++k) row[k] /= sum;  // unity DC gain
  }

  std::vector<float> out(static_cast<std::size_t>(n_out));
  for (std::int64_t n = 0; n < n_out; ++n) {
    std::int64_t pos = n * down;
    std::int64_t base = pos / up;
    const double* row = table.data() + (pos % up) * span;
    double acc = 0.0;
    for (int k = 0; k < span; ++k) {
      std::int64_t idx = std::clamp<std::int64_t>(base + k - half + 1, 0, n_in - 1);
      acc += row[k] * mono[static_cast<std::size_t>(idx)];
    }
    out[static_cast<std::size_t>(n)] = static_cast<float>(std::clamp(acc, -1.0, 1.0));
  }
  return out;
}

AudioClip to_mono_resample(const WavData& wav, int target_rate, std::string source_id) {
  if (target_rate <= 0) throw Error(ErrorCode::EmptyInput, "target_rate must be positive");
  const std::size_t frames = wav.frames();
  if (frames == 0) throw Error(ErrorCode::EmptyInput, "clip has no samples");

  std::vector<float> mono(frames);
  const auto ch = static_cast<std::size_t>(wav.channels);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < ch; ++c) acc += wav.interleaved[f * ch + c];
    mono[f] = static_cast<float>(acc / static_cast<double>(ch));
  }

  AudioClip clip;
  clip.samples = resample(mono, wav.sample_rate, target_rate);
  clip.sample_rate = target_rate;
  clip.source_id = std::move(source_id);
  return clip;
}

AudioClip load_clip(const std::filesystem::path& path, int target_rate) {
  return to_mono_resample(read_wav_file(path), target_rate, path.stem().string());
}

}  // namespace birdsong
