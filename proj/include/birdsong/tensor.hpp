#pragma once

#include <cstddef>
#include <vector>

namespace birdsong {

/// Activation tensor, height-major, channel-last: index (y * width + x) * channels + c.
struct Tensor3 {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  Tensor3() = default;
  Tensor3(int h, int w, int c, float fill = 0.0f)
      : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t index(int y, int x, int ch) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + ch;
  }
  float& at(int y, int x, int ch) { return data[index(y, x, ch)]; }
  float at(int y, int x, int ch) const { return data[index(y, x, ch)]; }

  bool same_shape(const Tensor3& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
  friend bool operator==(const Tensor3&, const Tensor3&) = default;
};

}  // namespace birdsong
