#include "birdsong/infer.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "birdsong/error.hpp"

namespace birdsong {
namespace {

WindowGeometry geometry(const WindowParams& p, const Tensor3& x, const char* op) {
  LayerSpec s;
  s.id = op;
  s.kernel_h = p.kernel_h;
  s.kernel_w = p.kernel_w;
  s.stride_h = p.stride_h;
  s.stride_w = p.stride_w;
  s.padding = p.padding;
  s.pads = p.pads;
  return window_geometry(s, {x.height, x.width, x.channels});
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::ShapeMismatch, what);
}

WindowParams params_of(const LayerSpec& s) {
  return {s.kernel_h, s.kernel_w, s.stride_h, s.stride_w, s.padding, s.pads};
}

std::span<const float> bias_of(const std::vector<WeightTensor>& w) {
  return w.size() > 1 ? std::span<const float>(w[1].values) : std::span<const float>();
}

}  // namespace

Tensor3 conv2d(const Tensor3& x, std::span<const float> kernel, std::span<const float> bias,
               int filters, const WindowParams& p) {
  const int cin = x.channels;
  const std::size_t k_size = static_cast<std::size_t>(p.kernel_h) * p.kernel_w * cin * filters;
  require(filters > 0 && kernel.size() == k_size, "conv2d: kernel size does not match kh*kw*cin*cout");
  require(bias.empty() || bias.size() == static_cast<std::size_t>(filters), "conv2d: bias length");
  const WindowGeometry g = geometry(p, x, "conv2d");

  Tensor3 out(g.out_height, g.out_width, filters);
  std::vector<double> acc(static_cast<std::size_t>(filters));
  for (int oy = 0; oy < g.out_height; ++oy) {
    for (int ox = 0; ox < g.out_width; ++ox) {
      for (int co = 0; co < filters; ++co) acc[co] = bias.empty() ? 0.0 : bias[co];
      for (int ky = 0; ky < p.kernel_h; ++ky) {
        const int iy = oy * p.stride_h + ky - g.pad_top;
        if (iy < 0 || iy >= x.height) continue;
        for (int kx = 0; kx < p.kernel_w; ++kx) {
          const int ix = ox * p.stride_w + kx - g.pad_left;
          if (ix < 0 || ix >= x.width) continue;
          const float* xin = &x.data[x.index(iy, ix, 0)];
          const float* kk = kernel.data() + (static_cast<std::size_t>(ky) * p.kernel_w + kx) * cin * filters;
          for (int ci = 0; ci < cin; ++ci) {
            const double xv = xin[ci];
            if (xv == 0.0) continue;
            const float* krow = kk + static_cast<std::size_t>(ci) * filters;
            for (int co = 0; co < filters; ++co) acc[co] += xv * static_cast<double>(krow[co]);
          }
        }
      }
      float* o = &out.data[out.index(oy, ox, 0)];
      for (int co = 0; co < filters; ++co) o[co] = static_cast<float>(acc[co]);
    }
  }
  return out;
}

Tensor3 depthwise_conv2d(const Tensor3& x, std::span<const float> kernel,
                         std::span<const float> bias, const WindowParams& p) {
  const int c = x.channels;
  require(kernel.size() == static_cast<std::size_t>(p.kernel_h) * p.kernel_w * c,
          "depthwise_conv2d: kernel size does not match kh*kw*cin");
  require(bias.empty() || bias.size() == static_cast<std::size_t>(c), "depthwise_conv2d: bias length");
  const WindowGeometry g = geometry(p, x, "depthwise_conv2d");

  Tensor3 out(g.out_height, g.out_width, c);
  std::vector<double> acc(static_cast<std::size_t>(c));
  for (int oy = 0; oy < g.out_height; ++oy) {
    for (int ox = 0; ox < g.out_width; ++ox) {
      for (int ch = 0; ch < c; ++ch) acc[ch] = bias.empty() ? 0.0 : bias[ch];
      for (int ky = 0; ky < p.kernel_h; ++ky) {
        const int iy = oy * p.stride_h + ky - g.pad_top;
        if (iy < 0 || iy >= x.height) continue;
        for (int kx = 0; kx < p.kernel_w; ++kx) {
          const int ix = ox * p.stride_w + kx - g.pad_left;
          if (ix < 0 || ix >= x.width) continue;
          const float* xin = &x.data[x.index(iy, ix, 0)];
          const float* kk = kernel.data() + (static_cast<std::size_t>(ky) * p.kernel_w + kx) * c;
          for (int ch = 0; ch < c; ++ch) acc[ch] += static_cast<double>(xin[ch]) * kk[ch];
        }
      }
      float* o = &out.data[out.index(oy, ox, 0)];
      for (int ch = 0; ch < c; ++ch) o[ch] = static_cast<float>(acc[ch]);
    }
  }
  return out;
}

std::vector<float> dense(std::span<const float> x, std::span<const float> weights,
                         std::span<const float> bias, int units) {
  require(units > 0 && weights.size() == x.size() * static_cast<std::size_t>(units),
          "dense: weights are not in x out");
  require(bias.empty() || bias.size() == static_cast<std::size_t>(units), "dense: bias length");
  std::vector<double> acc(static_cast<std::size_t>(units), 0.0);
  if (!bias.empty()) std::copy(bias.begin(), bias.end(), acc.begin());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xv = x[i];
    if (xv == 0.0) continue;
    const float* row = weights.data() + i * units;
    for (int o = 0; o < units; ++o) acc[o] += xv * static_cast<double>(row[o]);
  }
  return {acc.begin(), acc.end()};
}

Tensor3 batchnorm(const Tensor3& x, std::span<const float> gamma, std::span<const float> beta,
                  std::span<const float> mean, std::span<const float> var, double eps) {
  const auto c = static_cast<std::size_t>(x.channels);
  require(gamma.size() == c && beta.size() == c && mean.size() == c && var.size() == c,
          "batchnorm: parameter length differs from channel count");
  std::vector<double> scale(c), shift(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    scale[ch] = gamma[ch] / std::sqrt(static_cast<double>(var[ch]) + eps);
    shift[ch] = beta[ch] - mean[ch] * scale[ch];
  }
  Tensor3 out = x;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const std::size_t ch = i % c;
    out.data[i] = static_cast<float>(x.data[i] * scale[ch] + shift[ch]);
  }
  return out;
}

Tensor3 pool2d(const Tensor3& x, PoolMode mode, const WindowParams& p) {
  const int c = x.channels;
  if (mode == PoolMode::GlobalAvg) {
    Tensor3 out(1, 1, c);
    std::vector<double> acc(static_cast<std::size_t>(c), 0.0);
    for (std::size_t i = 0; i < x.data.size(); ++i) acc[i % c] += x.data[i];
    const double n = static_cast<double>(x.height) * x.width;
    for (int ch = 0; ch < c; ++ch) out.data[ch] = static_cast<float>(acc[ch] / n);
    return out;
  }

  const WindowGeometry g = geometry(p, x, "pool2d");
  // Explicit padding behaves like a zero-padded tensor; 'same' padding cells
  // are excluded from both max and average.
  const bool zeros_count = p.padding == Padding::Explicit;
  Tensor3 out(g.out_height, g.out_width, c);
  for (int oy = 0; oy < g.out_height; ++oy) {
    for (int ox = 0; ox < g.out_width; ++ox) {
      for (int ch = 0; ch < c; ++ch) {
        double best = -INFINITY, sum = 0.0;
        int n = 0;
        for (int ky = 0; ky < p.kernel_h; ++ky) {
          const int iy = oy * p.stride_h + ky - g.pad_top;
          for (int kx = 0; kx < p.kernel_w; ++kx) {
            const int ix = ox * p.stride_w + kx - g.pad_left;
            double v;
            if (iy < 0 || iy >= x.height || ix < 0 || ix >= x.width) {
              if (!zeros_count) continue;
              v = 0.0;
            } else {
              v = x.at(iy, ix, ch);
            }
            best = std::max(best, v);
            sum += v;
            ++n;
          }
        }
        out.at(oy, ox, ch) = static_cast<float>(mode == PoolMode::Max ? best : sum / n);
      }
    }
  }
  return out;
}

Tensor3 activation(Tensor3 x, Activation kind) {
  if (kind == Activation::Relu) {
    for (float& v : x.data) v = std::max(v, 0.0f);
  } else {
    for (float& v : x.data) v = std::clamp(v, 0.0f, 6.0f);
  }
  return x;
}

Prediction softmax(std::span<const float> logits) {
  Prediction p;
  if (logits.empty()) return p;
  const double top = *std::max_element(logits.begin(), logits.end());
  p.probs.resize(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p.probs[i] = std::exp(static_cast<double>(logits[i]) - top);
    sum += p.probs[i];
  }
  for (double& v : p.probs) v /= sum;
  p.argmax = static_cast<std::size_t>(std::max_element(p.probs.begin(), p.probs.end()) - p.probs.begin());
  return p;
}

Prediction forward(const NetGraph& g, const Tensor3& input) {
  g.validate_weights();
  const auto& layers = g.layers();
  const Shape in_shape = g.input_shape();
  if (input.height != in_shape.height || input.width != in_shape.width ||
      input.channels != in_shape.channels) {
    throw Error(ErrorCode::ShapeMismatch, "layer '" + layers.front().id + "': image shape differs from graph input");
  }

  std::vector<std::size_t> last_use(layers.size());
  std::vector<std::vector<std::size_t>> input_idx(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    last_use[i] = i;
    for (const auto& in : layers[i].inputs) {
      std::size_t j = g.index_of(in);
      input_idx[i].push_back(j);
      last_use[j] = i;
    }
  }

  std::vector<std::optional<Tensor3>> act(layers.size());
  Prediction result;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& s = layers[i];
    const auto& w = g.weights(i);
    try {
      if (s.kind == LayerKind::Input) {
        act[i] = input;
        continue;
      }
      const Tensor3& x = *act[input_idx[i][0]];
      switch (s.kind) {
        case LayerKind::Conv2D:
          act[i] = conv2d(x, w[0].values, bias_of(w), s.filters, params_of(s));
          break;
        case LayerKind::DepthwiseConv2D:
          act[i] = depthwise_conv2d(x, w[0].values, bias_of(w), params_of(s));
          break;
        case LayerKind::Dense: {
          require(x.height == 1 && x.width == 1, "dense input is not flat");
          auto y = dense(x.data, w[0].values, bias_of(w), s.units);
          Tensor3 t(1, 1, s.units);
          t.data = std::move(y);
          act[i] = std::move(t);
          break;
        }
        case LayerKind::BatchNorm:
          act[i] = batchnorm(x, w[0].values, w[1].values, w[2].values, w[3].values, s.epsilon);
          break;
        case LayerKind::Relu: act[i] = activation(x, Activation::Relu); break;
        case LayerKind::Relu6: act[i] = activation(x, Activation::Relu6); break;
        case LayerKind::MaxPool2D: act[i] = pool2d(x, PoolMode::Max, params_of(s)); break;
        case LayerKind::AvgPool2D: act[i] = pool2d(x, PoolMode::Avg, params_of(s)); break;
        case LayerKind::GlobalAvgPool: act[i] = pool2d(x, PoolMode::GlobalAvg); break;
        case LayerKind::Dropout: act[i] = x; break;
        case LayerKind::Flatten: {
          Tensor3 t(1, 1, static_cast<int>(x.size()));
          t.data = x.data;
          act[i] = std::move(t);
          break;
        }
        case LayerKind::Add: {
          const Tensor3& y = *act[input_idx[i][1]];
          require(x.same_shape(y), "add operands differ in shape");
          Tensor3 t = x;
          for (std::size_t k = 0; k < t.data.size(); ++k) t.data[k] += y.data[k];
          act[i] = std::move(t);
          break;
        }
        case LayerKind::Softmax: {
          result = softmax(x.data);
          Tensor3 t(1, 1, x.channels);
          for (std::size_t k = 0; k < result.probs.size(); ++k) t.data[k] = static_cast<float>(result.probs[k]);
          act[i] = std::move(t);
          break;
        }
        case LayerKind::Input: break;
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ShapeMismatch) throw;
      throw Error(ErrorCode::ShapeMismatch, "layer '" + s.id + "': " + e.what());
    }

    for (float v : act[i]->data) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::NonFiniteActivation, "layer '" + s.id + "' produced a non-finite value");
      }
    }
    for (std::size_t j : input_idx[i]) {
      if (last_use[j] == i) act[j].reset();
    }
  }
  return result;
}

Prediction forward(const NetGraph& g, const FeatureImage& image) { return forward(g, image.pixels); }

}  // namespace birdsong
