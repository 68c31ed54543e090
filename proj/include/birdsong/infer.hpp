#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "birdsong/melspec.hpp"
#include "birdsong/netgraph.hpp"
#include "birdsong/tensor.hpp"

namespace birdsong {

struct Prediction {
  std::vector<double> probs;
  std::size_t argmax = 0;  // lowest index on ties
};

/// Geometry shared by conv2d, depthwise_conv2d and pooling.
struct WindowParams {
  int kernel_h = 1;
  int kernel_w = 1;
  int stride_h = 1;
  int stride_w = 1;
  Padding padding = Padding::Valid;
  std::array<int, 4> pads{};  // Explicit only: top, bottom, left, right
};

// Kernels use the canonical layouts: conv kh*kw*cin*cout, depthwise kh*kw*cin,
// dense in*out. An empty bias means no bias. All accumulate in double.

Tensor3 conv2d(const Tensor3& x, std::span<const float> kernel, std::span<const float> bias,
               int filters, const WindowParams& p);
Tensor3 depthwise_conv2d(const Tensor3& x, std::span<const float> kernel,
                         std::span<const float> bias, const WindowParams& p);
std::vector<float> dense(std::span<const float> x, std::span<const float> weights,
                         std::span<const float> bias, int units);
Tensor3 batchnorm(const Tensor3& x, std::span<const float> gamma, std::span<const float> beta,
                  std::span<const float> mean, std::span<const float> var, double eps);

enum class PoolMode { Max, Avg, GlobalAvg };
Tensor3 pool2d(const Tensor3& x, PoolMode mode, const WindowParams& p = {});

enum class Activation { Relu, Relu6 };
Tensor3 activation(Tensor3 x, Activation kind);
/// Numerically stable softmax (max subtraction) in double precision.
Prediction softmax(std::span<const float> logits);

/// Runs the graph in topological order and returns the softmax output.
/// Throws ShapeMismatch or NonFiniteActivation naming the offending layer.
Prediction forward(const NetGraph& g, const Tensor3& input);
Prediction forward(const NetGraph& g, const FeatureImage& image);

}  // namespace birdsong
