// Reference topologies for the three catalog architectures, laid out as in the
// stock ImageNet checkpoints (layer names follow the usual Keras naming so a
// checkpoint converter can map them one to one).

#include <algorithm>
#include <cmath>
#include <random>

#include "birdsong/error.hpp"
#include "birdsong/netgraph.hpp"

namespace birdsong {
namespace {

class Builder {
 public:
  explicit Builder(NetGraph& g) : g_(g) {}

  std::string input(const Shape& shape) {
    LayerSpec s;
    s.id = "input";
    s.kind = LayerKind::Input;
    s.input_shape = shape;
    return g_.add(std::move(s));
  }

  std::string conv(const std::string& id, const std::string& in, int filters, int k, int stride,
                   Padding padding, bool bias = true, std::array<int, 4> pads = {}) {
    LayerSpec s = windowed(id, LayerKind::Conv2D, in, k, stride, padding, pads);
    s.filters = filters;
    s.use_bias = bias;
    return g_.add(std::move(s));
  }

  std::string depthwise(const std::string& id, const std::string& in, int k, int stride,
                        Padding padding, bool bias) {
    LayerSpec s = windowed(id, LayerKind::DepthwiseConv2D, in, k, stride, padding, {});
    s.use_bias = bias;
    return g_.add(std::move(s));
  }

  std::string pool(const std::string& id, LayerKind kind, const std::string& in, int k, int stride,
                   Padding padding, std::array<int, 4> pads = {}) {
    return g_.add(windowed(id, kind, in, k, stride, padding, pads));
  }

  std::string dense(const std::string& id, const std::string& in, int units) {
    LayerSpec s = unary(id, LayerKind::Dense, in);
    s.units = units;
    return g_.add(std::move(s));
  }

  std::string bn(const std::string& id, const std::string& in, double eps) {
    LayerSpec s = unary(id, LayerKind::BatchNorm, in);
    s.epsilon = eps;
    return g_.add(std::move(s));
  }

  std::string dropout(const std::string& id, const std::string& in, double rate) {
    LayerSpec s = unary(id, LayerKind::Dropout, in);
    s.rate = rate;
    return g_.add(std::move(s));
  }

  std::string op(const std::string& id, LayerKind kind, const std::string& in) {
    return g_.add(unary(id, kind, in));
  }

  std::string add(const std::string& id, const std::string& a, const std::string& b) {
    LayerSpec s;
    s.id = id;
    s.kind = LayerKind::Add;
    s.inputs = {a, b};
    return g_.add(std::move(s));
  }

 private:
  static LayerSpec unary(const std::string& id, LayerKind kind, const std::string& in) {
    LayerSpec s;
    s.id = id;
    s.kind = kind;
    s.inputs = {in};
    return s;
  }

  static LayerSpec windowed(const std::string& id, LayerKind kind, const std::string& in, int k,
                            int stride, Padding padding, std::array<int, 4> pads) {
    LayerSpec s = unary(id, kind, in);
    s.kernel_h = s.kernel_w = k;
    s.stride_h = s.stride_w = stride;
    s.padding = padding;
    s.pads = pads;
    return s;
  }

  NetGraph& g_;
};

// Classification top. The reference head reproduces the stock 1000-way tops;
// the custom head is pool/flatten -> dense(h) -> relu -> dropout -> dense(n).
void add_head(Builder& b, Architecture arch, const CatalogOptions& opt, std::string x) {
  if (opt.head == HeadKind::ImagenetReference) {
    if (arch == Architecture::Vgg16) {
      x = b.op("flatten", LayerKind::Flatten, x);
      x = b.op("fc1_relu", LayerKind::Relu, b.dense("fc1", x, 4096));
      x = b.op("fc2_relu", LayerKind::Relu, b.dense("fc2", x, 4096));
    } else {
      x = b.op(arch == Architecture::ResNet50 ? "avg_pool" : "global_average_pooling2d",
               LayerKind::GlobalAvgPool, x);
    }
  } else {
    x = arch == Architecture::Vgg16 ? b.op("flatten", LayerKind::Flatten, x)
                                    : b.op("global_average_pooling2d", LayerKind::GlobalAvgPool, x);
    x = b.op("head_dense_relu", LayerKind::Relu, b.dense("head_dense", x, opt.head_hidden));
    x = b.dropout("head_dropout", x, kHeadDropout);
  }
  x = b.dense("predictions", x, opt.n_classes);
  b.op("predictions_softmax", LayerKind::Softmax, x);
}

std::string build_vgg16_body(Builder& b, std::string x) {
  const int widths[5] = {64, 128, 256, 512, 512};
  const int convs[5] = {2, 2, 3, 3, 3};
  for (int blk = 0; blk < 5; ++blk) {
    const std::string prefix = "block" + std::to_string(blk + 1);
    for (int c = 0; c < convs[blk]; ++c) {
      const std::string id = prefix + "_conv" + std::to_string(c + 1);
      x = b.op(id + "_relu", LayerKind::Relu, b.conv(id, x, widths[blk], 3, 1, Padding::Same));
    }
    x = b.pool(prefix + "_pool", LayerKind::MaxPool2D, x, 2, 2, Padding::Valid);
  }
  return x;
}

constexpr double kResNetBnEps = 1.001e-5;

// Bottleneck residual block; the stride sits on the first 1x1 convolution.
std::string resnet_block(Builder& b, const std::string& name, std::string x, int filters, int stride,
                         bool projection) {
  std::string shortcut = x;
  if (projection) {
    shortcut = b.conv(name + "_0_conv", x, 4 * filters, 1, stride, Padding::Valid);
    shortcut = b.bn(name + "_0_bn", shortcut, kResNetBnEps);
  }
  x = b.conv(name + "_1_conv", x, filters, 1, stride, Padding::Valid);
  x = b.op(name + "_1_relu", LayerKind::Relu, b.bn(name + "_1_bn", x, kResNetBnEps));
  x = b.conv(name + "_2_conv", x, filters, 3, 1, Padding::Same);
  x = b.op(name + "_2_relu", LayerKind::Relu, b.bn(name + "_2_bn", x, kResNetBnEps));
  x = b.conv(name + "_3_conv", x, 4 * filters, 1, 1, Padding::Valid);
  x = b.bn(name + "_3_bn", x, kResNetBnEps);
  x = b.add(name + "_add", shortcut, x);
  return b.op(name + "_out", LayerKind::Relu, x);
}

std::string build_resnet50_body(Builder& b, std::string x) {
  x = b.conv("conv1_conv", x, 64, 7, 2, Padding::Explicit, true, {3, 3, 3, 3});
  x = b.op("conv1_relu", LayerKind::Relu, b.bn("conv1_bn", x, kResNetBnEps));
  x = b.pool("pool1_pool", LayerKind::MaxPool2D, x, 3, 2, Padding::Explicit, {1, 1, 1, 1});

  struct Stage {
    int filters, blocks, stride;
  };
  const Stage stages[4] = {{64, 3, 1}, {128, 4, 2}, {256, 6, 2}, {512, 3, 2}};
  for (int s = 0; s < 4; ++s) {
    for (int i = 0; i < stages[s].blocks; ++i) {
      const std::string name = "conv" + std::to_string(s + 2) + "_block" + std::to_string(i + 1);
      x = resnet_block(b, name, x, stages[s].filters, i == 0 ? stages[s].stride : 1, i == 0);
    }
  }
  return x;
}

constexpr double kMobileBnEps = 1e-3;

// Inverted residual: 1x1 expand -> 3x3 depthwise -> 1x1 linear projection.
std::string inverted_residual(Builder& b, int index, std::string x, int in_channels, int expansion,
                              int out_channels, int stride) {
  const std::string prefix = index == 0 ? "expanded_conv_" : "block_" + std::to_string(index) + "_";
  std::string input = x;
  if (expansion != 1) {
    x = b.conv(prefix + "expand", x, in_channels * expansion, 1, 1, Padding::Same, false);
    x = b.op(prefix + "expand_relu", LayerKind::Relu6, b.bn(prefix + "expand_BN", x, kMobileBnEps));
  }
  x = b.depthwise(prefix + "depthwise", x, 3, stride, Padding::Same, false);
  x = b.op(prefix + "depthwise_relu", LayerKind::Relu6, b.bn(prefix + "depthwise_BN", x, kMobileBnEps));
  x = b.conv(prefix + "project", x, out_channels, 1, 1, Padding::Same, false);
  x = b.bn(prefix + "project_BN", x, kMobileBnEps);
  if (in_channels == out_channels && stride == 1) x = b.add(prefix + "add", input, x);
  return x;
}

std::string build_mobilenet_v2_body(Builder& b, std::string x) {
  x = b.conv("Conv1", x, 32, 3, 2, Padding::Same, false);
  x = b.op("Conv1_relu", LayerKind::Relu6, b.bn("bn_Conv1", x, kMobileBnEps));

  struct Stage {
    int expansion, channels, repeats, stride;
  };
  const Stage stages[7] = {{1, 16, 1, 1},  {6, 24, 2, 2},  {6, 32, 3, 2}, {6, 64, 4, 2},
                           {6, 96, 3, 1},  {6, 160, 3, 2}, {6, 320, 1, 1}};
  int channels = 32;
  int index = 0;
  for (const auto& st : stages) {
    for (int r = 0; r < st.repeats; ++r) {
      x = inverted_residual(b, index++, x, channels, st.expansion, st.channels, r == 0 ? st.stride : 1);
      channels = st.channels;
    }
  }
  x = b.conv("Conv_1", x, 1280, 1, 1, Padding::Same, false);
  return b.op("out_relu", LayerKind::Relu6, b.bn("Conv_1_bn", x, kMobileBnEps));
}

// 53 mantissa bits from one draw; stable across standard libraries, unlike
// std::uniform_real_distribution.
double uniform(std::mt19937_64& rng, double lo, double hi) {
  double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

}  // namespace

std::string_view to_string(Architecture arch) {
  switch (arch) {
    case Architecture::Vgg16: return "vgg16";
    case Architecture::ResNet50: return "resnet50";
    case Architecture::MobileNetV2: return "mobilenet_v2";
  }
  return "unknown";
}

std::string_view to_string(HeadKind head) {
  return head == HeadKind::ImagenetReference ? "imagenet_reference" : "custom";
}

Architecture parse_architecture(std::string_view name) {
  for (auto a : {Architecture::Vgg16, Architecture::ResNet50, Architecture::MobileNetV2}) {
    if (to_string(a) == name) return a;
  }
  throw Error(ErrorCode::UnknownArch, "unknown architecture '" + std::string(name) +
                                          "' (expected vgg16, resnet50 or mobilenet_v2)");
}

HeadKind parse_head(std::string_view name) {
  if (name == "imagenet_reference") return HeadKind::ImagenetReference;
  if (name == "custom") return HeadKind::Custom;
  throw Error(ErrorCode::BadConfig,
              "unknown head '" + std::string(name) + "' (expected imagenet_reference or custom)");
}

NetGraph build_catalog(Architecture arch, const CatalogOptions& opt) {
  if (opt.n_classes < 2) throw Error(ErrorCode::BadConfig, "n_classes must be at least 2");
  if (opt.head == HeadKind::Custom && opt.head_hidden < 1) {
    throw Error(ErrorCode::BadConfig, "head width must be positive");
  }
  NetGraph g;
  Builder b(g);
  std::string x = b.input(opt.input_shape);
  switch (arch) {
    case Architecture::Vgg16: x = build_vgg16_body(b, x); break;
    case Architecture::ResNet50: x = build_resnet50_body(b, x); break;
    case Architecture::MobileNetV2: x = build_mobilenet_v2_body(b, x); break;
  }
  add_head(b, arch, opt, x);

  g.metadata["arch"] = std::string(to_string(arch));
  g.metadata["head"] = std::string(to_string(opt.head));
  if (opt.head == HeadKind::Custom) g.metadata["head_hidden"] = std::to_string(opt.head_hidden);
  g.validate();
  return g;
}

NetGraph build_catalog(Architecture arch, int n_classes, HeadKind head) {
  CatalogOptions opt;
  opt.n_classes = n_classes;
  opt.head = head;
  return build_catalog(arch, opt);
}

void randomize_weights(NetGraph& g, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto expected = g.expected_weight_shapes();
  for (std::size_t i = 0; i < g.layers().size(); ++i) {
    const LayerSpec& spec = g.layers()[i];
    auto& tensors = g.weights(i);
    tensors.clear();
    for (std::size_t t = 0; t < expected[i].size(); ++t) {
      WeightTensor w;
      w.shape = expected[i][t];
      w.values.resize(static_cast<std::size_t>(w.elements()));
      if (spec.kind == LayerKind::BatchNorm) {
        // gamma, beta, moving mean, moving variance
        const double ranges[4][2] = {{0.8, 1.2}, {-0.1, 0.1}, {-0.1, 0.1}, {0.5, 1.5}};
        for (float& v : w.values) v = static_cast<float>(uniform(rng, ranges[t][0], ranges[t][1]));
      } else if (t == 0) {
        const auto& s = w.shape;
        const double fan_in = spec.kind == LayerKind::Dense ? s[0]
                              : spec.kind == LayerKind::DepthwiseConv2D
                                  ? double(s[0]) * s[1]
                                  : double(s[0]) * s[1] * s[2];
        const double limit = std::sqrt(6.0 / fan_in);
        for (float& v : w.values) v = static_cast<float>(uniform(rng, -limit, limit));
      } else {
        for (float& v : w.values) v = static_cast<float>(uniform(rng, -0.05, 0.05));
      }
      tensors.push_back(std::move(w));
    }
  }
}

DepthReport depth_report(const NetGraph& g) {
  const auto& layers = g.layers();
  DepthReport r;

  std::vector<int> consumers(layers.size(), 0);
  for (const auto& l : layers) {
    for (const auto& in : l.inputs) consumers[g.index_of(in)] += 1;
  }

  std::vector<int> path(layers.size(), 0);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const bool conv = l.kind == LayerKind::Conv2D || l.kind == LayerKind::DepthwiseConv2D;
    const bool weighted_op = conv || l.kind == LayerKind::Dense;

    int longest = 0;
    for (const auto& in : l.inputs) longest = std::max(longest, path[g.index_of(in)]);
    path[i] = longest + (weighted_op ? 1 : 0);

    if (has_weights(l.kind)) r.weighted_layer_count += 1;
    if (conv) r.conv_layer_count += 1;
    // Stem convs and projection shortcuts (ResNet "_0_conv") are outside the
    // residual branches.
    if (conv && l.id.find("_block") != std::string::npos && !l.id.ends_with("_0_conv")) {
      r.residual_branch_convs += 1;
    }

    // An activation directly fed by a conv/dense it alone consumes is an
    // argument of that layer in the layer-list convention, not a layer.
    bool folded = false;
    if (l.kind == LayerKind::Relu || l.kind == LayerKind::Relu6 || l.kind == LayerKind::Softmax) {
      std::size_t src = g.index_of(l.inputs[0]);
      const LayerKind sk = layers[src].kind;
      folded = (sk == LayerKind::Conv2D || sk == LayerKind::Dense) && consumers[src] == 1;
    }
    if (!folded) r.layer_list_count += 1;
    // Explicit padding is its own zero-padding layer in that convention.
    if (l.padding == Padding::Explicit &&
        (l.kind == LayerKind::Conv2D || l.kind == LayerKind::DepthwiseConv2D ||
         l.kind == LayerKind::MaxPool2D || l.kind == LayerKind::AvgPool2D)) {
      r.layer_list_count += 1;
    }
  }
  r.weighted_path_depth = layers.empty() ? 0 : path.back();
  return r;
}

}  // namespace birdsong
