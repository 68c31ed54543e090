#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace birdsong {

enum class LayerKind {
  Input,
  Conv2D,
  DepthwiseConv2D,
  Dense,
  BatchNorm,
  Relu,
  Relu6,
  MaxPool2D,
  AvgPool2D,
  GlobalAvgPool,
  Add,
  Dropout,
  Softmax,
  Flatten,
};

std::string_view to_string(LayerKind kind);
std::optional<LayerKind> layer_kind_from_string(std::string_view name);

/// `Same` follows the TensorFlow rule (total padding split floor/ceil between
/// leading and trailing edges, padded cells ignored by pooling). `Explicit`
/// zero-pads by `pads` = {top, bottom, left, right} and then behaves as
/// `Valid`; padded zeros take part in pooling.
enum class Padding { Same, Valid, Explicit };

std::string_view to_string(Padding padding);

struct Shape {
  int height = 0;
  int width = 0;
  int channels = 0;

  std::int64_t elements() const { return std::int64_t{height} * width * channels; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Spatial geometry of a sliding window (conv or pool) over one input.
struct WindowGeometry {
  int out_height = 0;
  int out_width = 0;
  int pad_top = 0;
  int pad_left = 0;
};

struct LayerSpec {
  std::string id;
  LayerKind kind = LayerKind::Input;
  std::vector<std::string> inputs;

  // Spatial attributes: conv, depthwise and pooling layers.
  int kernel_h = 0;
  int kernel_w = 0;
  int stride_h = 1;
  int stride_w = 1;
  Padding padding = Padding::Valid;
  std::array<int, 4> pads{};  // top, bottom, left, right; Explicit only

  int filters = 0;      // conv2d output channels
  int units = 0;        // dense outputs
  bool use_bias = true;  // conv2d, depthwise, dense
  double epsilon = 1e-3;  // batchnorm
  double rate = 0.0;      // dropout
  Shape input_shape;      // input layer only

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Output geometry of a windowed layer. Throws ShapeMismatch if the window
/// does not fit.
WindowGeometry window_geometry(const LayerSpec& spec, const Shape& in);

struct WeightTensor {
  std::vector<int> shape;
  std::vector<float> values;

  std::int64_t elements() const;
  friend bool operator==(const WeightTensor&, const WeightTensor&) = default;
};

struct ParamCount {
  std::int64_t trainable = 0;
  std::int64_t non_trainable = 0;  // batchnorm moving mean and variance
  std::int64_t total() const { return trainable + non_trainable; }
};

/// Layer graph in topological order with a single input and a softmax output.
/// Weight tensor order per layer: conv2d {kernel kh*kw*cin*cout, bias cout};
/// depthwise {kernel kh*kw*cin, bias cin}; dense {kernel in*out, bias out};
/// batchnorm {gamma, beta, moving_mean, moving_variance}. Bias is omitted when
/// use_bias is false.
class NetGraph {
 public:
  NetGraph() = default;

  /// Appends a layer; its inputs must already exist. Returns the layer id.
  const std::string& add(LayerSpec spec);

  const std::vector<LayerSpec>& layers() const { return layers_; }
  const LayerSpec& layer(std::string_view id) const;
  std::size_t index_of(std::string_view id) const;
  bool contains(std::string_view id) const;

  std::vector<WeightTensor>& weights(std::size_t layer_index) { return weights_[layer_index]; }
  const std::vector<WeightTensor>& weights(std::size_t layer_index) const {
    return weights_[layer_index];
  }

  Shape input_shape() const;
  int n_classes() const;

  /// Per-layer output shapes; throws ShapeMismatch naming the failing layer.
  std::vector<Shape> infer_shapes() const;
  /// Expected weight tensor shapes for every layer, in weight order.
  std::vector<std::vector<std::vector<int>>> expected_weight_shapes() const;

  /// Structural checks: single input first, softmax last, every other layer
  /// consumed, arity rules. Throws InvalidGraph or ShapeMismatch.
  void validate() const;
  /// validate() plus every weighted layer carrying correctly shaped tensors.
  void validate_weights() const;
  bool is_weighted() const;

  // Free-form descriptor metadata (architecture name, head kind, head width).
  std::map<std::string, std::string> metadata;

  friend bool operator==(const NetGraph&, const NetGraph&) = default;

 private:
  std::vector<LayerSpec> layers_;
  std::vector<std::vector<WeightTensor>> weights_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

bool has_weights(LayerKind kind);

ParamCount count_params(const NetGraph& g);
/// 32-bit weights: count_params(g).total() * 4.
std::int64_t footprint_bytes(const NetGraph& g);
/// Bytes in mebibytes rounded to the nearest integer.
std::int64_t mebibytes_rounded(std::int64_t bytes);

/// Largest total size of simultaneously live activations over a forward pass
/// that frees each tensor after its last consumer, in bytes (32-bit values).
std::int64_t peak_activation_bytes(const NetGraph& g);

enum class Architecture { Vgg16, ResNet50, MobileNetV2 };
enum class HeadKind { ImagenetReference, Custom };

std::string_view to_string(Architecture arch);
std::string_view to_string(HeadKind head);
/// Throws UnknownArch.
Architecture parse_architecture(std::string_view name);
HeadKind parse_head(std::string_view name);

inline constexpr int kCustomHeadWidth = 256;
inline constexpr double kHeadDropout = 0.5;

struct CatalogOptions {
  int n_classes = 1000;
  HeadKind head = HeadKind::Custom;
  int head_hidden = kCustomHeadWidth;
  Shape input_shape{224, 224, 3};
};

/// Unweighted graph for one of the catalog architectures.
NetGraph build_catalog(Architecture arch, const CatalogOptions& options);
NetGraph build_catalog(Architecture arch, int n_classes, HeadKind head);

/// Fills every weighted layer with seeded pseudo-random values: He-uniform
/// kernels, small biases, batchnorm statistics near identity.
void randomize_weights(NetGraph& g, std::uint64_t seed);

/// Counting conventions for "network depth"; none is canonical.
struct DepthReport {
  int layer_list_count = 0;     // activations folded into a directly preceding conv/dense
  int weighted_layer_count = 0;  // conv, depthwise, dense and batchnorm layers
  int weighted_path_depth = 0;   // conv/depthwise/dense on the longest input->output path
  int conv_layer_count = 0;      // conv2d + depthwise layers
  int residual_branch_convs = 0;  // convs inside residual blocks, excluding projection shortcuts
};

DepthReport depth_report(const NetGraph& g);

// Model file: "WMWB", u32 LE version, u64 LE descriptor length, UTF-8 JSON
// descriptor, then weight blobs as LE f32 in descriptor order, unpadded.
inline constexpr std::uint32_t kModelFormatVersion = 1;

std::string model_descriptor_json(const NetGraph& g);
std::vector<std::uint8_t> encode_model(const NetGraph& g);
NetGraph decode_model(std::span<const std::uint8_t> bytes);
void save_model(const NetGraph& g, const std::filesystem::path& path);
NetGraph load_model(const std::filesystem::path& path);

}  // namespace birdsong
