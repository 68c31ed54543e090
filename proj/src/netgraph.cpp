#include "birdsong/netgraph.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>

#include <json.hpp>

#include "birdsong/error.hpp"
#include "byte_io.hpp"

namespace birdsong {

using nlohmann::json;

namespace {

constexpr std::pair<LayerKind, std::string_view> kKindNames[] = {
    {LayerKind::Input, "input"},
    {LayerKind::Conv2D, "conv2d"},
    {LayerKind::DepthwiseConv2D, "depthwise_conv2d"},
    {LayerKind::Dense, "dense"},
    {LayerKind::BatchNorm, "batchnorm"},
    {LayerKind::Relu, "relu"},
    {LayerKind::Relu6, "relu6"},
    {LayerKind::MaxPool2D, "maxpool2d"},
    {LayerKind::AvgPool2D, "avgpool2d"},
    {LayerKind::GlobalAvgPool, "global_avgpool"},
    {LayerKind::Add, "add"},
    {LayerKind::Dropout, "dropout"},
    {LayerKind::Softmax, "softmax"},
    {LayerKind::Flatten, "flatten"},
};

bool is_windowed(LayerKind k) {
  return k == LayerKind::Conv2D || k == LayerKind::DepthwiseConv2D || k == LayerKind::MaxPool2D ||
         k == LayerKind::AvgPool2D;
}

std::size_t expected_arity(LayerKind k) {
  if (k == LayerKind::Input) return 0;
  if (k == LayerKind::Add) return 2;
  return 1;
}

[[noreturn]] void shape_error(const LayerSpec& spec, const std::string& what) {
  throw Error(ErrorCode::ShapeMismatch, "layer '" + spec.id + "': " + what);
}

std::string shape_str(const Shape& s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width) + "x" + std::to_string(s.channels);
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::optional<LayerKind> layer_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

std::string_view to_string(Padding padding) {
  switch (padding) {
    case Padding::Same: return "same";
    case Padding::Valid: return "valid";
    case Padding::Explicit: return "explicit";
  }
  return "unknown";
}

bool has_weights(LayerKind kind) {
  return kind == LayerKind::Conv2D || kind == LayerKind::DepthwiseConv2D ||
         kind == LayerKind::Dense || kind == LayerKind::BatchNorm;
}

WindowGeometry window_geometry(const LayerSpec& spec, const Shape& in) {
  const int kh = spec.kernel_h, kw = spec.kernel_w;
  const int sh = spec.stride_h, sw = spec.stride_w;
  if (kh < 1 || kw < 1 || sh < 1 || sw < 1) shape_error(spec, "kernel and stride must be >= 1");

  WindowGeometry g;
  switch (spec.padding) {
    case Padding::Same: {
      g.out_height = (in.height + sh - 1) / sh;
      g.out_width = (in.width + sw - 1) / sw;
      g.pad_top = std::max((g.out_height - 1) * sh + kh - in.height, 0) / 2;
      g.pad_left = std::max((g.out_width - 1) * sw + kw - in.width, 0) / 2;
      break;
    }
    case Padding::Valid:
    case Padding::Explicit: {
      const bool expl = spec.padding == Padding::Explicit;
      const int ph = in.height + (expl ? spec.pads[0] + spec.pads[1] : 0);
      const int pw = in.width + (expl ? spec.pads[2] + spec.pads[3] : 0);
      if (ph < kh || pw < kw) {
        shape_error(spec, "window " + std::to_string(kh) + "x" + std::to_string(kw) +
                              " larger than input " + shape_str(in));
      }
      g.out_height = (ph - kh) / sh + 1;
      g.out_width = (pw - kw) / sw + 1;
      g.pad_top = expl ? spec.pads[0] : 0;
      g.pad_left = expl ? spec.pads[2] : 0;
      break;
    }
  }
  return g;
}

std::int64_t WeightTensor::elements() const {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1},
                         [](std::int64_t a, int b) { return a * b; });
}

const std::string& NetGraph::add(LayerSpec spec) {
  if (spec.id.empty()) throw Error(ErrorCode::InvalidGraph, "layer id must be non-empty");
  if (index_.contains(spec.id)) throw Error(ErrorCode::InvalidGraph, "duplicate layer id " + spec.id);
  if (spec.inputs.size() != expected_arity(spec.kind)) {
    throw Error(ErrorCode::InvalidGraph, "layer '" + spec.id + "' (" + std::string(to_string(spec.kind)) +
                                             ") takes " + std::to_string(expected_arity(spec.kind)) +
                                             " input(s)");
  }
  for (const auto& in : spec.inputs) {
    if (!index_.contains(in)) {
      throw Error(ErrorCode::InvalidGraph, "layer '" + spec.id + "' consumes unknown layer '" + in + "'");
    }
  }
  index_.emplace(spec.id, layers_.size());
  layers_.push_back(std::move(spec));
  weights_.emplace_back();
  return layers_.back().id;
}

std::size_t NetGraph::index_of(std::string_view id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(ErrorCode::InvalidGraph, "no layer '" + std::string(id) + "'");
  return it->second;
}

bool NetGraph::contains(std::string_view id) const { return index_.find(id) != index_.end(); }

const LayerSpec& NetGraph::layer(std::string_view id) const { return layers_[index_of(id)]; }

Shape NetGraph::input_shape() const {
  if (layers_.empty() || layers_.front().kind != LayerKind::Input) {
    throw Error(ErrorCode::InvalidGraph, "graph has no input layer");
  }
  return layers_.front().input_shape;
}

int NetGraph::n_classes() const {
  auto shapes = infer_shapes();
  return shapes.empty() ? 0 : shapes.back().channels;
}

std::vector<Shape> NetGraph::infer_shapes() const {
  std::vector<Shape> out(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& spec = layers_[i];
    if (spec.kind == LayerKind::Input) {
      if (spec.input_shape.elements() <= 0) shape_error(spec, "input shape must be positive");
      out[i] = spec.input_shape;
      continue;
    }
    const Shape in = out[index_.find(spec.inputs[0])->second];
    switch (spec.kind) {
      case LayerKind::Conv2D: {
        if (spec.filters < 1) shape_error(spec, "filters must be >= 1");
        auto g = window_geometry(spec, in);
        out[i] = {g.out_height, g.out_width, spec.filters};
        break;
      }
      case LayerKind::DepthwiseConv2D:
      case LayerKind::MaxPool2D:
      case LayerKind::AvgPool2D: {
        auto g = window_geometry(spec, in);
        out[i] = {g.out_height, g.out_width, in.channels};
        break;
      }
      case LayerKind::Dense:
        if (in.height != 1 || in.width != 1) {
          shape_error(spec, "dense needs a flat 1x1xN input, got " + shape_str(in));
        }
        if (spec.units < 1) shape_error(spec, "units must be >= 1");
        out[i] = {1, 1, spec.units};
        break;
      case LayerKind::GlobalAvgPool:
        out[i] = {1, 1, in.channels};
        break;
      case LayerKind::Flatten:
        out[i] = {1, 1, static_cast<int>(in.elements())};
        break;
      case LayerKind::Softmax:
        if (in.height != 1 || in.width != 1) shape_error(spec, "softmax needs a 1x1xN input");
        out[i] = in;
        break;
      case LayerKind::Add: {
        const Shape other = out[index_.find(spec.inputs[1])->second];
        if (!(in == other)) shape_error(spec, "add operands " + shape_str(in) + " vs " + shape_str(other));
        out[i] = in;
        break;
      }
      case LayerKind::BatchNorm:
      case LayerKind::Relu:
      case LayerKind::Relu6:
      case LayerKind::Dropout:
        out[i] = in;
        break;
      case LayerKind::Input:
        break;
    }
  }
  return out;
}

std::vector<std::vector<std::vector<int>>> NetGraph::expected_weight_shapes() const {
  auto shapes = infer_shapes();
  std::vector<std::vector<std::vector<int>>> out(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& spec = layers_[i];
    if (!has_weights(spec.kind)) continue;
    const int cin = shapes[index_.find(spec.inputs[0])->second].channels;
    auto& w = out[i];
    switch (spec.kind) {
      case LayerKind::Conv2D:
        w.push_back({spec.kernel_h, spec.kernel_w, cin, spec.filters});
        if (spec.use_bias) w.push_back({spec.filters});
        break;
      case LayerKind::DepthwiseConv2D:
        w.push_back({spec.kernel_h, spec.kernel_w, cin});
        if (spec.use_bias) w.push_back({cin});
        break;
      case LayerKind::Dense:
        w.push_back({cin, spec.units});
        if (spec.use_bias) w.push_back({spec.units});
        break;
      case LayerKind::BatchNorm:
        w.assign(4, {cin});
        break;
      default:
        break;
    }
  }
  return out;
}

void NetGraph::validate() const {
  if (layers_.empty() || layers_.front().kind != LayerKind::Input) {
    throw Error(ErrorCode::InvalidGraph, "first layer must be the single input");
  }
  if (layers_.back().kind != LayerKind::Softmax) {
    throw Error(ErrorCode::InvalidGraph, "last layer must be softmax");
  }
  std::vector<int> consumers(layers_.size(), 0);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& spec = layers_[i];
    if (i > 0 && spec.kind == LayerKind::Input) {
      throw Error(ErrorCode::InvalidGraph, "more than one input layer ('" + spec.id + "')");
    }
    if (spec.kind == LayerKind::Dropout && !(spec.rate >= 0.0 && spec.rate < 1.0)) {
      throw Error(ErrorCode::InvalidGraph, "layer '" + spec.id + "': dropout rate outside [0,1)");
    }
    if (spec.kind == LayerKind::BatchNorm && !(spec.epsilon >= 0.0)) {
      throw Error(ErrorCode::InvalidGraph, "layer '" + spec.id + "': negative epsilon");
    }
    if (is_windowed(spec.kind) && spec.padding == Padding::Explicit &&
        std::any_of(spec.pads.begin(), spec.pads.end(), [](int p) { return p < 0; })) {
      throw Error(ErrorCode::InvalidGraph, "layer '" + spec.id + "': negative padding");
    }
    for (const auto& in : spec.inputs) consumers[index_.find(in)->second] += 1;
  }
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
    if (consumers[i] == 0) {
      throw Error(ErrorCode::InvalidGraph, "layer '" + layers_[i].id + "' is a dangling output");
    }
  }
  infer_shapes();
}

void NetGraph::validate_weights() const {
  validate();
  auto expected = expected_weight_shapes();
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& have = weights_[i];
    const auto& want = expected[i];
    if (have.size() != want.size()) {
      throw Error(ErrorCode::ShapeMismatch, "layer '" + layers_[i].id + "' has " +
                                                std::to_string(have.size()) + " weight tensors, expected " +
                                                std::to_string(want.size()));
    }
    for (std::size_t t = 0; t < want.size(); ++t) {
      if (have[t].shape != want[t] ||
          static_cast<std::int64_t>(have[t].values.size()) != have[t].elements()) {
        throw Error(ErrorCode::ShapeMismatch,
                    "layer '" + layers_[i].id + "' weight " + std::to_string(t) + " has wrong shape");
      }
    }
  }
}

bool NetGraph::is_weighted() const {
  try {
    validate_weights();
    return true;
  } catch (const Error&) {
    return false;
  }
}

ParamCount count_params(const NetGraph& g) {
  auto expected = g.expected_weight_shapes();
  ParamCount count;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const bool bn = g.layers()[i].kind == LayerKind::BatchNorm;
    for (std::size_t t = 0; t < expected[i].size(); ++t) {
      std::int64_t n = std::accumulate(expected[i][t].begin(), expected[i][t].end(), std::int64_t{1},
                                       [](std::int64_t a, int b) { return a * b; });
      // batchnorm: gamma, beta train; moving mean/variance do not.
      (bn && t >= 2 ? count.non_trainable : count.trainable) += n;
    }
  }
  return count;
}

std::int64_t footprint_bytes(const NetGraph& g) { return count_params(g).total() * 4; }

std::int64_t mebibytes_rounded(std::int64_t bytes) {
  return static_cast<std::int64_t>(std::llround(static_cast<double>(bytes) / (1024.0 * 1024.0)));
}

std::int64_t peak_activation_bytes(const NetGraph& g) {
  const auto shapes = g.infer_shapes();
  const auto& layers = g.layers();
  std::vector<std::size_t> last_use(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    last_use[i] = i;
    for (const auto& in : layers[i].inputs) last_use[g.index_of(in)] = i;
  }
  std::int64_t live = 0, peak = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    live += shapes[i].elements() * 4;
    peak = std::max(peak, live);
    for (std::size_t j = 0; j <= i; ++j) {
      if (last_use[j] == i && j != layers.size() - 1) live -= shapes[j].elements() * 4;
    }
  }
  return peak;
}

// ---------------------------------------------------------------------------
// Model file

namespace {

json attrs_to_json(const LayerSpec& s) {
  json a = json::object();
  auto spatial = [&](const char* kernel_key) {
    a[kernel_key] = {s.kernel_h, s.kernel_w};
    a["strides"] = {s.stride_h, s.stride_w};
    a["padding"] = std::string(to_string(s.padding));
    if (s.padding == Padding::Explicit) a["pads"] = s.pads;
  };
  switch (s.kind) {
    case LayerKind::Input:
      a["shape"] = {s.input_shape.height, s.input_shape.width, s.input_shape.channels};
      break;
    case LayerKind::Conv2D:
      spatial("kernel");
      a["filters"] = s.filters;
      a["use_bias"] = s.use_bias;
      break;
    case LayerKind::DepthwiseConv2D:
      spatial("kernel");
      a["use_bias"] = s.use_bias;
      break;
    case LayerKind::Dense:
      a["units"] = s.units;
      a["use_bias"] = s.use_bias;
      break;
    case LayerKind::BatchNorm:
      a["epsilon"] = s.epsilon;
      break;
    case LayerKind::MaxPool2D:
    case LayerKind::AvgPool2D:
      spatial("pool");
      break;
    case LayerKind::Dropout:
      a["rate"] = s.rate;
      break;
    default:
      break;
  }
  return a;
}

Padding padding_from_string(const std::string& s) {
  if (s == "same") return Padding::Same;
  if (s == "valid") return Padding::Valid;
  if (s == "explicit") return Padding::Explicit;
  throw Error(ErrorCode::InvalidGraph, "unknown padding mode '" + s + "'");
}

LayerSpec spec_from_json(const json& j) {
  LayerSpec s;
  s.id = j.at("id").get<std::string>();
  auto kind = layer_kind_from_string(j.at("kind").get<std::string>());
  if (!kind) throw Error(ErrorCode::InvalidGraph, "unknown layer kind in '" + s.id + "'");
  s.kind = *kind;
  s.inputs = j.at("inputs").get<std::vector<std::string>>();
  const json& a = j.at("attrs");
  auto spatial = [&](const char* kernel_key) {
    auto k = a.at(kernel_key).get<std::array<int, 2>>();
    auto st = a.at("strides").get<std::array<int, 2>>();
    s.kernel_h = k[0];
    s.kernel_w = k[1];
    s.stride_h = st[0];
    s.stride_w = st[1];
    s.padding = padding_from_string(a.at("padding").get<std::string>());
    if (s.padding == Padding::Explicit) s.pads = a.at("pads").get<std::array<int, 4>>();
  };
  switch (s.kind) {
    case LayerKind::Input: {
      auto sh = a.at("shape").get<std::array<int, 3>>();
      s.input_shape = {sh[0], sh[1], sh[2]};
      break;
    }
    case LayerKind::Conv2D:
      spatial("kernel");
      s.filters = a.at("filters").get<int>();
      s.use_bias = a.at("use_bias").get<bool>();
      break;
    case LayerKind::DepthwiseConv2D:
      spatial("kernel");
      s.use_bias = a.at("use_bias").get<bool>();
      break;
    case LayerKind::Dense:
      s.units = a.at("units").get<int>();
      s.use_bias = a.at("use_bias").get<bool>();
      break;
    case LayerKind::BatchNorm:
      s.epsilon = a.at("epsilon").get<double>();
      break;
    case LayerKind::MaxPool2D:
    case LayerKind::AvgPool2D:
      spatial("pool");
      break;
    case LayerKind::Dropout:
      s.rate = a.at("rate").get<double>();
      break;
    default:
      break;
  }
  return s;
}

}  // namespace

std::string model_descriptor_json(const NetGraph& g) {
  json d;
  d["format"] = "WMWB";
  d["version"] = kModelFormatVersion;
  d["metadata"] = g.metadata;
  const Shape in = g.input_shape();
  d["input_shape"] = {in.height, in.width, in.channels};
  d["n_classes"] = g.n_classes();
  json layers = json::array();
  for (std::size_t i = 0; i < g.layers().size(); ++i) {
    const LayerSpec& s = g.layers()[i];
    json l;
    l["id"] = s.id;
    l["kind"] = std::string(to_string(s.kind));
    l["inputs"] = s.inputs;
    l["attrs"] = attrs_to_json(s);
    json shapes = json::array();
    for (const auto& w : g.weights(i)) shapes.push_back(w.shape);
    l["weights"] = shapes;
    layers.push_back(std::move(l));
  }
  d["layers"] = std::move(layers);
  return d.dump();
}

std::vector<std::uint8_t> encode_model(const NetGraph& g) {
  g.validate_weights();
  const std::string descriptor = model_descriptor_json(g);
  std::vector<std::uint8_t> out{'W', 'M', 'W', 'B'};
  detail::append_le<std::uint32_t>(out, kModelFormatVersion);
  detail::append_le<std::uint64_t>(out, descriptor.size());
  out.insert(out.end(), descriptor.begin(), descriptor.end());
  std::int64_t total = 0;
  for (std::size_t i = 0; i < g.layers().size(); ++i) {
    for (const auto& w : g.weights(i)) total += w.elements();
  }
  out.reserve(out.size() + static_cast<std::size_t>(total) * 4);
  for (std::size_t i = 0; i < g.layers().size(); ++i) {
    for (const auto& w : g.weights(i)) {
      for (float v : w.values) detail::append_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
    }
  }
  return out;
}

NetGraph decode_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "WMWB", 4) != 0) {
    throw Error(ErrorCode::BadMagic, "model file: bad magic");
  }
  if (bytes.size() < 16) throw Error(ErrorCode::TruncatedFile, "model file: header truncated");
  const auto version = detail::load_le<std::uint32_t>(bytes.data() + 4);
  if (version != kModelFormatVersion) {
    throw Error(ErrorCode::VersionUnsupported, "model file: version " + std::to_string(version));
  }
  const auto desc_len = detail::load_le<std::uint64_t>(bytes.data() + 8);
  if (desc_len > bytes.size() - 16) {
    throw Error(ErrorCode::TruncatedFile, "model file: descriptor extends past end of file");
  }

  json d;
  try {
    d = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(desc_len));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidGraph, std::string("model file: descriptor is not valid JSON: ") + e.what());
  }

  NetGraph g;
  std::vector<std::vector<std::vector<int>>> declared;
  try {
    if (d.contains("metadata")) g.metadata = d.at("metadata").get<std::map<std::string, std::string>>();
    for (const auto& l : d.at("layers")) {
      g.add(spec_from_json(l));
      declared.push_back(l.at("weights").get<std::vector<std::vector<int>>>());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidGraph, std::string("model file: bad descriptor: ") + e.what());
  }
  g.validate();

  auto expected = g.expected_weight_shapes();
  std::uint64_t declared_floats = 0;
  for (std::size_t i = 0; i < declared.size(); ++i) {
    if (declared[i] != expected[i]) {
      throw Error(ErrorCode::ShapeMismatch,
                  "model file: blob shapes for layer '" + g.layers()[i].id + "' disagree with its spec");
    }
    for (const auto& shape : declared[i]) {
      std::uint64_t n = 1;
      for (int dim : shape) n *= static_cast<std::uint64_t>(dim);
      declared_floats += n;
    }
  }
  const std::uint64_t payload = bytes.size() - 16 - desc_len;
  if (payload != declared_floats * 4) {
    throw Error(ErrorCode::ShapeMismatch, "model file: descriptor declares " +
                                              std::to_string(declared_floats) + " floats, payload holds " +
                                              std::to_string(payload / 4));
  }

  const std::uint8_t* p = bytes.data() + 16 + desc_len;
  for (std::size_t i = 0; i < declared.size(); ++i) {
    for (const auto& shape : declared[i]) {
      WeightTensor t;
      t.shape = shape;
      t.values.resize(static_cast<std::size_t>(t.elements()));
      for (float& v : t.values) {
        v = std::bit_cast<float>(detail::load_le<std::uint32_t>(p));
        p += 4;
      }
      g.weights(i).push_back(std::move(t));
    }
  }
  return g;
}

void save_model(const NetGraph& g, const std::filesystem::path& path) {
  detail::write_file_bytes(path, encode_model(g));
}

NetGraph load_model(const std::filesystem::path& path) {
  return decode_model(detail::read_file_bytes(path));
}

}  // namespace birdsong
