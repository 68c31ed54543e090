#include <algorithm>
#include <cstring>
#include <map>
#include <set>

#include "birdsong/error.hpp"
#include "birdsong/netgraph.hpp"
#include "test_helpers.hpp"

using namespace birdsong;

namespace {

LayerSpec input(Shape s) {
  LayerSpec l;
  l.id = "input";
  l.kind = LayerKind::Input;
  l.input_shape = s;
  return l;
}

LayerSpec unary(const std::string& id, LayerKind kind, const std::string& in) {
  LayerSpec l;
  l.id = id;
  l.kind = kind;
  l.inputs = {in};
  return l;
}

// input 5x5x3 -> conv 3x3 (filters) valid -> global average -> softmax
NetGraph toy_conv_net(int filters, bool bias) {
  NetGraph g;
  g.add(input({5, 5, 3}));
  LayerSpec c = unary("conv", LayerKind::Conv2D, "input");
  c.kernel_h = c.kernel_w = 3;
  c.filters = filters;
  c.use_bias = bias;
  g.add(c);
  g.add(unary("gap", LayerKind::GlobalAvgPool, "conv"));
  g.add(unary("softmax", LayerKind::Softmax, "gap"));
  return g;
}

// Random topological order of g's layers, keeping the input first.
NetGraph reserialize(const NetGraph& g, std::mt19937_64& rng) {
  const auto& layers = g.layers();
  std::set<std::string> placed;
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < layers.size(); ++i) pending.push_back(i);
  NetGraph out;
  out.metadata = g.metadata;
  while (!pending.empty()) {
    std::vector<std::size_t> ready;
    for (std::size_t p = 0; p < pending.size(); ++p) {
      const auto& spec = layers[pending[p]];
      if (std::all_of(spec.inputs.begin(), spec.inputs.end(), [&](const auto& in) { return placed.contains(in); }))
        ready.push_back(p);
    }
    const std::size_t pick = ready[rng() % ready.size()];
    const std::size_t li = pending[pick];
    out.add(layers[li]);
    out.weights(out.layers().size() - 1) = g.weights(li);
    placed.insert(layers[li].id);
    pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return out;
}

std::vector<std::uint8_t> with_u32(std::vector<std::uint8_t> b, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
  return b;
}

}  // namespace

TEST_CASE("reference parameter counts match the reference values exactly") {
  struct Golden {
    Architecture arch;
    std::int64_t params;
    std::int64_t mib;
  };
  const Golden goldens[] = {{Architecture::Vgg16, 138357544, 528},
                            {Architecture::ResNet50, 25636712, 98},
                            {Architecture::MobileNetV2, 3538984, 14}};
  for (const auto& gold : goldens) {
    CAPTURE(to_string(gold.arch));
    NetGraph g = build_catalog(gold.arch, 1000, HeadKind::ImagenetReference);
    CHECK(count_params(g).total() == gold.params);
    CHECK(footprint_bytes(g) == gold.params * 4);
    CHECK(mebibytes_rounded(footprint_bytes(g)) == gold.mib);
    CHECK(g.n_classes() == 1000);
  }
  CHECK(footprint_bytes(build_catalog(Architecture::Vgg16, 1000, HeadKind::ImagenetReference)) == 553430176);
}

TEST_CASE("batchnorm statistics are counted as non-trainable") {
  NetGraph r = build_catalog(Architecture::ResNet50, 1000, HeadKind::ImagenetReference);
  ParamCount p = count_params(r);
  CHECK(p.trainable == 25583592);
  CHECK(p.non_trainable == 53120);
  NetGraph v = build_catalog(Architecture::Vgg16, 1000, HeadKind::ImagenetReference);
  CHECK(count_params(v).non_trainable == 0);
}

TEST_CASE("catalog topology facts") {
  NetGraph vgg = build_catalog(Architecture::Vgg16, 1000, HeadKind::ImagenetReference);
  int convs = 0;
  for (const auto& l : vgg.layers()) {
    if (l.kind == LayerKind::Conv2D) {
      ++convs;
      CHECK(l.kernel_h == 3);
      CHECK(l.kernel_w == 3);
    }
  }
  CHECK(convs == 13);

  NetGraph resnet = build_catalog(Architecture::ResNet50, 1000, HeadKind::ImagenetReference);
  DepthReport rd = depth_report(resnet);
  CHECK(rd.residual_branch_convs == 48);
  CHECK(rd.conv_layer_count == 53);

  NetGraph mob = build_catalog(Architecture::MobileNetV2, 20, HeadKind::Custom);
  CHECK(mob.n_classes() == 20);
  CHECK(mob.infer_shapes().back() == Shape{1, 1, 20});
  int depthwise = 0;
  for (const auto& l : mob.layers()) depthwise += l.kind == LayerKind::DepthwiseConv2D;
  CHECK(depthwise == 17);
}

TEST_CASE("custom heads: dense(256) -> relu -> dropout(0.5) -> dense(n) -> softmax") {
  const std::pair<Architecture, std::int64_t> expected[] = {
      {Architecture::Vgg16, 21142612}, {Architecture::ResNet50, 24117396}, {Architecture::MobileNetV2, 2591060}};
  for (auto [arch, params] : expected) {
    NetGraph g = build_catalog(arch, 20, HeadKind::Custom);
    CHECK(count_params(g).total() == params);
    const auto& L = g.layers();
    REQUIRE(L.size() > 6);
    CHECK(L[L.size() - 1].kind == LayerKind::Softmax);
    CHECK(L[L.size() - 2].units == 20);
    CHECK(L[L.size() - 3].kind == LayerKind::Dropout);
    CHECK(L[L.size() - 3].rate == 0.5);
    CHECK(L[L.size() - 4].kind == LayerKind::Relu);
    CHECK(L[L.size() - 5].units == kCustomHeadWidth);
    CHECK(L[L.size() - 6].kind == (arch == Architecture::Vgg16 ? LayerKind::Flatten : LayerKind::GlobalAvgPool));
  }
  CatalogOptions wide{.n_classes = 5, .head = HeadKind::Custom, .head_hidden = 64};
  NetGraph g = build_catalog(Architecture::MobileNetV2, wide);
  CHECK(g.layers()[g.layers().size() - 5].units == 64);
}

TEST_CASE("depth report under each counting convention") {
  struct Row {
    Architecture arch;
    int layer_list, weighted_layers, path, convs;
  };
  const Row rows[] = {{Architecture::Vgg16, 23, 16, 16, 13},
                      {Architecture::ResNet50, 177, 107, 50, 53},
                      {Architecture::MobileNetV2, 152, 105, 53, 52}};
  for (const auto& r : rows) {
    CAPTURE(to_string(r.arch));
    DepthReport d = depth_report(build_catalog(r.arch, 1000, HeadKind::ImagenetReference));
    CHECK(d.layer_list_count == r.layer_list);
    CHECK(d.weighted_layer_count == r.weighted_layers);
    CHECK(d.weighted_path_depth == r.path);
    CHECK(d.conv_layer_count == r.convs);
  }
  // Reference depths: VGG16 23 and ResNet50 50 are reproduced by a convention;
  // MobileNetV2's 88 is not reproduced by any of them.
  auto reproduces = [](const DepthReport& d, int target) {
    return d.layer_list_count == target || d.weighted_layer_count == target || d.weighted_path_depth == target ||
           d.conv_layer_count == target;
  };
  CHECK(reproduces(depth_report(build_catalog(Architecture::Vgg16, 1000, HeadKind::ImagenetReference)), 23));
  CHECK(reproduces(depth_report(build_catalog(Architecture::ResNet50, 1000, HeadKind::ImagenetReference)), 50));
  CHECK_FALSE(reproduces(depth_report(build_catalog(Architecture::MobileNetV2, 1000, HeadKind::ImagenetReference)), 88));
}

TEST_CASE("architecture and head names") {
  CHECK(parse_architecture("vgg16") == Architecture::Vgg16);
  CHECK(parse_architecture("resnet50") == Architecture::ResNet50);
  CHECK(parse_architecture("mobilenet_v2") == Architecture::MobileNetV2);
  CHECK_THROWS_CODE(parse_architecture("inception_v3"), ErrorCode::UnknownArch);
  CHECK(parse_head("custom") == HeadKind::Custom);
  CHECK(parse_head("imagenet_reference") == HeadKind::ImagenetReference);
  CHECK_THROWS_CODE(build_catalog(Architecture::Vgg16, 1, HeadKind::Custom), ErrorCode::BadConfig);
  for (auto k : {LayerKind::Conv2D, LayerKind::DepthwiseConv2D, LayerKind::GlobalAvgPool, LayerKind::Flatten})
    CHECK(layer_kind_from_string(to_string(k)) == k);
  CHECK_FALSE(layer_kind_from_string("lstm").has_value());
}

TEST_CASE("window geometry follows the same/valid output-size rules") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 2000; ++trial) {
    LayerSpec s;
    s.kind = LayerKind::Conv2D;
    s.kernel_h = 1 + static_cast<int>(rng() % 7);
    s.kernel_w = 1 + static_cast<int>(rng() % 7);
    s.stride_h = 1 + static_cast<int>(rng() % 3);
    s.stride_w = 1 + static_cast<int>(rng() % 3);
    Shape in{s.kernel_h + static_cast<int>(rng() % 40), s.kernel_w + static_cast<int>(rng() % 40), 3};
    s.padding = Padding::Same;
    auto same = window_geometry(s, in);
    REQUIRE(same.out_height == (in.height + s.stride_h - 1) / s.stride_h);
    REQUIRE(same.out_width == (in.width + s.stride_w - 1) / s.stride_w);
    // TF split: total = max((out-1)*stride + k - in, 0), leading half rounded down.
    const int total_h = std::max((same.out_height - 1) * s.stride_h + s.kernel_h - in.height, 0);
    REQUIRE(same.pad_top == total_h / 2);
    s.padding = Padding::Valid;
    auto valid = window_geometry(s, in);
    REQUIRE(valid.out_height == (in.height - s.kernel_h + s.stride_h) / s.stride_h);
    REQUIRE(valid.out_width == (in.width - s.kernel_w + s.stride_w) / s.stride_w);
    REQUIRE(valid.pad_top == 0);
  }
  LayerSpec big;
  big.kind = LayerKind::Conv2D;
  big.kernel_h = big.kernel_w = 9;
  CHECK_THROWS_CODE(window_geometry(big, {4, 4, 1}), ErrorCode::ShapeMismatch);
}

TEST_CASE("graph validation") {
  SUBCASE("unknown input") {
    NetGraph g;
    g.add(input({4, 4, 1}));
    CHECK_THROWS_CODE(g.add(unary("x", LayerKind::Relu, "nope")), ErrorCode::InvalidGraph);
  }
  SUBCASE("duplicate id") {
    NetGraph g;
    g.add(input({4, 4, 1}));
    CHECK_THROWS_CODE(g.add(input({4, 4, 1})), ErrorCode::InvalidGraph);
  }
  SUBCASE("add arity") {
    NetGraph g;
    g.add(input({4, 4, 1}));
    CHECK_THROWS_CODE(g.add(unary("sum", LayerKind::Add, "input")), ErrorCode::InvalidGraph);
  }
  SUBCASE("softmax must close the graph") {
    NetGraph g;
    g.add(input({4, 4, 1}));
    g.add(unary("flat", LayerKind::Flatten, "input"));
    CHECK_THROWS_CODE(g.validate(), ErrorCode::InvalidGraph);
  }
  SUBCASE("dangling branch") {
    NetGraph g;
    g.add(input({4, 4, 1}));
    g.add(unary("r", LayerKind::Relu, "input"));
    g.add(unary("flat", LayerKind::Flatten, "input"));
    g.add(unary("softmax", LayerKind::Softmax, "flat"));
    CHECK_THROWS_CODE(g.validate(), ErrorCode::InvalidGraph);
  }
  SUBCASE("add of mismatched shapes") {
    NetGraph g;
    g.add(input({4, 4, 2}));
    LayerSpec c = unary("c", LayerKind::Conv2D, "input");
    c.kernel_h = c.kernel_w = 1;
    c.filters = 3;
    g.add(c);
    LayerSpec a = unary("sum", LayerKind::Add, "input");
    a.inputs.push_back("c");
    g.add(a);
    g.add(unary("softmax", LayerKind::Softmax, "sum"));
    CHECK_THROWS_CODE(g.infer_shapes(), ErrorCode::ShapeMismatch);
  }
  SUBCASE("unweighted graph fails weight validation") {
    NetGraph g = toy_conv_net(4, true);
    CHECK_NOTHROW(g.validate());
    CHECK_FALSE(g.is_weighted());
    CHECK_THROWS_CODE(g.validate_weights(), ErrorCode::ShapeMismatch);
  }
}

TEST_CASE("count_params does not depend on the serialization order") {
  std::mt19937_64 rng(12);
  for (auto arch : {Architecture::ResNet50, Architecture::MobileNetV2}) {
    NetGraph g = build_catalog(arch, 20, HeadKind::Custom);
    const auto reference = count_params(g);
    for (int trial = 0; trial < 5; ++trial) {
      NetGraph h = reserialize(g, rng);
      CHECK(count_params(h).total() == reference.total());
      CHECK(count_params(h).non_trainable == reference.non_trainable);
      CHECK(h.infer_shapes().back() == g.infer_shapes().back());
    }
  }
}

TEST_CASE("peak activation memory is bounded below by input and output") {
  for (auto arch : {Architecture::Vgg16, Architecture::ResNet50, Architecture::MobileNetV2}) {
    NetGraph g = build_catalog(arch, 20, HeadKind::Custom);
    const auto shapes = g.infer_shapes();
    std::int64_t biggest = 0;
    for (const auto& s : shapes) biggest = std::max(biggest, s.elements() * 4);
    const std::int64_t peak = peak_activation_bytes(g);
    CHECK(peak >= 224 * 224 * 3 * 4);
    CHECK(peak >= biggest);
  }
}

TEST_CASE("model files round trip bit-exactly") {
  NetGraph toy = toy_conv_net(8, true);
  randomize_weights(toy, 1);
  CHECK(toy.is_weighted());
  CHECK(decode_model(encode_model(toy)) == toy);

  for (auto arch : {Architecture::MobileNetV2, Architecture::ResNet50}) {
    NetGraph g = build_catalog(arch, 20, HeadKind::Custom);
    g.metadata["note"] = "round trip";
    randomize_weights(g, 99);
    auto bytes = encode_model(g);
    CHECK(bytes.size() > static_cast<std::size_t>(footprint_bytes(g)));
    NetGraph back = decode_model(bytes);
    CHECK(back == g);
    CHECK(encode_model(back) == bytes);
  }

  testing::TempDir tmp("model");
  save_model(toy, tmp.path() / "m" / "toy.wmwb");
  CHECK(load_model(tmp.path() / "m" / "toy.wmwb") == toy);
}

TEST_CASE("randomize_weights is seeded") {
  NetGraph a = toy_conv_net(4, true), b = toy_conv_net(4, true), c = toy_conv_net(4, true);
  randomize_weights(a, 5);
  randomize_weights(b, 5);
  randomize_weights(c, 6);
  CHECK(a == b);
  CHECK_FALSE(a == c);
}

TEST_CASE("model file header layout") {
  NetGraph toy = toy_conv_net(2, false);
  randomize_weights(toy, 3);
  auto bytes = encode_model(toy);
  CHECK(bytes[0] == 0x57);
  CHECK(bytes[1] == 0x4D);
  CHECK(bytes[2] == 0x57);
  CHECK(bytes[3] == 0x42);
  CHECK(bytes[4] == 1);
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= std::uint64_t{bytes[8 + i]} << (8 * i);
  const std::string descriptor = model_descriptor_json(toy);
  CHECK(len == descriptor.size());
  CHECK(std::string(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len)) == descriptor);
  CHECK(bytes.size() == 16 + len + 3 * 3 * 3 * 2 * 4);
}

TEST_CASE("corrupted model files raise the matching error") {
  NetGraph toy = toy_conv_net(8, false);
  randomize_weights(toy, 4);
  const auto good = encode_model(toy);

  SUBCASE("bad magic") {
    auto b = good;
    std::memcpy(b.data(), "XXXX", 4);
    CHECK_THROWS_CODE(decode_model(b), ErrorCode::BadMagic);
    CHECK_THROWS_CODE(decode_model(std::vector<std::uint8_t>{'W', 'M'}), ErrorCode::BadMagic);
  }
  SUBCASE("future version") { CHECK_THROWS_CODE(decode_model(with_u32(good, 4, 2)), ErrorCode::VersionUnsupported); }
  SUBCASE("header cut short") {
    std::vector<std::uint8_t> b(good.begin(), good.begin() + 10);
    CHECK_THROWS_CODE(decode_model(b), ErrorCode::TruncatedFile);
  }
  SUBCASE("descriptor cut short") {
    std::vector<std::uint8_t> b(good.begin(), good.begin() + 40);
    CHECK_THROWS_CODE(decode_model(b), ErrorCode::TruncatedFile);
  }
  SUBCASE("3x3x3x8 kernel declared, 3x3x3x4 floats present") {
    std::vector<std::uint8_t> b(good.begin(), good.end() - 3 * 3 * 3 * 4 * 4);
    CHECK_THROWS_CODE(decode_model(b), ErrorCode::ShapeMismatch);
  }
  SUBCASE("trailing bytes") {
    auto b = good;
    b.insert(b.end(), 4, 0);
    CHECK_THROWS_CODE(decode_model(b), ErrorCode::ShapeMismatch);
  }
  SUBCASE("declared blob shape disagrees with the layer spec") {
    std::string d = model_descriptor_json(toy);
    auto pos = d.find("[3,3,3,8]");
    REQUIRE(pos != std::string::npos);
    d.replace(pos, 9, "[3,3,3,4]");
    std::vector<std::uint8_t> b{'W', 'M', 'W', 'B', 1, 0, 0, 0};
    for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(std::uint64_t{d.size()} >> (8 * i)));
    b.insert(b.end(), d.begin(), d.end());
    b.insert(b.end(), 3 * 3 * 3 * 4 * 4, 0);
    CHECK_THROWS_CODE(decode_model(b), ErrorCode::ShapeMismatch);
  }
  SUBCASE("descriptor is not JSON") {
    auto b = good;
    b[16] = '#';
    CHECK_THROWS_CODE(decode_model(b), ErrorCode::InvalidGraph);
  }
  SUBCASE("missing file") { CHECK_THROWS_CODE(load_model("/nonexistent/model.wmwb"), ErrorCode::Io); }
}
