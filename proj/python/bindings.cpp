#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "birdsong/annotation.hpp"
#include "birdsong/audio_io.hpp"
#include "birdsong/bench.hpp"
#include "birdsong/error.hpp"
#include "birdsong/infer.hpp"
#include "birdsong/melspec.hpp"
#include "birdsong/metrics.hpp"
#include "birdsong/netgraph.hpp"
#include "birdsong/segmenter.hpp"
#include "birdsong/splitter.hpp"

namespace py = pybind11;
using namespace birdsong;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

py::array_t<float> to_numpy(const std::vector<float>& v) {
  py::array_t<float> a(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), a.mutable_data());
  return a;
}

py::array_t<float> to_numpy(const Tensor3& t) {
  py::array_t<float> a({t.height, t.width, t.channels});
  std::copy(t.data.begin(), t.data.end(), a.mutable_data());
  return a;
}

std::span<const float> as_span(const FloatArray& a) {
  return {a.data(), static_cast<std::size_t>(a.size())};
}

Tensor3 to_tensor(const FloatArray& a) {
  if (a.ndim() != 3) throw Error(ErrorCode::ShapeMismatch, "expected an array of shape (height, width, channels)");
  Tensor3 t(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)));
  std::copy(a.data(), a.data() + a.size(), t.data.begin());
  return t;
}

py::dict depth_dict(const DepthReport& d) {
  py::dict out;
  out["layer_list_count"] = d.layer_list_count;
  out["weighted_layer_count"] = d.weighted_layer_count;
  out["weighted_path_depth"] = d.weighted_path_depth;
  out["conv_layer_count"] = d.conv_layer_count;
  out["residual_branch_convs"] = d.residual_branch_convs;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the birdsong pipeline";
  m.attr("__version__") = BIRDSONG_VERSION;
  m.attr("MODEL_FORMAT_VERSION") = kModelFormatVersion;
  m.attr("FEATURE_FORMAT_VERSION") = kFeatureFileVersion;
  m.attr("SAMPLE_RATE") = kPipelineSampleRate;
  m.attr("WINDOW_LENGTH") = kWindowLength;

  // Leaked on purpose: the type must outlive the interpreter's module teardown.
  static PyObject* error_type = py::exception<Error>(m, "Error", PyExc_RuntimeError).release().ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(std::string(e.what()));
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error_type, exc.ptr());
    }
  });

  // audio
  m.def(
      "load_clip",
      [](const std::filesystem::path& path, int rate) {
        AudioClip c = load_clip(path, rate);
        return py::make_tuple(to_numpy(c.samples), c.sample_rate);
      },
      py::arg("path"), py::arg("sample_rate") = kPipelineSampleRate,
      "Decode a WAV file to mono at `sample_rate`. Returns (samples, rate).");
  m.def(
      "resample",
      [](const FloatArray& x, int from, int to) { return to_numpy(resample(as_span(x), from, to)); },
      py::arg("samples"), py::arg("source_rate"), py::arg("target_rate"));
  m.def(
      "write_wav",
      [](const std::filesystem::path& path, const FloatArray& x, int rate) { write_wav_file(path, as_span(x), rate); },
      py::arg("path"), py::arg("samples"), py::arg("sample_rate"));

  // labels and segmentation
  m.def(
      "parse_labels",
      [](std::string_view text) {
        py::list out;
        for (const auto& r : parse_label_file(text)) out.append(py::make_tuple(r.start_s, r.end_s, r.label));
        return out;
      },
      py::arg("text"), "Parse an Audacity label export into (start, end, label) tuples.");
  m.def(
      "windowize",
      [](const FloatArray& segment) {
        py::list out;
        for (const auto& w : windowize(as_span(segment))) out.append(to_numpy(w.samples));
        return out;
      },
      py::arg("segment"), "Split a segment into one-second windows, the last one filled cyclically.");
  m.def("window_count", [](std::size_t n) { return window_count(n); }, py::arg("length"));

  // features
  py::class_<FeatureExtractor>(m, "FeatureExtractor")
      .def(py::init([](int fft_size, int hop, int mel_bands) {
             FeatureConfig cfg;
             cfg.fft_size = fft_size;
             cfg.hop = hop;
             cfg.mel_bands = mel_bands;
             return FeatureExtractor(cfg);
           }),
           py::arg("fft_size") = 1024, py::arg("hop") = 256, py::arg("mel_bands") = 128)
      .def(
          "extract",
          [](const FeatureExtractor& fx, const FloatArray& window) {
            FeatureImage img;
            {
              py::gil_scoped_release release;
              img = fx.extract(as_span(window));
            }
            return to_numpy(img.pixels);
          },
          py::arg("window"), "224x224x3 feature image in [0, 1].");
  m.def(
      "read_features", [](const std::filesystem::path& p) { return to_numpy(read_feature_file(p).pixels); },
      py::arg("path"));
  m.def(
      "write_features",
      [](const std::filesystem::path& p, const FloatArray& a) { write_feature_file(p, FeatureImage{to_tensor(a)}); },
      py::arg("path"), py::arg("image"));

  // models
  py::class_<NetGraph>(m, "Model")
      .def_property_readonly("n_classes", &NetGraph::n_classes)
      .def_property_readonly("metadata", [](const NetGraph& g) { return g.metadata; })
      .def_property_readonly("param_count", [](const NetGraph& g) { return count_params(g).total(); })
      .def_property_readonly("trainable_params", [](const NetGraph& g) { return count_params(g).trainable; })
      .def_property_readonly("footprint_bytes", [](const NetGraph& g) { return footprint_bytes(g); })
      .def_property_readonly("footprint_mib", [](const NetGraph& g) { return mebibytes_rounded(footprint_bytes(g)); })
      .def_property_readonly("is_weighted", &NetGraph::is_weighted)
      .def("depth", [](const NetGraph& g) { return depth_dict(depth_report(g)); })
      .def("randomize", [](NetGraph& g, std::uint64_t seed) { randomize_weights(g, seed); }, py::arg("seed") = 0)
      .def("save", [](const NetGraph& g, const std::filesystem::path& p) { save_model(g, p); }, py::arg("path"))
      .def(
          "predict",
          [](const NetGraph& g, const FloatArray& image) {
            Tensor3 x = to_tensor(image);
            Prediction p;
            {
              py::gil_scoped_release release;
              p = forward(g, x);
            }
            return py::make_tuple(p.probs, p.argmax);
          },
          py::arg("image"), "Returns (probabilities, argmax).")
      .def(
          "bench_json",
          [](const NetGraph& g, const FloatArray& image, int warmup, int runs) {
            FeatureImage img{to_tensor(image)};
            py::gil_scoped_release release;
            return bench_forward(g, img, warmup, runs).to_json();
          },
          py::arg("image"), py::arg("warmup") = 2, py::arg("runs") = 10)
      .def("__eq__", [](const NetGraph& a, const NetGraph& b) { return a == b; });

  m.def(
      "build_catalog",
      [](std::string_view arch, int n_classes, std::string_view head, int hidden) {
        CatalogOptions opt;
        opt.n_classes = n_classes;
        opt.head = parse_head(head);
        opt.head_hidden = hidden;
        return build_catalog(parse_architecture(arch), opt);
      },
      py::arg("arch"), py::arg("n_classes") = 1000, py::arg("head") = "imagenet_reference",
      py::arg("head_hidden") = kCustomHeadWidth);
  m.def("load_model", [](const std::filesystem::path& p) { return load_model(p); }, py::arg("path"));
  m.def(
      "decode_model",
      [](py::bytes b) {
        std::string s = b;
        return decode_model(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
      },
      py::arg("data"));
  m.def(
      "encode_model",
      [](const NetGraph& g) {
        auto v = encode_model(g);
        return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
      },
      py::arg("model"));

  // metrics
  m.def(
      "metrics_report_json",
      [](const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted, std::size_t n_classes,
         std::vector<std::string> names) {
        if (truth.size() != predicted.size()) throw Error(ErrorCode::ShapeMismatch, "label lists differ in length");
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for (std::size_t i = 0; i < truth.size(); ++i) pairs.emplace_back(truth[i], predicted[i]);
        return metrics_report_json(confusion_from_predictions(pairs, n_classes, std::move(names)));
      },
      py::arg("truth"), py::arg("predicted"), py::arg("n_classes"), py::arg("class_names") = std::vector<std::string>{});
  m.def(
      "class_scores",
      [](std::int64_t tp, std::int64_t fp, std::int64_t fn) {
        ClassMetrics c = metrics_from_counts(tp, fp, fn);
        return py::make_tuple(c.precision, c.recall, c.f1);
      },
      py::arg("tp"), py::arg("fp"), py::arg("fn"), "(precision, recall, f1) from counts.");

  // split
  m.def(
      "split_by_source",
      [](const std::vector<std::tuple<std::string, std::string, std::int64_t>>& items,
         std::tuple<double, double, double> fractions, std::uint64_t seed) {
        std::vector<SplitItem> v;
        for (const auto& [id, sp, n] : items) v.push_back({id, sp, n});
        auto [tr, va, te] = fractions;
        SplitAssignment s = split_by_source(std::move(v), {tr, va, te}, seed);
        std::map<std::string, std::string> out;
        for (const auto& r : s.rows) out[r.item.source_id] = std::string(to_string(r.subset));
        return out;
      },
      py::arg("items"), py::arg("fractions") = std::make_tuple(0.7, 0.2, 0.1), py::arg("seed") = 0,
      "Map each source id to 'train', 'val' or 'test'. Items are (source_id, species, window_count).");
}
