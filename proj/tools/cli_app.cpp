#include "cli_app.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "birdsong/annotation.hpp"
#include "birdsong/audio_io.hpp"
#include "birdsong/bench.hpp"
#include "birdsong/config.hpp"
#include "birdsong/error.hpp"
#include "birdsong/infer.hpp"
#include "birdsong/melspec.hpp"
#include "birdsong/metrics.hpp"
#include "birdsong/netgraph.hpp"
#include "birdsong/segmenter.hpp"
#include "birdsong/splitter.hpp"
#include "byte_io.hpp"
#include "text_util.hpp"

namespace birdsong::cli {
namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
  detail::write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::string read_text(const fs::path& path) {
  auto bytes = detail::read_file_bytes(path);
  return {bytes.begin(), bytes.end()};
}

std::vector<std::string> split_names(std::string_view list) {
  std::vector<std::string> out;
  for (auto part : detail::split(list, ',')) {
    auto t = detail::trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

std::string join_names(const std::vector<std::string>& names) {
  std::string s;
  for (std::size_t i = 0; i < names.size(); ++i) s += (i ? "," : "") + names[i];
  return s;
}

/// Files with the given extension, sorted by name. A directory argument expands
/// to its direct children; plain files are taken as they are.
std::vector<fs::path> collect_files(const std::vector<std::string>& args, const std::string& ext) {
  std::vector<fs::path> out;
  for (const auto& a : args) {
    fs::path p(a);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.is_regular_file() && e.path().extension() == ext) found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else if (fs::exists(p)) {
      out.push_back(p);
    } else {
      throw Error(ErrorCode::Io, "no such file or directory: " + a);
    }
  }
  return out;
}

unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first failure by
/// index is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, jobs), n));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string fmt(double v) { return detail::format_fixed(v, 6); }

std::string quote(std::string_view s) {
  std::string q;
  for (char c : s) {
    if (c == '"' || c == '\\') q += '\\';
    q += c == '\n' ? ' ' : c;
  }
  return q;
}

// A usage problem found after CLI11 accepted the command line.
struct UsageError {
  std::string message;
};

struct Globals {
  PipelineConfig cfg;
  fs::path output_dir;
};

// ---------------------------------------------------------------- manifest

struct ManifestArgs {
  std::string root;
  bool allow_orphans = false;
};

void print_issues(const Manifest& m, std::ostream& err) {
  for (const auto& issue : m.issues) {
    err << "warning: " << to_string(issue.kind) << " " << issue.path.string();
    if (!issue.detail.empty()) err << " (" << issue.detail << ")";
    err << "\n";
  }
}

int cmd_manifest(const Globals& g, const ManifestArgs& a, std::ostream& out, std::ostream& err) {
  Manifest m = build_manifest(a.root, {a.allow_orphans});
  print_issues(m, err);
  out << species_summary_text(m);
  const fs::path csv = g.output_dir / "manifest.csv";
  write_text(csv, manifest_csv(m));
  out << "manifest: " << csv.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- segment

struct SegmentArgs {
  std::string root;
  std::string out;
  bool allow_orphans = false;
  std::optional<long long> expect_windows;
};

int cmd_segment(const Globals& g, const SegmentArgs& a, std::ostream& out, std::ostream& err) {
  Manifest m = build_manifest(a.root, {a.allow_orphans});
  print_issues(m, err);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  std::string index = "stem,source_id,species,region,window\n";
  std::size_t regions = 0, windows = 0;
  for (const auto& e : m.entries) {
    AudioClip clip = load_clip(e.audio_path, g.cfg.features.sample_rate);
    clip.source_id = e.source_id;
    std::vector<Window> ws = segment_clip(clip, e.regions);
    export_windows(ws, dir, g.cfg.features.sample_rate);
    for (const auto& w : ws) {
      index += detail::csv_field(w.stem()) + "," + detail::csv_field(e.source_id) + "," +
               detail::csv_field(e.species) + "," + std::to_string(w.region_index) + "," +
               std::to_string(w.window_index) + "\n";
    }
    regions += e.regions.size();
    windows += ws.size();
  }
  write_text(dir / "windows.csv", index);
  out << "files: " << m.entries.size() << "\nregions: " << regions << "\nwindows: " << windows << "\n";
  if (a.expect_windows && static_cast<long long>(windows) != *a.expect_windows) {
    out << "note: expected " << *a.expect_windows << " windows, produced " << windows << " (difference "
        << static_cast<long long>(windows) - *a.expect_windows << ")\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- featurize

struct FeaturizeArgs {
  std::string windows;
  std::string out;
  unsigned jobs = 0;
};

int cmd_featurize(const Globals& g, const FeaturizeArgs& a, std::ostream& out, std::ostream&) {
  const auto inputs = collect_files({a.windows}, ".wav");
  if (inputs.empty()) throw Error(ErrorCode::Io, "no .wav files in " + a.windows);
  const FeatureExtractor fx(g.cfg.features);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  parallel_for(inputs.size(), a.jobs ? a.jobs : default_jobs(), [&](std::size_t i) {
    AudioClip clip = load_clip(inputs[i], g.cfg.features.sample_rate);
    if (clip.samples.size() != kWindowLength) {
      throw Error(ErrorCode::ShapeMismatch, inputs[i].string() + ": expected " + std::to_string(kWindowLength) +
                                                " samples, got " + std::to_string(clip.samples.size()));
    }
    write_feature_file(dir / (inputs[i].stem().string() + ".wmfi"), fx.extract(clip.samples));
  });
  out << "features: " << inputs.size() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- split

struct SplitArgs {
  std::string root;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool allow_orphans = false;
};

int cmd_split(const Globals& g, const SplitArgs& a, std::ostream& out, std::ostream& err) {
  Manifest m = build_manifest(a.root, {a.allow_orphans});
  print_issues(m, err);
  SplitAssignment s = split_by_source(m, g.cfg.fractions, a.seed.value_or(g.cfg.seed));
  const fs::path csv = a.out.empty() ? g.output_dir / "split.csv" : fs::path(a.out);
  write_text(csv, split_csv(s));
  std::array<std::int64_t, 3> files{}, windows{};
  for (const auto& r : s.rows) {
    files[static_cast<int>(r.subset)] += 1;
    windows[static_cast<int>(r.subset)] += r.item.window_count;
  }
  for (int k = 0; k < 3; ++k) {
    out << to_string(static_cast<Subset>(k)) << ": files=" << files[k] << " windows=" << windows[k] << "\n";
  }
  out << "split: " << csv.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- infer

std::vector<std::string> model_class_names(const NetGraph& model) {
  auto it = model.metadata.find("class_names");
  return it == model.metadata.end() ? std::vector<std::string>{} : split_names(it->second);
}

struct InferArgs {
  std::string model;
  std::vector<std::string> features;
  unsigned jobs = 0;
};

int cmd_infer(const Globals& g, const InferArgs& a, std::ostream& out, std::ostream&) {
  NetGraph model = load_model(a.model);
  const auto inputs = collect_files(a.features, ".wmfi");
  if (inputs.empty()) throw Error(ErrorCode::Io, "no feature files given");
  std::vector<Prediction> preds(inputs.size());
  parallel_for(inputs.size(), a.jobs ? a.jobs : default_jobs(),
               [&](std::size_t i) { preds[i] = forward(model, read_feature_file(inputs[i])); });

  std::vector<std::string> names = g.cfg.class_names;
  if (names.empty()) names = model_class_names(model);
  const std::size_t n = static_cast<std::size_t>(model.n_classes());
  out << "item,argmax";
  for (std::size_t c = 0; c < n; ++c) {
    out << "," << detail::csv_field(names.size() == n ? names[c] : "class_" + std::to_string(c));
  }
  out << "\n";
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    out << detail::csv_field(inputs[i].stem().string()) << "," << preds[i].argmax;
    for (double p : preds[i].probs) out << "," << fmt(p);
    out << "\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string model;
  std::string split;
  std::string features;
  std::string subset = "test";
  std::string from_predictions;
  std::string out;
  std::string class_names;
  double bin_width = 0.1;
  unsigned jobs = 0;
};

std::size_t class_index(const std::map<std::string, std::size_t>& index, const std::string& name,
                        std::string_view what) {
  auto it = index.find(name);
  if (it == index.end()) {
    throw Error(ErrorCode::BadConfig, std::string(what) + " '" + name + "' is not in the class list");
  }
  return it->second;
}

std::map<std::string, std::size_t> index_names(const std::vector<std::string>& names) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (!index.emplace(names[i], i).second) {
      throw Error(ErrorCode::BadConfig, "duplicate class name '" + names[i] + "'");
    }
  }
  return index;
}

void write_reports(const ConfusionMatrix& cm, const fs::path& dir, double bin_width, std::ostream& out) {
  const MacroMetrics macro = macro_metrics(cm);
  std::vector<double> f1;
  for (std::size_t i = 0; i < cm.size(); ++i) f1.push_back(class_metrics(cm, i).f1);
  const F1Histogram hist = f1_histogram(f1, bin_width);

  write_text(dir / "report.json", metrics_report_json(cm) + "\n");
  write_text(dir / "report.csv", metrics_report_csv(cm));
  write_text(dir / "confusion_normalized.csv", normalized_matrix_csv(cm));
  write_text(dir / "f1_histogram.csv", histogram_csv(hist));

  out << "items: " << cm.total() << "\n";
  out << "accuracy: " << fmt(cm.accuracy()) << "\n";
  out << "macro_recall: " << fmt(macro.recall) << "\n";
  out << "macro_precision: " << fmt(macro.precision) << "\n";
  out << "macro_f1: " << fmt(macro.f1) << "\n";
  if (!macro.undefined_classes.empty()) {
    out << "undefined:";
    for (auto i : macro.undefined_classes) out << " " << cm.class_names()[i];
    out << "\n";
  }
  out << "reports: " << dir.string() << "\n";
}

int evaluate_predictions(const Globals& g, const EvaluateArgs& a, std::ostream& out) {
  const std::string text = read_text(a.from_predictions);
  const auto rows = detail::lines(text);
  if (rows.empty()) throw Error(ErrorCode::BadConfig, a.from_predictions + ": empty predictions file");
  const auto header = detail::csv_row(rows[0]);
  if (header != std::vector<std::string>{"item", "true", "predicted"}) {
    throw Error(ErrorCode::BadConfig, a.from_predictions + ": header must be item,true,predicted");
  }
  std::vector<std::pair<std::string, std::string>> labels;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (detail::trim(rows[i]).empty()) continue;
    auto f = detail::csv_row(rows[i]);
    if (f.size() != 3) {
      throw Error(ErrorCode::BadConfig,
                  a.from_predictions + ": line " + std::to_string(i + 1) + ": expected 3 fields");
    }
    labels.emplace_back(f[1], f[2]);
  }

  std::vector<std::string> names = split_names(a.class_names);
  if (names.empty()) names = g.cfg.class_names;
  if (names.empty()) {
    std::set<std::string> seen;
    for (const auto& [t, p] : labels) seen.insert({t, p});
    names.assign(seen.begin(), seen.end());
  }
  const auto index = index_names(names);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const auto& [t, p] : labels) pairs.emplace_back(class_index(index, t, "true class"),
                                                       class_index(index, p, "predicted class"));
  ConfusionMatrix cm = confusion_from_predictions(pairs, names.size(), names);
  write_reports(cm, a.out.empty() ? g.output_dir / "evaluation" : fs::path(a.out), a.bin_width, out);
  return kExitOk;
}

int cmd_evaluate(const Globals& g, const EvaluateArgs& a, std::ostream& out, std::ostream&) {
  if (!a.from_predictions.empty()) {
    if (!a.model.empty()) throw UsageError{"--from-predictions takes no positional arguments"};
    return evaluate_predictions(g, a, out);
  }
  if (a.model.empty() || a.split.empty() || a.features.empty()) {
    throw UsageError{"evaluate needs <model> <split> <features> or --from-predictions"};
  }
  const auto subset = subset_from_string(a.subset);
  if (!subset) throw UsageError{"--subset must be train, val or test"};

  NetGraph model = load_model(a.model);
  SplitAssignment split = parse_split_csv(read_text(a.split));

  std::vector<std::string> names = split_names(a.class_names);
  if (names.empty()) names = g.cfg.class_names;
  if (names.empty()) names = model_class_names(model);
  if (names.empty()) {
    std::set<std::string> species;
    for (const auto& r : split.rows) species.insert(r.item.species);
    names.assign(species.begin(), species.end());
  }
  if (names.size() != static_cast<std::size_t>(model.n_classes())) {
    throw Error(ErrorCode::BadConfig, "class list has " + std::to_string(names.size()) + " names but the model has " +
                                          std::to_string(model.n_classes()) + " outputs");
  }
  const auto index = index_names(names);
  std::map<std::string, const SplitRow*> by_source;
  for (const auto& r : split.rows) by_source[r.item.source_id] = &r;

  struct Item {
    fs::path path;
    std::size_t truth;
  };
  std::vector<Item> items;
  for (const auto& p : collect_files({a.features}, ".wmfi")) {
    const std::string stem = p.stem().string();
    const auto cut = stem.rfind("_r");
    auto it = by_source.find(cut == std::string::npos ? stem : stem.substr(0, cut));
    if (it == by_source.end() || it->second->subset != *subset) continue;
    items.push_back({p, class_index(index, it->second->item.species, "species")});
  }
  if (items.empty()) {
    throw Error(ErrorCode::BadConfig, "no feature files in " + a.features + " belong to the " + a.subset + " subset");
  }

  std::vector<std::size_t> predicted(items.size());
  parallel_for(items.size(), a.jobs ? a.jobs : default_jobs(),
               [&](std::size_t i) { predicted[i] = forward(model, read_feature_file(items[i].path)).argmax; });

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::string csv = "item,true,predicted\n";
  for (std::size_t i = 0; i < items.size(); ++i) {
    pairs.emplace_back(items[i].truth, predicted[i]);
    csv += detail::csv_field(items[i].path.stem().string()) + "," + detail::csv_field(names[items[i].truth]) + "," +
           detail::csv_field(names[predicted[i]]) + "\n";
  }
  const fs::path dir = a.out.empty() ? g.output_dir / "evaluation" : fs::path(a.out);
  write_text(dir / "predictions.csv", csv);
  ConfusionMatrix cm = confusion_from_predictions(pairs, names.size(), names);
  write_reports(cm, dir, a.bin_width, out);

  auto arch = model.metadata.find("arch");
  if (arch != model.metadata.end()) {
    for (const auto& ref : kReferenceMacroScores) {
      if (ref.arch == arch->second) {
        out << "reference_macro (" << ref.arch << "): recall=" << detail::format_fixed(ref.recall, 3)
            << " precision=" << detail::format_fixed(ref.precision, 3) << " f1=" << detail::format_fixed(ref.f1, 3)
            << "\n";
      }
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::string model;
  int runs = 10;
  int warmup = 2;
  std::string image;
  std::string out;
};

int cmd_bench(const Globals& g, const BenchArgs& a, std::ostream& out, std::ostream&) {
  NetGraph model = load_model(a.model);
  FeatureImage image;
  if (!a.image.empty()) {
    image = read_feature_file(a.image);
  } else {
    const Shape s = model.input_shape();
    image.pixels = Tensor3(s.height, s.width, s.channels);
    std::mt19937_64 rng(0);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (auto& v : image.pixels.data) v = u(rng);
  }
  const std::string json = bench_forward(model, image, a.warmup, a.runs).to_json();
  out << json << "\n";
  write_text(a.out.empty() ? g.output_dir / "bench.json" : fs::path(a.out), json + "\n");
  return kExitOk;
}

// ---------------------------------------------------------------- catalog

struct CatalogArgs {
  std::string arch;
  int classes = 0;
  std::string head;
  int hidden = kCustomHeadWidth;
  std::uint64_t seed = 0;
  std::string out;
  bool no_write = false;
  std::string class_names;
};

int cmd_catalog(const Globals& g, const CatalogArgs& a, std::ostream& out, std::ostream&) {
  CatalogOptions opt;
  opt.n_classes = a.classes;
  opt.head = parse_head(a.head);
  opt.head_hidden = a.hidden;
  const Architecture arch = parse_architecture(a.arch);
  NetGraph model = build_catalog(arch, opt);

  std::vector<std::string> names = split_names(a.class_names);
  if (names.empty() && static_cast<int>(g.cfg.class_names.size()) == a.classes) names = g.cfg.class_names;
  if (!names.empty()) {
    if (static_cast<int>(names.size()) != a.classes) {
      throw Error(ErrorCode::BadConfig, "--class-names has " + std::to_string(names.size()) + " entries, expected " +
                                            std::to_string(a.classes));
    }
    index_names(names);
    model.metadata["class_names"] = join_names(names);
  }

  const ParamCount pc = count_params(model);
  const std::int64_t bytes = footprint_bytes(model);
  const DepthReport d = depth_report(model);
  out << "arch: " << to_string(arch) << "\n";
  out << "head: " << to_string(opt.head) << "\n";
  out << "classes: " << a.classes << "\n";
  out << "params: " << pc.total() << "\n";
  out << "trainable: " << pc.trainable << "\n";
  out << "non_trainable: " << pc.non_trainable << "\n";
  out << "size_bytes: " << bytes << "\n";
  out << "size_mib: " << mebibytes_rounded(bytes) << "\n";
  out << "depth_layer_list: " << d.layer_list_count << "\n";
  out << "depth_weighted_layers: " << d.weighted_layer_count << "\n";
  out << "depth_weighted_path: " << d.weighted_path_depth << "\n";
  out << "depth_conv_layers: " << d.conv_layer_count << "\n";

  if (!a.no_write) {
    randomize_weights(model, a.seed);
    const fs::path path = a.out.empty() ? g.output_dir / (std::string(to_string(arch)) + "_" +
                                                         std::string(to_string(opt.head)) + "_" +
                                                         std::to_string(a.classes) + ".wmwb")
                                        : fs::path(a.out);
    save_model(model, path);
    out << "model: " << path.string() << "\n";
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bird vocalization classification pipeline", "birdsong"};
  app.set_version_flag("--version", std::string("birdsong ") + BIRDSONG_VERSION + "\nmodel format: WMWB v" +
                                        std::to_string(kModelFormatVersion) + "\nfeature format: WMFI v" +
                                        std::to_string(kFeatureFileVersion));
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, output_dir;
  app.add_option("--config", config_path, "Pipeline config file");
  app.add_option("--output-dir", output_dir, "Output directory (overrides the config)");

  ManifestArgs manifest;
  auto* sc_manifest = app.add_subcommand("manifest", "Scan a dataset and print the per-species summary");
  sc_manifest->add_option("root", manifest.root, "Dataset root")->required();
  sc_manifest->add_flag("--allow-orphans", manifest.allow_orphans, "Report orphan files instead of failing");

  SegmentArgs segment;
  long long expect = 0;
  auto* sc_segment = app.add_subcommand("segment", "Cut labelled regions into one-second windows");
  sc_segment->add_option("root", segment.root, "Dataset root")->required();
  sc_segment->add_option("out", segment.out, "Window output directory")->required();
  sc_segment->add_flag("--allow-orphans", segment.allow_orphans, "Report orphan files instead of failing");
  auto* opt_expect = sc_segment->add_option("--expect-windows", expect, "Report any difference from this count");

  FeaturizeArgs featurize;
  auto* sc_featurize = app.add_subcommand("featurize", "Turn window WAVs into feature images");
  sc_featurize->add_option("windows", featurize.windows, "Directory of window WAVs")->required();
  sc_featurize->add_option("out", featurize.out, "Feature output directory")->required();
  sc_featurize->add_option("--jobs", featurize.jobs, "Worker threads (default: all cores)");

  SplitArgs split;
  std::uint64_t split_seed = 0;
  auto* sc_split = app.add_subcommand("split", "Assign recordings to train/val/test");
  sc_split->add_option("root", split.root, "Dataset root")->required();
  auto* opt_seed = sc_split->add_option("--seed", split_seed, "Shuffle seed (default from config)");
  sc_split->add_option("--out", split.out, "Split CSV path");
  sc_split->add_flag("--allow-orphans", split.allow_orphans, "Report orphan files instead of failing");

  InferArgs infer;
  auto* sc_infer = app.add_subcommand("infer", "Class probabilities for feature images");
  sc_infer->add_option("model", infer.model, "Model file")->required();
  sc_infer->add_option("features", infer.features, "Feature files or directories")->required();
  sc_infer->add_option("--jobs", infer.jobs, "Worker threads (default: all cores)");

  EvaluateArgs evaluate;
  auto* sc_evaluate = app.add_subcommand("evaluate", "Confusion matrix and macro report");
  sc_evaluate->add_option("model", evaluate.model, "Model file");
  sc_evaluate->add_option("split", evaluate.split, "Split CSV");
  sc_evaluate->add_option("features", evaluate.features, "Feature directory");
  sc_evaluate->add_option("--subset", evaluate.subset, "Subset to evaluate")->capture_default_str();
  sc_evaluate->add_option("--from-predictions", evaluate.from_predictions, "CSV of item,true,predicted");
  sc_evaluate->add_option("--out", evaluate.out, "Report directory");
  sc_evaluate->add_option("--class-names", evaluate.class_names, "Comma-separated class order");
  sc_evaluate->add_option("--bin-width", evaluate.bin_width, "F1 histogram bin width")->capture_default_str();
  sc_evaluate->add_option("--jobs", evaluate.jobs, "Worker threads (default: all cores)");

  BenchArgs bench;
  auto* sc_bench = app.add_subcommand("bench", "Time single-image inference");
  sc_bench->add_option("model", bench.model, "Model file")->required();
  sc_bench->add_option("--runs", bench.runs, "Timed runs")->capture_default_str();
  sc_bench->add_option("--warmup", bench.warmup, "Untimed warm-up runs")->capture_default_str();
  sc_bench->add_option("--image", bench.image, "Feature file to feed (default: seeded noise)");
  sc_bench->add_option("--out", bench.out, "Report path");

  CatalogArgs catalog;
  auto* sc_catalog = app.add_subcommand("catalog", "Build a reference architecture with random weights");
  sc_catalog->add_option("arch", catalog.arch, "vgg16, resnet50 or mobilenet_v2")->required();
  sc_catalog->add_option("--classes", catalog.classes, "Output classes")->required();
  sc_catalog->add_option("--head", catalog.head, "imagenet_reference or custom")->required();
  sc_catalog->add_option("--hidden", catalog.hidden, "Custom head width")->capture_default_str();
  sc_catalog->add_option("--seed", catalog.seed, "Weight seed")->capture_default_str();
  sc_catalog->add_option("--out", catalog.out, "Model path");
  sc_catalog->add_flag("--no-write", catalog.no_write, "Only print the report");
  sc_catalog->add_option("--class-names", catalog.class_names, "Comma-separated class names to store");

  bool dump = false;
  auto* sc_config = app.add_subcommand("config", "Show the effective configuration");
  sc_config->add_flag("--dump", dump, "Print every setting, defaults included")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    if (code == 0) return kExitOk;
    err << app.help();
    return kExitUsage;
  }

  try {
    Globals g;
    if (!config_path.empty()) g.cfg = load_config(config_path);
    g.output_dir = output_dir.empty() ? g.cfg.output_dir : fs::path(output_dir);

    if (sc_manifest->parsed()) return cmd_manifest(g, manifest, out, err);
    if (sc_segment->parsed()) {
      if (opt_expect->count()) segment.expect_windows = expect;
      return cmd_segment(g, segment, out, err);
    }
    if (sc_featurize->parsed()) return cmd_featurize(g, featurize, out, err);
    if (sc_split->parsed()) {
      if (opt_seed->count()) split.seed = split_seed;
      return cmd_split(g, split, out, err);
    }
    if (sc_infer->parsed()) return cmd_infer(g, infer, out, err);
    if (sc_evaluate->parsed()) return cmd_evaluate(g, evaluate, out, err);
    if (sc_bench->parsed()) return cmd_bench(g, bench, out, err);
    if (sc_catalog->parsed()) return cmd_catalog(g, catalog, out, err);
    if (sc_config->parsed()) {
      out << dump_config(g.cfg);
      return kExitOk;
    }
    err << app.help();
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "usage error: " << e.message << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: code=" << to_string(e.code()) << " message=\"" << quote(e.what()) << "\"\n";
    return kExitProcessing;
  } catch (const fs::filesystem_error& e) {
    err << "error: code=Io message=\"" << quote(e.what()) << "\"\n";
    return kExitProcessing;
  } catch (const std::exception& e) {
    err << "error: code=Internal message=\"" << quote(e.what()) << "\"\n";
    return kExitProcessing;
  }
}

}  // namespace birdsong::cli
