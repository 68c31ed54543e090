#include "birdsong/config.hpp"

#include <functional>
#include <map>

#include "birdsong/error.hpp"
#include "byte_io.hpp"
#include "text_util.hpp"

namespace birdsong {
namespace {

using Setter = std::function<void(PipelineConfig&, std::string_view)>;

template <typename T>
T number(std::string_view v, std::string_view key) {
  if constexpr (std::is_floating_point_v<T>) {
    if (auto d = detail::parse_double(v)) return static_cast<T>(*d);
  } else {
    if (auto i = detail::parse_int(v); i && *i >= 0) return static_cast<T>(*i);
  }
  throw Error(ErrorCode::BadConfig, "bad value '" + std::string(v) + "' for " + std::string(key));
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"features.sample_rate", [](auto& c, auto v) { c.features.sample_rate = number<int>(v, "sample_rate"); }},
      {"features.fft_size", [](auto& c, auto v) { c.features.fft_size = number<int>(v, "fft_size"); }},
      {"features.hop", [](auto& c, auto v) { c.features.hop = number<int>(v, "hop"); }},
      {"features.mel_bands", [](auto& c, auto v) { c.features.mel_bands = number<int>(v, "mel_bands"); }},
      {"features.f_min", [](auto& c, auto v) { c.features.f_min = number<double>(v, "f_min"); }},
      {"features.f_max", [](auto& c, auto v) { c.features.f_max = number<double>(v, "f_max"); }},
      {"features.db_floor", [](auto& c, auto v) { c.features.db_floor = number<double>(v, "db_floor"); }},
      {"split.train", [](auto& c, auto v) { c.fractions.train = number<double>(v, "train"); }},
      {"split.val", [](auto& c, auto v) { c.fractions.val = number<double>(v, "val"); }},
      {"split.test", [](auto& c, auto v) { c.fractions.test = number<double>(v, "test"); }},
      {"split.seed", [](auto& c, auto v) { c.seed = number<std::uint64_t>(v, "seed"); }},
      {"paths.model", [](auto& c, auto v) { c.model_path = std::string(v); }},
      {"paths.manifest_root", [](auto& c, auto v) { c.manifest_root = std::string(v); }},
      {"paths.output_dir", [](auto& c, auto v) { c.output_dir = std::string(v); }},
      {"classes.names",
       [](auto& c, auto v) {
         c.class_names.clear();
         for (auto name : detail::split(v, ',')) {
           if (!detail::trim(name).empty()) c.class_names.emplace_back(detail::trim(name));
         }
       }},
  };
  return table;
}

}  // namespace

PipelineConfig parse_config(std::string_view text) {
  PipelineConfig cfg;
  std::string section;
  auto all = detail::lines(text);
  for (std::size_t i = 0; i < all.size(); ++i) {
    std::string_view line = detail::trim(all[i]);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    const std::string where = "config line " + std::to_string(i + 1) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw Error(ErrorCode::BadConfig, where + "unterminated section header");
      section = std::string(detail::trim(line.substr(1, line.size() - 2)));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::BadConfig, where + "expected key = value");
    std::string key = section + "." + std::string(detail::trim(line.substr(0, eq)));
    auto it = setters().find(key);
    if (it == setters().end()) throw Error(ErrorCode::BadConfig, where + "unknown key '" + key + "'");
    try {
      it->second(cfg, detail::trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(ErrorCode::BadConfig, where + e.what());
    }
  }
  cfg.features.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  return parse_config(detail::read_text_file(path));
}

std::string dump_config(const PipelineConfig& c) {
  auto num = [](double v) {
    std::string s = detail::format_fixed(v, 6);
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
    return s;
  };
  std::string names;
  for (const auto& n : c.class_names) names += (names.empty() ? "" : ",") + n;
  const auto& f = c.features;
  std::string out;
  out += "[features]\n";
  out += "sample_rate = " + std::to_string(f.sample_rate) + "\n";
  out += "fft_size = " + std::to_string(f.fft_size) + "\n";
  out += "hop = " + std::to_string(f.hop) + "\n";
  out += "mel_bands = " + std::to_string(f.mel_bands) + "\n";
  out += "f_min = " + num(f.f_min) + "\n";
  out += "f_max = " + num(f.f_max) + "\n";
  out += "db_floor = " + num(f.db_floor) + "\n";
  out += "\n[split]\n";
  out += "train = " + num(c.fractions.train) + "\n";
  out += "val = " + num(c.fractions.val) + "\n";
  out += "test = " + num(c.fractions.test) + "\n";
  out += "seed = " + std::to_string(c.seed) + "\n";
  out += "\n[paths]\n";
  out += "model = " + c.model_path.string() + "\n";
  out += "manifest_root = " + c.manifest_root.string() + "\n";
  out += "output_dir = " + c.output_dir.string() + "\n";
  out += "\n[classes]\n";
  out += "names = " + names + "\n";
  return out;
}

}  // namespace birdsong
