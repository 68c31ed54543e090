#include "birdsong/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>

#include <json.hpp>

#include "birdsong/error.hpp"
#include "birdsong/infer.hpp"

namespace birdsong {
namespace {

std::atomic<bool> g_bench_running{false};

class BenchGuard {
 public:
  BenchGuard() {
    if (g_bench_running.exchange(true)) {
      throw Error(ErrorCode::BenchBusy, "another benchmark is already running in this process");
    }
  }
  ~BenchGuard() { g_bench_running.store(false); }
  BenchGuard(const BenchGuard&) = delete;
  BenchGuard& operator=(const BenchGuard&) = delete;
};

}  // namespace

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::BadConfig, "percentile of an empty sample");
  if (!(q > 0.0 && q <= 1.0)) throw Error(ErrorCode::BadConfig, "percentile rank must lie in (0, 1]");
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

BenchReport bench_forward(const NetGraph& g, const FeatureImage& image, int warmup, int runs) {
  if (runs < 1) throw Error(ErrorCode::BadConfig, "bench needs at least one timed run");
  if (warmup < 0) throw Error(ErrorCode::BadConfig, "warmup must be non-negative");
  BenchGuard guard;
  using clock = std::chrono::steady_clock;

  for (int i = 0; i < warmup; ++i) forward(g, image);

  BenchReport r;
  auto it = g.metadata.find("arch");
  r.arch = it != g.metadata.end() ? it->second : "custom";
  r.warmup_runs = warmup;
  r.timed_runs = runs;

  std::vector<double> reference;
  double total_s = 0.0;
  for (int i = 0; i < runs; ++i) {
    auto t0 = clock::now();
    Prediction p = forward(g, image);
    auto t1 = clock::now();
    const double s = std::chrono::duration<double>(t1 - t0).count();
    total_s += s;
    r.latency_ms.push_back(s * 1e3);
    if (i == 0) {
      reference = std::move(p.probs);
    } else if (p.probs != reference) {
      throw Error(ErrorCode::NonDeterministicOutput,
                  "timed run " + std::to_string(i) + " produced different probabilities");
    }
  }

  r.param_count = count_params(g).total();
  r.weight_bytes = footprint_bytes(g);
  r.p50_ms = percentile(r.latency_ms, 0.50);
  r.p95_ms = percentile(r.latency_ms, 0.95);
  r.throughput = total_s > 0.0 ? runs / total_s : 0.0;
  r.peak_activation_bytes = peak_activation_bytes(g);
  r.peak_working_set_bytes = r.weight_bytes + r.peak_activation_bytes;
  return r;
}

std::string BenchReport::to_json(int indent) const {
  nlohmann::json j = {{"arch", arch},
                      {"param_count", param_count},
                      {"weight_bytes", weight_bytes},
                      {"weight_mib", mebibytes_rounded(weight_bytes)},
                      {"warmup_runs", warmup_runs},
                      {"timed_runs", timed_runs},
                      {"latency_ms", latency_ms},
                      {"p50_ms", p50_ms},
                      {"p95_ms", p95_ms},
                      {"throughput_images_per_s", throughput},
                      {"peak_activation_bytes", peak_activation_bytes},
                      {"peak_working_set_bytes", peak_working_set_bytes}};
  return j.dump(indent);
}

}  // namespace birdsong
