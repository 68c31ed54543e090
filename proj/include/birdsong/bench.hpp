#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "birdsong/melspec.hpp"
#include "birdsong/netgraph.hpp"

namespace birdsong {

struct BenchReport {
  std::string arch;
  std::int64_t param_count = 0;
  std::int64_t weight_bytes = 0;
  int warmup_runs = 0;
  int timed_runs = 0;
  std::vector<double> latency_ms;  // one entry per timed run, in run order
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double throughput = 0.0;  // images per second over the timed region
  std::int64_t peak_activation_bytes = 0;
  std::int64_t peak_working_set_bytes = 0;  // weights + peak activations

  std::string to_json(int indent = 2) const;
};

/// Nearest-rank percentile of an unsorted sample, q in (0, 1].
double percentile(std::vector<double> values, double q);

/// Runs `warmup` untimed then `runs` timed forward passes on one thread and
/// checks that every timed output is bit-identical. Throws BadConfig when
/// runs < 1, BenchBusy when another benchmark is running in this process, and
/// NonDeterministicOutput when outputs differ.
BenchReport bench_forward(const NetGraph& g, const FeatureImage& image, int warmup, int runs);

}  // namespace birdsong
