#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "evlab/model.hpp"

// Single-threaded throughput measurement: batch-1 forward passes against a
// monotonic clock, matching a live-sensor streaming scenario. Only the model
// forward pass is timed, not input preparation. Percentiles use the
// nearest-rank definition on the sorted latencies.

namespace evlab {

enum class ModelKind : std::uint8_t { Autoencoder, Classifier };

const char* model_kind_name(ModelKind k);

struct BenchReport {
  ModelKind kind = ModelKind::Autoencoder;
  double width_mult = 1.0;
  double fps = 0.0;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double p95_ms = 0.0;
  std::uint32_t warmup = 0;
  std::uint32_t iters = 0;
  std::string host;
  std::vector<double> latencies_ms;  // per measured iteration, in order
};

/// Benchmarks single-image inference: reconstruction for autoencoder
/// weights, prediction for classifier weights. Throws if any pass produces a
/// non-finite output.
BenchReport run_bench(const ParameterSet& ps, std::uint32_t warmup = 20,
                      std::uint32_t iters = 200);

/// Same measurement loop around an arbitrary pass, for harness tests.
BenchReport run_bench_fn(const std::function<void()>& pass, ModelKind kind, double width_mult,
                         std::uint32_t warmup = 20, std::uint32_t iters = 200);

/// fpsA / fpsB. Refuses to relate measurements from different hosts unless
/// allow_cross_host is set.
double compare(const BenchReport& a, const BenchReport& b, bool allow_cross_host = false);

std::string host_descriptor();
std::string bench_line(const BenchReport& report);

/// CSV `iter,latency_ms`.
std::string latencies_csv(const BenchReport& report);

}  // namespace evlab
