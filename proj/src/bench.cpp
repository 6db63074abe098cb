#include "evlab/bench.hpp"

#include <sys/utsname.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <thread>

#include "evlab/rng.hpp"

namespace evlab {

const char* model_kind_name(ModelKind k) {
  return k == ModelKind::Autoencoder ? "autoencoder" : "classifier";
}

namespace {

double nearest_rank(const std::vector<double>& sorted, double pct) {
  const double rank = std::ceil(pct / 100.0 * static_cast<double>(sorted.size()));
  const std::size_t idx = rank < 1.0 ? 0 : static_cast<std::size_t>(rank) - 1;
  return sorted[std::min(idx, sorted.size() - 1)];
}

}  // namespace

BenchReport run_bench_fn(const std::function<void()>& pass, ModelKind kind, double width_mult,
                         std::uint32_t warmup, std::uint32_t iters) {
  if (iters < 10) throw ValidationError("bench: need at least 10 iterations");
  using Clock = std::chrono::steady_clock;

  for (std::uint32_t i = 0; i < warmup; ++i) pass();

  BenchReport report;
  report.kind = kind;
  report.width_mult = width_mult;
  report.warmup = warmup;
  report.iters = iters;
  report.host = host_descriptor();
  report.latencies_ms.reserve(iters);

  double total_s = 0.0;
  for (std::uint32_t i = 0; i < iters; ++i) {
    const auto t0 = Clock::now();
    pass();
    const auto t1 = Clock::now();
    const double s = std::chrono::duration<double>(t1 - t0).count();
    total_s += s;
    report.latencies_ms.push_back(s * 1000.0);
  }

  report.fps = static_cast<double>(iters) / total_s;
  double sum = 0.0;
  for (double v : report.latencies_ms) sum += v;
  report.mean_ms = sum / static_cast<double>(iters);
  std::vector<double> sorted = report.latencies_ms;
  std::sort(sorted.begin(), sorted.end());
  report.median_ms = nearest_rank(sorted, 50.0);
  report.p95_ms = nearest_rank(sorted, 95.0);
  return report;
}

BenchReport run_bench(const ParameterSet& ps, std::uint32_t warmup, std::uint32_t iters) {
  const ModelKind kind =
      ps.has_classifier_head() ? ModelKind::Classifier : ModelKind::Autoencoder;
  const std::size_t size = ps.config.input_size;

  // A fixed random event mask as the single input image.
  Rng rng(42);
  Tensor input({1, 1, size, size});
  for (auto& v : input.data) v = rng.next_below(2) ? 1.0f : 0.0f;

  const auto layers = kind == ModelKind::Classifier ? classifier_layers() : autoencoder_layers();
  const auto pass = [&] {
    const Tensor out = run_layers(ps, layers, input);
    for (float v : out.data) {
      if (!std::isfinite(v))
        throw Error("bench: non-finite model output, weights look broken");
    }
  };
  return run_bench_fn(pass, kind, ps.config.width_mult, warmup, iters);
}

double compare(const BenchReport& a, const BenchReport& b, bool allow_cross_host) {
  if (a.host != b.host && !allow_cross_host)
    throw ValidationError("bench compare: reports come from different hosts ('" + a.host +
                          "' vs '" + b.host + "'); pass the cross-host override to proceed");
  if (b.fps <= 0.0) throw ValidationError("bench compare: denominator report has fps <= 0");
  return a.fps / b.fps;
}

std::string host_descriptor() {
  utsname u{};
  std::string host = "unknown";
  if (uname(&u) == 0) {
    host = std::string(u.sysname) + " " + u.machine;
  }
  host += " " + std::to_string(std::thread::hardware_concurrency()) + "cpu";
  return host;
}

std::string bench_line(const BenchReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "kind=%s width=%.2f fps=%.2f mean_ms=%.3f median_ms=%.3f p95_ms=%.3f "
                "warmup=%u iters=%u host=\"%s\"",
                model_kind_name(r.kind), r.width_mult, r.fps, r.mean_ms, r.median_ms, r.p95_ms,
                r.warmup, r.iters, r.host.c_str());
  return buf;
}

std::string latencies_csv(const BenchReport& r) {
  std::string out = "iter,latency_ms\n";
  char buf[64];
  for (std::size_t i = 0; i < r.latencies_ms.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, r.latencies_ms[i]);
    out += buf;
  }
  return out;
}

}  // namespace evlab
