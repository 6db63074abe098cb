// evlab: event-frame synthesis, autoencoder/classifier training, evaluation,
// MI probing, threshold selection, and benchmarking, from one binary.
//
// Exit codes: 0 success, 1 usage error, 2 data or validation error.
// Every command is single threaded and bit-reproducible for a fixed seed;
// EVLAB_DETERMINISTIC=1 is accepted for compatibility and changes nothing.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "evlab/bench.hpp"
#include "evlab/dataset.hpp"
#include "evlab/metrics.hpp"
#include "evlab/mi.hpp"
#include "evlab/selector.hpp"
#include "evlab/train.hpp"

namespace {

using namespace evlab;

std::vector<SequenceDir> collect_dirs(const std::vector<std::string>& pos,
                                      const std::vector<std::string>& neg) {
  std::vector<SequenceDir> dirs;
  for (const auto& d : pos) dirs.push_back({d, Label::Positive});
  for (const auto& d : neg) dirs.push_back({d, Label::Negative});
  if (dirs.empty()) throw ValidationError("no input directories, pass --pos and/or --neg");
  return dirs;
}

EventMode parse_mode(const std::string& s) {
  if (s == "successive") return EventMode::Successive;
  if (s == "reference") return EventMode::Reference;
  throw ValidationError("unknown mode '" + s + "', expected successive or reference");
}

std::string loss_csv(const std::vector<double>& losses) {
  std::string out = "epoch,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < losses.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i + 1, losses[i]);
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------

struct EventsArgs {
  std::vector<std::string> pos, neg;
  int th = 8;
  std::string mode = "successive";
  std::string out;
};

int cmd_events(const EventsArgs& a) {
  const auto manifest =
      build_dataset(collect_dirs(a.pos, a.neg), a.th, parse_mode(a.mode), a.out);
  std::cout << (std::filesystem::path(a.out) / "manifest.tsv").string() << "\n";
  std::cout << "entries=" << manifest.entries.size() << " positive="
            << manifest.count(Label::Positive) << " negative=" << manifest.count(Label::Negative)
            << "\n";
  return 0;
}

struct TrainAeArgs {
  std::string manifest, out, loss_out;
  std::uint32_t input_size = 64;
  double width = 1.0;
  std::string loss = "bce";
  std::uint32_t epochs = 20;
  std::size_t batch = 16;
  double lr = 1e-3;
  std::uint64_t seed = 1;
};

int cmd_train_ae(const TrainAeArgs& a) {
  ModelConfig cfg;
  cfg.input_size = a.input_size;
  cfg.width_mult = a.width;
  cfg.loss = parse_loss(a.loss);
  TrainOptions opts;
  opts.epochs = a.epochs;
  opts.batch_size = a.batch;
  opts.lr = a.lr;
  opts.seed = a.seed;

  const auto result = train_autoencoder(read_manifest(a.manifest), cfg, opts);
  save_weights(result.params, a.out);
  const std::string loss_path = a.loss_out.empty() ? a.out + ".loss.csv" : a.loss_out;
  write_file_atomic(loss_path, loss_csv(result.report.epoch_loss));
  std::printf("wrote %s and %s\n", a.out.c_str(), loss_path.c_str());
  std::printf("epochs=%zu final_loss=%.6f wall_seconds=%.2f\n",
              result.report.epoch_loss.size(), result.report.final_loss(),
              result.report.wall_seconds);
  return 0;
}

struct TrainClfArgs {
  std::string weights, manifest, out, loss_out;
  std::uint32_t fc_hidden = 0;  // 0: keep the encoder's configured value
  std::uint32_t epochs = 30;
  std::size_t batch = 16;
  double lr = 1e-3;
  std::uint64_t seed = 1;
};

int cmd_train_clf(const TrainClfArgs& a) {
  const ParameterSet encoder = load_weights(a.weights);
  ModelConfig cfg = encoder.config;
  if (a.fc_hidden != 0) cfg.fc_hidden = a.fc_hidden;
  TrainOptions opts;
  opts.epochs = a.epochs;
  opts.batch_size = a.batch;
  opts.lr = a.lr;
  opts.seed = a.seed;

  const auto result = train_classifier(encoder, read_manifest(a.manifest), cfg, opts);
  save_weights(result.params, a.out);
  const std::string loss_path = a.loss_out.empty() ? a.out + ".loss.csv" : a.loss_out;
  write_file_atomic(loss_path, loss_csv(result.report.epoch_loss));
  std::printf("wrote %s and %s\n", a.out.c_str(), loss_path.c_str());
  std::printf("epochs=%zu final_loss=%.6f wall_seconds=%.2f\n",
              result.report.epoch_loss.size(), result.report.final_loss(),
              result.report.wall_seconds);
  return 0;
}

struct EvalArgs {
  std::string weights, manifest, roc_out;
};

int cmd_eval(const EvalArgs& a) {
  const ParameterSet ps = load_weights(a.weights);
  const DatasetManifest manifest = read_manifest(a.manifest);

  if (!ps.has_classifier_head()) {
    const double racc = reconstruction_accuracy(ps, manifest);
    std::printf("reconstruction_accuracy=%.2f\n", racc * 100.0);
    return 0;
  }

  auto [frames, label_list] = load_event_frames(manifest);
  const std::vector<double> scores = classify_scores(ps, frames);
  std::vector<int> labels(label_list.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    labels[i] = label_list[i] == Label::Positive ? 1 : 0;

  const RocCurve curve = roc_curve(scores, labels);
  const ConfusionCounts c = confusion(labels, predictions_from_scores(scores));
  std::cout << summary_line(accuracy(c), precision(c), recall(c), f1(c), curve.auroc) << "\n";
  if (!a.roc_out.empty()) export_curve(curve, a.roc_out);
  return 0;
}

struct ProbeArgs {
  std::string weights, manifest, mode = "coarsening", out;
  std::size_t bins = 8;
};

int cmd_probe(const ProbeArgs& a) {
  const ParameterSet ps = load_weights(a.weights);
  auto [frames, labels] = load_event_frames(read_manifest(a.manifest));
  const MiReport report = dpi_chain(ps, frames, a.bins, parse_mi_mode(a.mode));
  const std::string csv = mi_report_csv(report);
  if (a.out.empty()) {
    std::cout << csv;
  } else {
    write_file_atomic(a.out, csv);
    std::cout << "wrote " << a.out << "\n";
  }
  return 0;
}

struct SelectArgs {
  std::vector<std::string> pos, neg;
  std::vector<int> candidates;
  std::string criterion = "validation_auroc";
  std::string mode = "successive";
  std::uint32_t budget = 10;
  std::uint64_t seed = 1;
  double target_density = 0.05;
  std::string out;
};

int cmd_select(const SelectArgs& a) {
  SweepOptions opts;
  opts.candidates = a.candidates;
  opts.criterion = parse_criterion(a.criterion);
  opts.mode = parse_mode(a.mode);
  opts.budget = a.budget;
  opts.seed = a.seed;
  opts.target_density = a.target_density;

  const SweepResult result = sweep_thresholds(collect_dirs(a.pos, a.neg), opts);
  if (!a.out.empty()) write_file_atomic(a.out, sweep_csv(result, opts.criterion));
  std::printf("chosen=%d\n", result.chosen);
  return 0;
}

struct BenchArgs {
  std::string weights, latency_out;
  std::uint32_t warmup = 20;
  std::uint32_t iters = 200;
};

int cmd_bench(const BenchArgs& a) {
  const BenchReport report = run_bench(load_weights(a.weights), a.warmup, a.iters);
  std::cout << bench_line(report) << "\n";
  if (!a.latency_out.empty()) write_file_atomic(a.latency_out, latencies_csv(report));
  return 0;
}

struct ParamsArgs {
  std::string weights;
};

int cmd_params(const ParamsArgs& a) {
  const ParameterSet ps = load_weights(a.weights);
  std::printf("total=%zu trainable=%zu\n", param_count(ps, false), param_count(ps, true));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evlab: binary event frames, a convolutional event autoencoder, and the\n"
               "tooling around them (training, evaluation, MI probing, threshold\n"
               "selection, benchmarking). Deterministic for a fixed seed."};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI config file, one [subcommand] section per command");
  app.allow_config_extras(CLI::config_extras_mode::error);

  EventsArgs ev;
  auto* events = app.add_subcommand("events", "Synthesize event frames from PGM sequences");
  events->add_option("--pos", ev.pos, "Positive-class frame directories");
  events->add_option("--neg", ev.neg, "Negative-class frame directories");
  events->add_option("--th", ev.th, "Event threshold")->check(CLI::Range(1, 255));
  events->add_option("--mode", ev.mode, "successive or reference")
      ->check(CLI::IsMember({"successive", "reference"}));
  events->add_option("--out", ev.out, "Output dataset directory")->required();

  TrainAeArgs ta;
  auto* train_ae = app.add_subcommand("train-ae", "Train the event autoencoder");
  train_ae->add_option("--manifest", ta.manifest, "Dataset manifest")->required();
  train_ae->add_option("--out", ta.out, "Output weight file")->required();
  train_ae->add_option("--loss-out", ta.loss_out, "Loss CSV path (default <out>.loss.csv)");
  train_ae->add_option("--input-size", ta.input_size, "Model input side, multiple of 8");
  train_ae->add_option("--width", ta.width, "Width multiplier");
  train_ae->add_option("--loss", ta.loss, "bce or mse")->check(CLI::IsMember({"bce", "mse"}));
  train_ae->add_option("--epochs", ta.epochs, "Training epochs");
  train_ae->add_option("--batch", ta.batch, "Batch size");
  train_ae->add_option("--lr", ta.lr, "Adam learning rate");
  train_ae->add_option("--seed", ta.seed, "RNG seed");

  TrainClfArgs tc;
  auto* train_clf =
      app.add_subcommand("train-clf", "Train a classifier head on a frozen encoder");
  train_clf->add_option("--weights", tc.weights, "Autoencoder weight file")->required();
  train_clf->add_option("--manifest", tc.manifest, "Dataset manifest")->required();
  train_clf->add_option("--out", tc.out, "Output weight file")->required();
  train_clf->add_option("--loss-out", tc.loss_out, "Loss CSV path (default <out>.loss.csv)");
  train_clf->add_option("--fc-hidden", tc.fc_hidden, "Hidden units (default from weights)");
  train_clf->add_option("--epochs", tc.epochs, "Training epochs");
  train_clf->add_option("--batch", tc.batch, "Batch size");
  train_clf->add_option("--lr", tc.lr, "Adam learning rate");
  train_clf->add_option("--seed", tc.seed, "RNG seed");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Evaluate weights against a manifest");
  eval->add_option("--weights", ea.weights, "Weight file")->required();
  eval->add_option("--manifest", ea.manifest, "Dataset manifest")->required();
  eval->add_option("--roc-out", ea.roc_out, "ROC CSV path (classifier only)");

  ProbeArgs pa;
  auto* probe = app.add_subcommand("probe", "Layer-wise mutual information report");
  probe->add_option("--weights", pa.weights, "Weight file")->required();
  probe->add_option("--manifest", pa.manifest, "Dataset manifest")->required();
  probe->add_option("--bins", pa.bins, "Quantization bins")->check(CLI::Range(1, 65535));
  probe->add_option("--mode", pa.mode, "coarsening or raw")
      ->check(CLI::IsMember({"coarsening", "raw"}));
  probe->add_option("--out", pa.out, "CSV path (stdout when omitted)");

  SelectArgs sa;
  auto* select = app.add_subcommand("select", "Sweep candidate thresholds and pick one");
  select->add_option("--pos", sa.pos, "Positive-class frame directories");
  select->add_option("--neg", sa.neg, "Negative-class frame directories");
  select->add_option("--candidates", sa.candidates, "Candidate thresholds")
      ->required()
      ->delimiter(',');
  select->add_option("--criterion", sa.criterion, "validation_auroc or density_band")
      ->check(CLI::IsMember({"validation_auroc", "density_band"}));
  select->add_option("--mode", sa.mode, "successive or reference")
      ->check(CLI::IsMember({"successive", "reference"}));
  select->add_option("--budget", sa.budget, "Training epochs per candidate");
  select->add_option("--seed", sa.seed, "RNG seed");
  select->add_option("--target-density", sa.target_density, "density_band target");
  select->add_option("--out", sa.out, "Sweep CSV path");

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Measure single-image inference throughput");
  bench->add_option("--weights", ba.weights, "Weight file")->required();
  bench->add_option("--warmup", ba.warmup, "Warmup iterations");
  bench->add_option("--iters", ba.iters, "Measured iterations")->check(CLI::Range(10, 1000000));
  bench->add_option("--latency-out", ba.latency_out, "Raw latency CSV path");

  ParamsArgs pga;
  auto* params = app.add_subcommand("params", "Report parameter counts for a weight file");
  params->add_option("--weights", pga.weights, "Weight file")->required();

  // lets --config appear after the subcommand name and still reach the app
  for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; }))
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (events->parsed()) return cmd_events(ev);
    if (train_ae->parsed()) return cmd_train_ae(ta);
    if (train_clf->parsed()) return cmd_train_clf(tc);
    if (eval->parsed()) return cmd_eval(ea);
    if (probe->parsed()) return cmd_probe(pa);
    if (select->parsed()) return cmd_select(sa);
    if (bench->parsed()) return cmd_bench(ba);
    if (params->parsed()) return cmd_params(pga);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
