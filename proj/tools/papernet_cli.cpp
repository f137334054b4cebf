// SPDX-License-Identifier: Apache-2.0
// Command-line front end. Exit codes: 0 ok, 1 check failure, 2 usage or
// config error, 3 data error.
#include <CLI11.hpp>
#include <cstdio>
#include <iomanip>
#include <iostream>
#include <optional>

#include "papernet/gradcheck_suite.hpp"
#include "papernet/io.hpp"
#include "papernet/pipeline.hpp"

namespace {

using namespace papernet;

enum Exit { kOk = 0, kCheckFailed = 1, kUsage = 2, kData = 3 };

struct ConfigFlags {
  std::optional<std::string> config, dataset, outdir, variant;
  std::optional<std::uint64_t> seed;
  std::optional<double> sample_rate, band_low, band_high, lr, dropout;
  std::optional<std::size_t> epochs, batch_size;
  std::optional<int> num_classes;
  bool no_class_weighting = false, no_early_stopping = false, no_bandpass = false;
  bool record_timing = false;

  void attach(CLI::App& app, bool training) {
    app.add_option("--config", config, "JSON run configuration");
    app.add_option("--dataset", dataset, "CSV dataset path");
    app.add_option("--outdir", outdir, "Output directory");
    app.add_option("--seed", seed, "Master seed");
    app.add_option("--num-classes", num_classes, "Number of classes");
    app.add_option("--sample-rate", sample_rate, "Sampling rate in Hz");
    app.add_option("--band-low", band_low, "Band-pass lower edge in Hz");
    app.add_option("--band-high", band_high, "Band-pass upper edge in Hz");
    app.add_flag("--no-bandpass", no_bandpass, "Skip the band-pass filter");
    if (!training) return;
    app.add_option("--variant", variant, "full | no_attention | no_lstm | no_residual");
    app.add_option("--epochs", epochs, "Maximum epochs");
    app.add_option("--batch-size", batch_size, "Mini-batch size");
    app.add_option("--lr", lr, "Initial learning rate");
    app.add_option("--dropout", dropout, "Dropout rate");
    app.add_flag("--no-class-weighting", no_class_weighting, "Use unit class weights");
    app.add_flag("--no-early-stopping", no_early_stopping, "Run all epochs");
    app.add_flag("--record-timing", record_timing, "Fill the history seconds column");
  }

  RunConfig resolve() const {
    RunConfig c = config ? RunConfig::from_file(*config) : RunConfig{};
    if (dataset) c.dataset = *dataset;
    if (outdir) c.outdir = *outdir;
    if (seed) c.seed = *seed;
    if (num_classes) c.num_classes = *num_classes;
    if (sample_rate) c.sample_rate_hz = *sample_rate;
    if (band_low) c.band_low_hz = *band_low;
    if (band_high) c.band_high_hz = *band_high;
    if (no_bandpass) c.bandpass = false;
    if (variant) {
      try {
        c.variant = parse_variant(*variant);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
    if (epochs) c.train.max_epochs = *epochs;
    if (batch_size) c.train.batch_size = *batch_size;
    if (lr) c.train.lr0 = *lr;
    if (dropout) c.train.dropout = *dropout;
    if (no_class_weighting) c.train.class_weighting = false;
    if (no_early_stopping) c.train.early_stopping = false;
    if (record_timing) c.train.record_timing = true;
    c.train.seed = c.seed;
    return c;
  }
};

int print_gradcheck(const GradcheckSuiteReport& report) {
  std::printf("%-22s %-14s %-8s %s\n", "check", "max_rel_error", "coords", "status");
  for (const auto& c : report.checks) {
    std::printf("%-22s %-14.3e %-8zu %s\n", c.name.c_str(), c.max_relative_error, c.coordinates,
                c.passed ? "PASS" : "FAIL");
  }
  const auto failed = report.failures();
  if (failed.empty()) {
    std::printf("all %zu checks below %.0e\n", report.checks.size(), report.tolerance);
    return kOk;
  }
  std::string names;
  for (const auto& f : failed) names += (names.empty() ? "" : ", ") + f;
  std::fprintf(stderr, "gradcheck failed: %s\n", names.c_str());
  return kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PaperNet EEG classifier toolkit"};
  app.require_subcommand(1);

  ConfigFlags train_flags, eval_flags, ablate_flags, pre_flags, att_flags;
  std::string eval_weights, att_weights, bench_weights, eval_split = "test", att_split = "test";
  std::size_t bench_samples = 1000;
  std::uint64_t bench_seed = 0;
  GradcheckSuiteOptions gc;
  bool gc_list = false;

  auto* train_cmd = app.add_subcommand("train", "Preprocess, split, train and evaluate once on test");
  train_flags.attach(*train_cmd, true);

  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate saved weights on a split");
  eval_flags.attach(*eval_cmd, false);
  eval_cmd->add_option("--weights", eval_weights, "Weight file")->required();
  eval_cmd->add_option("--split", eval_split, "train | val | test | all");

  auto* ablate_cmd = app.add_subcommand("ablate", "Train all four variants on one split");
  ablate_flags.attach(*ablate_cmd, true);

  auto* bench_cmd = app.add_subcommand("bench", "Single-sample inference latency");
  bench_cmd->add_option("--weights", bench_weights, "Weight file")->required();
  bench_cmd->add_option("--n-samples", bench_samples, "Timed iterations");
  bench_cmd->add_option("--seed", bench_seed, "Seed for the synthetic input");

  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient suite (64-bit)");
  gc_cmd->add_option("--seed", gc.seed, "Seed for the test points");
  gc_cmd->add_option("--eps", gc.eps, "Finite-difference step");
  gc_cmd->add_option("--model-coords", gc.model_coords_per_tensor,
                     "Coordinates sampled per tensor in the full-model checks");
  gc_cmd->add_flag("--list", gc_list, "List check names and exit");
  gc_cmd->add_option("--inject-fault", gc.inject_fault, "Corrupt one check (harness self-test)")
      ->group("");

  auto* att_cmd = app.add_subcommand("export-attention", "Write per-sample attention vectors");
  att_flags.attach(*att_cmd, false);
  att_cmd->add_option("--weights", att_weights, "Weight file")->required();
  att_cmd->add_option("--split", att_split, "train | val | test | all");

  auto* pre_cmd = app.add_subcommand("preprocess", "Write the band-passed dataset");
  pre_flags.attach(*pre_cmd, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*train_cmd) {
      run_training(train_flags.resolve(), &std::cout);
    } else if (*eval_cmd) {
      run_evaluation(eval_flags.resolve(), eval_weights, parse_split(eval_split), &std::cout);
    } else if (*ablate_cmd) {
      for (const auto& r : run_ablation(ablate_flags.resolve(), &std::cout)) {
        std::cout << std::setw(13) << std::left << to_string(r.variant) << " accuracy "
                  << r.accuracy << " macro_f1 " << r.macro_f1 << " macro_roc_auc "
                  << r.macro_roc_auc << '\n';
      }
    } else if (*bench_cmd) {
      if (bench_samples == 0) throw ConfigError("--n-samples must be at least 1");
      Model<float> model = load_model(bench_weights);
      const BenchResult r = run_bench(model, bench_samples, bench_seed);
      std::printf("samples %zu\nmean_ms %.4f\np50_ms %.4f\np95_ms %.4f\nparameters %zu\n",
                  r.samples, r.mean_ms, r.p50_ms, r.p95_ms, r.parameters);
    } else if (*gc_cmd) {
      if (gc_list) {
        for (const auto& n : gradcheck_suite_names()) std::puts(n.c_str());
        return kOk;
      }
      return print_gradcheck(run_gradcheck_suite(gc));
    } else if (*att_cmd) {
      run_export_attention(att_flags.resolve(), att_weights, parse_split(att_split), &std::cout);
    } else if (*pre_cmd) {
      run_preprocess(pre_flags.resolve(), &std::cout);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const WeightFileError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << '\n';
    return kCheckFailed;
  }
  return kOk;
}
