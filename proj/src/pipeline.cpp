// SPDX-License-Identifier: Apache-2.0
#include "papernet/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "papernet/io.hpp"

namespace papernet {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void say(std::ostream* log, const std::string& line) {
  if (log) *log << line << '\n';
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

template <class J>
void write_json(const J& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "': " + ec.message());
}

LabeledSet labeled(const PreparedData& d, const std::vector<std::size_t>& rows) {
  return {make_batch<float>(d.standardized, rows), gather_labels(d.labels, rows)};
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "dataset") c.dataset = value.get<std::string>();
      else if (key == "outdir") c.outdir = value.get<std::string>();
      else if (key == "sample_rate_hz") c.sample_rate_hz = value.get<double>();
      else if (key == "band_low_hz") c.band_low_hz = value.get<double>();
      else if (key == "band_high_hz") c.band_high_hz = value.get<double>();
      else if (key == "filter_order") c.filter_order = value.get<int>();
      else if (key == "bandpass") c.bandpass = value.get<bool>();
      else if (key == "variant") c.variant = parse_variant(value.get<std::string>());
      else if (key == "num_classes") c.num_classes = value.get<int>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "lr0") c.train.lr0 = value.get<double>();
      else if (key == "batch_size") c.train.batch_size = value.get<std::size_t>();
      else if (key == "max_epochs") c.train.max_epochs = value.get<std::size_t>();
      else if (key == "plateau_patience") c.train.plateau_patience = value.get<std::size_t>();
      else if (key == "plateau_factor") c.train.plateau_factor = value.get<double>();
      else if (key == "min_lr") c.train.min_lr = value.get<double>();
      else if (key == "early_stop_patience") c.train.early_stop_patience = value.get<std::size_t>();
      else if (key == "l2") c.train.l2 = value.get<double>();
      else if (key == "dropout") c.train.dropout = value.get<double>();
      else if (key == "class_weighting") c.train.class_weighting = value.get<bool>();
      else if (key == "early_stopping") c.train.early_stopping = value.get<bool>();
      else if (key == "min_delta") c.train.min_delta = value.get<double>();
      else if (key == "record_timing") c.train.record_timing = value.get<bool>();
      else throw ConfigError("unknown config key '" + key + "'");
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    } catch (const std::invalid_argument& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }
  c.train.seed = c.seed;
  return c;
}

RunConfig RunConfig::from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

json RunConfig::to_json() const {
  ordered_json j;
  j["dataset"] = dataset.string();
  j["outdir"] = outdir.string();
  j["sample_rate_hz"] = sample_rate_hz;
  j["band_low_hz"] = band_low_hz;
  j["band_high_hz"] = band_high_hz;
  j["filter_order"] = filter_order;
  j["bandpass"] = bandpass;
  j["variant"] = std::string(to_string(variant));
  j["num_classes"] = num_classes;
  j["seed"] = seed;
  j["lr0"] = train.lr0;
  j["batch_size"] = train.batch_size;
  j["max_epochs"] = train.max_epochs;
  j["plateau_patience"] = train.plateau_patience;
  j["plateau_factor"] = train.plateau_factor;
  j["min_lr"] = train.min_lr;
  j["early_stop_patience"] = train.early_stop_patience;
  j["l2"] = train.l2;
  j["dropout"] = train.dropout;
  j["class_weighting"] = train.class_weighting;
  j["early_stopping"] = train.early_stopping;
  j["min_delta"] = train.min_delta;
  j["record_timing"] = train.record_timing;
  return j;
}

void RunConfig::validate(bool need_dataset) const {
  try {
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (outdir.empty()) throw ConfigError("outdir must not be empty");
  if (bandpass) {
    if (filter_order < 1) throw ConfigError("filter_order must be >= 1");
    if (!(sample_rate_hz > 0.0)) throw ConfigError("sample_rate_hz must be positive");
    if (!(band_low_hz > 0.0 && band_low_hz < band_high_hz && band_high_hz < sample_rate_hz / 2.0)) {
      throw ConfigError("band edges must satisfy 0 < low < high < sample_rate/2");
    }
  }
  if (need_dataset) {
    if (dataset.empty()) throw ConfigError("no dataset path given");
    if (!fs::is_regular_file(dataset)) {
      throw ConfigError("dataset file '" + dataset.string() + "' does not exist");
    }
  }
}

const LabeledSet& HeldOutSet::read() {
  if (reads_ > 0) throw std::logic_error("held-out test split was already read once in this run");
  ++reads_;
  return data_;
}

PreparedData prepare_data(const RunConfig& config, std::ostream* log) {
  RawDataset raw = load_csv(config.dataset, config.num_classes);
  say(log, "loaded " + std::to_string(raw.rows()) + " rows from " + config.dataset.string());
  if (config.bandpass) {
    try {
      raw = preprocess_recording(raw, config.sample_rate_hz, config.band_low_hz,
                                 config.band_high_hz, config.filter_order);
    } catch (const std::invalid_argument& e) {
      throw DataError(std::string("band-pass: ") + e.what());
    }
  }
  PreparedData d;
  try {
    d.split = stratified_split(raw.labels, config.seed);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("split: ") + e.what());
  }
  say(log, "split train/val/test = " + std::to_string(d.split.train.size()) + "/" +
               std::to_string(d.split.val.size()) + "/" + std::to_string(d.split.test.size()) +
               ", fingerprint " + hex64(d.split.fingerprint()));
  d.standardizer = dsp::fit_standardizer(raw.features, kNumChannels, d.split.train);
  for (std::size_t c : d.standardizer.floored_channels) {
    say(log, "warning: channel " + raw.channel_names.at(c) +
                 " has near-zero variance on the training split; std floored");
  }
  d.standardized = raw.features;
  dsp::apply_standardizer(d.standardizer, d.standardized);
  d.labels = raw.labels;
  d.train = labeled(d, d.split.train);
  d.val = labeled(d, d.split.val);
  d.test = HeldOutSet(labeled(d, d.split.test));
  return d;
}

json report_to_json(const metrics::EvalReport& r) {
  ordered_json j;
  j["variant"] = r.variant;
  j["samples"] = r.samples;
  j["accuracy"] = r.prf.accuracy;
  j["macro_precision"] = r.prf.macro_precision;
  j["macro_recall"] = r.prf.macro_recall;
  j["macro_f1"] = r.prf.macro_f1;
  j["macro_roc_auc"] = std::isnan(r.roc.macro_auc) ? json(nullptr) : json(r.roc.macro_auc);
  j["confusion_matrix"] = r.cm.counts;
  j["per_class"] = ordered_json::array();
  for (std::size_t k = 0; k < r.prf.per_class.size(); ++k) {
    const auto& s = r.prf.per_class[k];
    const auto& curve = r.roc.curves.at(k);
    j["per_class"].push_back({{"class", k},
                              {"tp", s.tp},
                              {"fp", s.fp},
                              {"fn", s.fn},
                              {"tn", s.tn},
                              {"precision", s.precision},
                              {"recall", s.recall},
                              {"f1", s.f1},
                              {"roc_auc", curve.defined ? json(curve.auc) : json(nullptr)}});
  }
  j["roc_warnings"] = r.roc.warnings;
  j["mcnemar_vs_random"] = {{"b", r.vs_random.b},
                            {"c", r.vs_random.c},
                            {"chi2", r.vs_random.chi2},
                            {"significant", r.vs_random.significant}};
  return j;
}

namespace {

metrics::EvalReport evaluate_model(Model<float>& model, const LabeledSet& set, std::uint64_t seed) {
  const auto scores = predict_proba(model, set.inputs);
  auto report = metrics::evaluate(scores, set.labels, static_cast<int>(model.num_classes()), seed);
  report.variant = std::string(to_string(model.variant()));
  return report;
}

}  // namespace

RunSummary run_training(const RunConfig& config, std::ostream* log) {
  config.validate();
  ensure_dir(config.outdir);
  PreparedData data = prepare_data(config, log);
  if (data.val.size() == 0) throw DataError("validation split is empty");

  Model<float> model(config.variant, config.num_classes, kNumChannels, config.seed);
  say(log, "model " + std::string(to_string(config.variant)) + ": " +
               std::to_string(model.count_parameters()) + " trainable parameters");
  TrainConfig tc = config.train;
  tc.seed = config.seed;
  auto on_epoch = [log](const EpochRecord& e) {
    if (!log) return;
    std::ostringstream s;
    s << "epoch " << e.epoch << " loss " << std::setprecision(5) << e.train_loss << " acc "
      << e.train_acc << " val_acc " << e.val_acc << " val_f1 " << e.val_macro_f1 << " lr " << e.lr;
    say(log, s.str());
  };
  TrainResult result = train(std::move(model), data.train, data.val, tc, on_epoch);

  save_weights(result.best, config.outdir / "weights_best");
  save_weights(result.final, config.outdir / "weights_final");
  result.history.write_csv(config.outdir / "history.csv");

  // Model selection is finished; the held-out split is consumed exactly once.
  const LabeledSet& test = data.test.read();
  RunSummary summary;
  summary.test_report = evaluate_model(result.best, test, config.seed);
  summary.history = result.history;
  summary.split_fingerprint = data.split.fingerprint();
  summary.parameters = result.best.count_parameters();

  ordered_json report;
  report["variant"] = std::string(to_string(config.variant));
  report["seed"] = config.seed;
  report["split_fingerprint"] = hex64(summary.split_fingerprint);
  report["split_sizes"] = {{"train", data.split.train.size()},
                           {"val", data.split.val.size()},
                           {"test", data.split.test.size()}};
  report["trainable_parameters"] = summary.parameters;
  report["nontrainable_parameters"] = result.best.count_nontrainable();
  report["epochs_run"] = result.history.epochs.size();
  report["best_epoch"] = result.history.best_epoch;
  report["stopped_early"] = result.history.stopped_early;
  report["test_split_reads"] = data.test.reads();
  report["standardizer_floored_channels"] = data.standardizer.floored_channels;
  report["test"] = report_to_json(summary.test_report);
  write_json(report, config.outdir / "report.json");
  metrics::write_roc_csv(summary.test_report.roc, config.outdir / "roc.csv");
  if (result.best.has_attention() && test.size() > 0) {
    write_attention_csv(export_attention(result.best, test.inputs), config.outdir / "attention.csv");
  }
  write_json(config.to_json(), config.outdir / "config_resolved.json");
  say(log, "test accuracy " + std::to_string(summary.test_report.prf.accuracy) + " macro-F1 " +
               std::to_string(summary.test_report.prf.macro_f1));
  return summary;
}

std::vector<AblationRow> run_ablation(const RunConfig& config, std::ostream* log) {
  config.validate();
  ensure_dir(config.outdir);
  std::vector<AblationRow> rows;
  std::uint64_t fingerprint = 0;
  for (Variant v : kAllVariants) {
    RunConfig c = config;
    c.variant = v;
    c.outdir = config.outdir / std::string(to_string(v));
    say(log, "== ablation variant " + std::string(to_string(v)));
    const RunSummary s = run_training(c, log);
    if (rows.empty()) fingerprint = s.split_fingerprint;
    if (s.split_fingerprint != fingerprint) throw std::logic_error("ablation runs saw different splits");
    rows.push_back({v, s.test_report.prf.accuracy, s.test_report.prf.macro_f1, s.test_report.roc.macro_auc});
  }
  say(log, "ablation split fingerprint " + hex64(fingerprint));

  std::ofstream csv(config.outdir / "ablation.csv");
  if (!csv) throw std::runtime_error("cannot write ablation.csv");
  csv << std::setprecision(10) << "variant,accuracy,macro_f1,macro_roc_auc\n";
  ordered_json j;
  j["split_fingerprint"] = hex64(fingerprint);
  j["seed"] = config.seed;
  j["rows"] = ordered_json::array();
  for (const auto& r : rows) {
    csv << to_string(r.variant) << ',' << r.accuracy << ',' << r.macro_f1 << ',' << r.macro_roc_auc << '\n';
    j["rows"].push_back({{"variant", std::string(to_string(r.variant))},
                         {"accuracy", r.accuracy},
                         {"macro_f1", r.macro_f1},
                         {"macro_roc_auc", std::isnan(r.macro_roc_auc) ? json(nullptr) : json(r.macro_roc_auc)}});
  }
  write_json(j, config.outdir / "ablation.json");
  return rows;
}

SplitChoice parse_split(const std::string& name) {
  if (name == "train") return SplitChoice::train;
  if (name == "val") return SplitChoice::val;
  if (name == "test") return SplitChoice::test;
  if (name == "all") return SplitChoice::all;
  throw ConfigError("unknown split '" + name + "' (expected train, val, test or all)");
}

namespace {

const char* split_name(SplitChoice s) {
  switch (s) {
    case SplitChoice::train: return "train";
    case SplitChoice::val: return "val";
    case SplitChoice::test: return "test";
    case SplitChoice::all: return "all";
  }
  return "?";
}

LabeledSet select_split(PreparedData& d, SplitChoice s) {
  switch (s) {
    case SplitChoice::train: return d.train;
    case SplitChoice::val: return d.val;
    case SplitChoice::test: return d.test.read();
    case SplitChoice::all: {
      std::vector<std::size_t> rows(d.labels.size());
      for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
      return labeled(d, rows);
    }
  }
  return {};
}

Model<float> load_for(const RunConfig& config, const fs::path& weights) {
  Model<float> model = load_model(weights, kNumChannels);
  if (static_cast<int>(model.num_classes()) != config.num_classes) {
    throw ConfigError("weights have " + std::to_string(model.num_classes()) +
                      " classes but the config says " + std::to_string(config.num_classes));
  }
  return model;
}

}  // namespace

metrics::EvalReport run_evaluation(const RunConfig& config, const fs::path& weights,
                                   SplitChoice split, std::ostream* log) {
  config.validate();
  Model<float> model = load_for(config, weights);
  ensure_dir(config.outdir);
  PreparedData data = prepare_data(config, log);
  const LabeledSet set = select_split(data, split);
  if (set.size() == 0) throw DataError(std::string("split '") + split_name(split) + "' is empty");
  const auto report = evaluate_model(model, set, config.seed);
  ordered_json j;
  j["weights"] = weights.string();
  j["split"] = split_name(split);
  j["split_fingerprint"] = hex64(data.split.fingerprint());
  j["report"] = report_to_json(report);
  write_json(j, config.outdir / (std::string("eval_") + split_name(split) + ".json"));
  metrics::write_roc_csv(report.roc, config.outdir / (std::string("roc_") + split_name(split) + ".csv"));
  say(log, std::string(split_name(split)) + " accuracy " + std::to_string(report.prf.accuracy) +
               " macro-F1 " + std::to_string(report.prf.macro_f1));
  return report;
}

fs::path run_preprocess(const RunConfig& config, std::ostream* log) {
  config.validate();
  ensure_dir(config.outdir);
  RawDataset raw = load_csv(config.dataset, config.num_classes);
  try {
    raw = preprocess_recording(raw, config.sample_rate_hz, config.band_low_hz, config.band_high_hz,
                               config.filter_order);
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("band-pass: ") + e.what());
  }
  const fs::path out = config.outdir / "preprocessed.csv";
  write_csv(raw, out);
  say(log, "wrote " + out.string());
  return out;
}

fs::path run_export_attention(const RunConfig& config, const fs::path& weights, SplitChoice split,
                              std::ostream* log) {
  config.validate();
  Model<float> model = load_for(config, weights);
  if (!model.has_attention()) {
    throw ConfigError("variant " + std::string(to_string(model.variant())) + " has no attention block");
  }
  ensure_dir(config.outdir);
  PreparedData data = prepare_data(config, log);
  const LabeledSet set = select_split(data, split);
  if (set.size() == 0) throw DataError(std::string("split '") + split_name(split) + "' is empty");
  const fs::path out = config.outdir / "attention.csv";
  write_attention_csv(export_attention(model, set.inputs), out);
  say(log, "wrote " + out.string());
  return out;
}

BenchResult run_bench(Model<float>& model, std::size_t n_samples, std::uint64_t seed) {
  if (n_samples == 0) throw ConfigError("bench needs at least one sample");
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f);
  Tensor<float> x({1, model.input_length(), 1});
  for (float& v : x.data()) v = n(rng);

  const std::size_t warmup = std::min<std::size_t>(10, n_samples);
  for (std::size_t i = 0; i < warmup; ++i) model.forward(x, Mode::infer);
  std::vector<double> ms(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    model.forward(x, Mode::infer);
    ms[i] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  }
  BenchResult r;
  r.samples = n_samples;
  r.parameters = model.count_parameters();
  for (double v : ms) r.mean_ms += v;
  r.mean_ms /= static_cast<double>(n_samples);
  std::sort(ms.begin(), ms.end());
  // Nearest-rank percentiles.
  auto pct = [&](double p) {
    const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(n_samples)));
    return ms[std::clamp<std::size_t>(rank, 1, n_samples) - 1];
  };
  r.p50_ms = pct(0.50);
  r.p95_ms = pct(0.95);
  return r;
}

}  // namespace papernet
