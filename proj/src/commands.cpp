#include "sia/commands.hpp"

#include "sia/diagnosis.hpp"
#include "sia/io.hpp"
#include "sia/metrics.hpp"
#include "sia/models.hpp"
#include "sia/robustify.hpp"
#include "sia/runconfig.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace sia {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// ConfigReader

ConfigReader::ConfigReader(const json& object, std::string path)
    : object_(object), path_(std::move(path)) {
  if (!object_.is_object()) throw SchemaError(path_, "expected an object");
}

ConfigReader ConfigReader::child(const std::string& key) {
  if (!object_.contains(key)) throw SchemaError(child_path(key), "missing required section");
  consumed_.insert(key);
  return ConfigReader(object_.at(key), child_path(key));
}

std::optional<ConfigReader> ConfigReader::child_if_present(const std::string& key) {
  if (!object_.contains(key)) return std::nullopt;
  consumed_.insert(key);
  return ConfigReader(object_.at(key), child_path(key));
}

std::map<std::string, double> ConfigReader::double_map(const std::string& key) {
  std::map<std::string, double> out;
  if (!object_.contains(key)) return out;
  consumed_.insert(key);
  const json& value = object_.at(key);
  if (!value.is_object()) throw SchemaError(child_path(key), "expected an object of numbers");
  for (const auto& [name, v] : value.items()) {
    if (!v.is_number()) throw SchemaError(child_path(key) + "." + name, "expected a number");
    out[name] = v.get<double>();
  }
  return out;
}

void ConfigReader::finish() const {
  for (const auto& [key, _] : object_.items())
    if (!consumed_.count(key)) throw SchemaError(child_path(key), "unknown field");
}

SliceSpec parse_slice(ConfigReader& reader) {
  SliceSpec slice;
  slice.split = reader.optional<std::string>("split", "test");
  if (slice.split != "train" && slice.split != "test" && slice.split != "all")
    throw SchemaError(reader.child_path("split"), "must be train, test or all");
  slice.begin = reader.optional<long>("begin", 0);
  slice.count = reader.optional<long>("count", -1);
  reader.finish();
  return slice;
}

std::vector<long> resolve_slice(const SliceSpec& slice, const ToyDataset& dataset) {
  long base = 0, extent = dataset.size();
  if (slice.split == "train") {
    extent = dataset.train_count();
  } else if (slice.split == "test") {
    base = dataset.train_count();
    extent = dataset.size() - dataset.train_count();
  }
  if (slice.begin < 0 || slice.begin > extent)
    throw std::invalid_argument("slice begin out of range");
  const long count = slice.count < 0 ? extent - slice.begin : slice.count;
  if (slice.begin + count > extent) throw std::invalid_argument("slice extends past the split");
  if (count <= 0) throw std::invalid_argument("slice is empty");
  std::vector<long> indices(count);
  for (long i = 0; i < count; ++i) indices[i] = base + slice.begin + i;
  return indices;
}

AttackConfig parse_attack_config(ConfigReader& reader, std::uint64_t seed) {
  AttackConfig config;
  config.mode = attack_mode_from_name(reader.optional<std::string>("mode", "full"));
  config.eta_a = reader.optional<double>("eta_a", config.eta_a);
  config.eta_x = reader.optional<double>("eta_x", config.eta_x);
  config.eps_a = reader.optional<double>("eps_a", config.eps_a);
  config.eps_x = reader.optional<double>("eps_x", config.eps_x);
  config.iterations = reader.optional<int>("iterations", config.iterations);
  config.partial_iters = reader.optional<int>("partial_iters", config.partial_iters);
  config.detector_success_threshold =
      reader.optional<double>("detector_success_threshold", config.detector_success_threshold);
  config.frozen_attr_caps = reader.double_map("frozen_attr_caps");
  config.seed = seed;
  config.validate();
  return config;
}

// ---------------------------------------------------------------------------
// Shared command plumbing

namespace {

json load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("cannot open config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("invalid JSON: ") + e.what());
  }
}

void write_json_artifact(const json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << j.dump(2) << '\n';
}

// The resolved config dropped into the run directory; rerunning it into a
// fresh directory must reproduce report.json and histogram.csv byte for
// byte.
void write_resolved_config(const json& config, const std::string& command, const RunContext& ctx,
                           std::uint64_t seed) {
  json resolved = config;
  resolved["command"] = command;
  resolved["seed"] = seed;
  resolved["plots"] = ctx.plots;
  resolved.erase("out");
  write_json_artifact(resolved, ctx.out_dir / "config.json");
}

std::uint64_t resolve_seed(ConfigReader& reader) { return reader.require<std::uint64_t>("seed"); }

// Consumes the bookkeeping keys every config may carry.
void consume_common(ConfigReader& reader, const std::string& command) {
  const std::string cmd = reader.optional<std::string>("command", command);
  if (cmd != command)
    throw SchemaError(reader.child_path("command"), "config was written for '" + cmd + "'");
  reader.optional<bool>("plots", false);
  reader.optional<std::string>("out", "");
}

bool config_plots(const json& config, const RunContext& ctx) {
  if (ctx.plots) return true;
  return config.value("plots", false);
}

json metric_json(const MetricResult& m) {
  json params = json::object();
  for (const auto& [k, v] : m.params) params[k] = v;
  return json{{"name", m.name}, {"value", m.value}, {"count", m.count}, {"params", params}};
}

std::string padded_index(long index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05ld", index);
  return buf;
}

json classification_json(const ClassificationMetrics& m) {
  return json{{"precision", m.precision},
              {"recall", m.recall},
              {"accuracy_percent", m.accuracy_percent},
              {"f1", m.f1},
              {"precision_degenerate", m.precision_degenerate},
              {"recall_degenerate", m.recall_degenerate},
              {"f1_degenerate", m.f1_degenerate}};
}

struct LoadedTarget {
  std::unique_ptr<TargetModel> model;
  ToyDataset dataset;
  ToyGenerator generator;
};

LoadedTarget load_target(const std::string& dataset_dir, const std::string& checkpoint) {
  ToyDataset dataset = load_dataset(dataset_dir);
  ToyGenerator generator(dataset.basis);
  auto model = load_checkpoint(checkpoint);
  if (model->input_shape() != dataset.basis.shape())
    throw std::invalid_argument("checkpoint shape does not match dataset");
  return {std::move(model), std::move(dataset), std::move(generator)};
}

GroundTruth truth_of(const TargetModel& model, const ToySample& sample) {
  if (model.kind() == ModelKind::kBinaryClassifier) return sample.label;
  return sample.keypoints;
}

}  // namespace

// ---------------------------------------------------------------------------
// gen-data

void cmd_gen_data(const json& config, const RunContext& ctx) {
  ConfigReader reader(config, "");
  consume_common(reader, "gen-data");
  const std::uint64_t seed = resolve_seed(reader);

  ConfigReader ds = reader.child("dataset");
  DatasetParams params;
  params.seed = seed;
  params.attribute_count = ds.require<int>("attribute_count");
  const long train_count = ds.require<long>("train_count");
  const long test_count = ds.optional<long>("test_count", 0);
  params.sample_count = train_count + test_count;
  params.train_count = train_count;
  params.height = ds.optional<int>("height", 32);
  params.width = ds.optional<int>("width", 32);
  params.channels = ds.optional<int>("channels", 3);
  params.label_rule.attr = ds.optional<int>("label_attr", 0);
  params.label_rule.threshold = ds.optional<double>("label_threshold", 0.5);
  params.keypoint_count = ds.optional<int>("keypoint_count", 3);
  params.pattern_amplitude = ds.optional<double>("pattern_amplitude", 0.3);
  params.marker_amplitude = ds.optional<double>("marker_amplitude", 0.6);
  const bool write_images = ds.optional<bool>("write_images", true);
  ds.finish();
  reader.finish();

  const ToyDataset dataset = generate_dataset(params);

  fs::create_directories(ctx.out_dir);
  write_resolved_config(config, "gen-data", ctx, seed);
  save_dataset(dataset, ctx.out_dir, write_images);

  long positives = 0;
  for (const auto& s : dataset.samples) positives += s.label;
  json report;
  report["schema_version"] = 1;
  report["command"] = "gen-data";
  report["sample_count"] = dataset.size();
  report["train_count"] = dataset.train_count();
  report["test_count"] = dataset.test_count();
  report["positive_fraction"] = static_cast<double>(positives) / dataset.size();
  report["warnings"] = dataset.manifest.warnings;
  write_json_artifact(report, ctx.out_dir / "report.json");
}

// ---------------------------------------------------------------------------
// train-target

void cmd_train_target(const json& config, const RunContext& ctx) {
  ConfigReader reader(config, "");
  consume_common(reader, "train-target");
  const std::uint64_t seed = resolve_seed(reader);
  const std::string dataset_dir = reader.require<std::string>("dataset_dir");

  ConfigReader target = reader.child("target");
  const std::string type = target.require<std::string>("type");
  if (type != "classifier" && type != "detector")
    throw SchemaError(target.child_path("type"), "must be classifier or detector");
  const int epochs = target.optional<int>("epochs", type == "classifier" ? 150 : 220);
  const double lr = target.optional<double>("lr", type == "classifier" ? 0.5 : 1.5);
  const int hidden = target.optional<int>("hidden", 16);
  const double sigma = target.optional<double>("sigma", 1.5);
  const int kernel_size = target.optional<int>("kernel_size", 5);
  target.finish();
  reader.finish();

  const ToyDataset dataset = load_dataset(dataset_dir);

  json report;
  report["schema_version"] = 1;
  report["command"] = "train-target";
  report["target_type"] = type;
  report["epochs"] = epochs;

  std::unique_ptr<TargetModel> model;
  if (type == "classifier") {
    model = train_classifier(dataset, {epochs, lr, hidden, seed});
    const auto evaluate = [&](const std::vector<long>& indices) {
      if (indices.empty()) return -1.0;
      long correct = 0;
      for (long idx : indices)
        correct += model->predict(dataset.rendered(idx)).label == dataset.samples[idx].label;
      return static_cast<double>(correct) / static_cast<double>(indices.size());
    };
    report["train_accuracy"] = evaluate(dataset.train_indices());
    report["test_accuracy"] = evaluate(dataset.test_indices());
  } else {
    model = train_keypoint_detector(dataset, {epochs, lr, sigma, kernel_size, seed});
    const auto evaluate = [&](const std::vector<long>& indices) {
      if (indices.empty()) return -1.0;
      double total = 0.0;
      for (long idx : indices) {
        const Prediction pred = model->predict(dataset.rendered(idx));
        total += keypoint_error(pred.keypoints, dataset.samples[idx].keypoints, 1.0);
      }
      return total / static_cast<double>(indices.size());
    };
    report["train_keypoint_error"] = evaluate(dataset.train_indices());
    report["test_keypoint_error"] = evaluate(dataset.test_indices());
  }

  fs::create_directories(ctx.out_dir);
  write_resolved_config(config, "train-target", ctx, seed);
  save_checkpoint(*model, ctx.out_dir / "model.ckpt");
  write_json_artifact(report, ctx.out_dir / "report.json");
}

// ---------------------------------------------------------------------------
// attack

void cmd_attack(const json& config, const RunContext& ctx) {
  ConfigReader reader(config, "");
  consume_common(reader, "attack");
  const std::uint64_t seed = resolve_seed(reader);
  const std::string dataset_dir = reader.require<std::string>("dataset_dir");
  const std::string checkpoint = reader.require<std::string>("checkpoint");

  ConfigReader attack_reader = reader.child("attack");
  const AttackKind kind =
      attack_kind_from_name(attack_reader.optional<std::string>("kind", "sia"));
  const AttackConfig attack = parse_attack_config(attack_reader, seed);

  SliceSpec slice;
  if (auto slice_reader = reader.child_if_present("slice")) slice = parse_slice(*slice_reader);
  const bool save_adversaries = reader.optional<bool>("save_adversaries", true);
  const bool save_traces = reader.optional<bool>("save_traces", true);
  const bool save_image_deltas = reader.optional<bool>("save_image_deltas", false);
  reader.finish();

  LoadedTarget target = load_target(dataset_dir, checkpoint);
  const std::vector<long> indices = resolve_slice(slice, target.dataset);

  AttackConfig batch_config = attack;
  batch_config.record_images = save_image_deltas;
  const auto results =
      run_attack_batch(*target.model, &target.generator, target.dataset, indices, batch_config,
                       kind, ctx.workers);

  fs::create_directories(ctx.out_dir);
  write_resolved_config(config, "attack", ctx, seed);
  if (save_traces) fs::create_directories(ctx.out_dir / "traces");
  if (save_adversaries) fs::create_directories(ctx.out_dir / "adversaries");

  std::vector<ImageTensor> adversaries;
  std::vector<GroundTruth> truths;
  double total_psnr = 0.0, total_ssim = 0.0;
  json successes = json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    const long idx = indices[i];
    const AttackResult& r = results[i];
    adversaries.push_back(r.example.adversary);
    truths.push_back(truth_of(*target.model, target.dataset.samples[idx]));
    const ImageTensor original = target.dataset.rendered(idx);
    total_psnr += psnr(original, r.example.adversary);
    total_ssim += ssim(original, r.example.adversary);
    successes.push_back(r.example.success ? 1 : 0);
    if (save_traces) {
      write_trace_json(r.trace, target.dataset.manifest.attribute_names, idx,
                       ctx.out_dir / "traces" / (padded_index(idx) + ".json"));
      if (save_image_deltas && !r.trace.images.empty())
        write_trace_deltas(r.trace, target.dataset.basis.shape(),
                           ctx.out_dir / "traces" / (padded_index(idx) + ".siat"));
    }
    if (save_adversaries)
      write_png(r.example.adversary, ctx.out_dir / "adversaries" / (padded_index(idx) + ".png"));
  }

  const double asr = attack_success_rate(*target.model, adversaries, truths,
                                         attack.detector_success_threshold);
  const long n = static_cast<long>(results.size());

  json report;
  report["schema_version"] = 1;
  report["command"] = "attack";
  report["attack_kind"] = attack_kind_name(kind);
  report["mode"] = attack_mode_name(attack.mode);
  report["metrics"] = json::array({
      metric_json({"attack_success_rate", asr, n, {}}),
      metric_json({"mean_psnr", total_psnr / n, n, {{"max_value", 1.0}, {"cap", 100.0}}}),
      metric_json({"mean_ssim", total_ssim / n, n,
                   {{"window", 8.0}, {"c1", 0.0001}, {"c2", 0.0009}}}),
  });
  report["successes"] = successes;
  write_json_artifact(report, ctx.out_dir / "report.json");
}

// ---------------------------------------------------------------------------
// diagnose

void cmd_diagnose(const json& config, const RunContext& ctx) {
  ConfigReader reader(config, "");
  consume_common(reader, "diagnose");
  const std::uint64_t seed = resolve_seed(reader);
  const std::string dataset_dir = reader.require<std::string>("dataset_dir");
  const std::string checkpoint = reader.require<std::string>("checkpoint");

  ConfigReader attack_reader = reader.child("attack");
  const AttackConfig attack = parse_attack_config(attack_reader, seed);

  SliceSpec slice;
  if (auto slice_reader = reader.child_if_present("slice")) slice = parse_slice(*slice_reader);

  int top_count = 3;
  bool single_attribute = false;
  if (auto diag = reader.child_if_present("diagnosis")) {
    top_count = diag->optional<int>("top_k", 3);
    single_attribute = diag->optional<bool>("single_attribute", false);
    diag->finish();
  }
  const bool save_traces = reader.optional<bool>("save_traces", true);
  const bool plots = config_plots(config, ctx);
  reader.finish();

  LoadedTarget target = load_target(dataset_dir, checkpoint);
  const std::vector<long> indices = resolve_slice(slice, target.dataset);
  top_count = std::min<int>(top_count, target.generator.attribute_count());

  const auto results = run_attack_batch(*target.model, &target.generator, target.dataset, indices,
                                        attack, AttackKind::kSia, ctx.workers);
  std::vector<AttackTrace> traces;
  traces.reserve(results.size());
  for (const auto& r : results) traces.push_back(r.trace);

  const SensitivityReport report = sensitivity(traces, target.dataset.manifest.attribute_names);

  fs::create_directories(ctx.out_dir);
  write_resolved_config(config, "diagnose", ctx, seed);
  if (save_traces) {
    fs::create_directories(ctx.out_dir / "traces");
    for (std::size_t i = 0; i < results.size(); ++i)
      write_trace_json(results[i].trace, target.dataset.manifest.attribute_names, indices[i],
                       ctx.out_dir / "traces" / (padded_index(indices[i]) + ".json"));
  }

  std::optional<fs::path> chart;
  if (plots) {
    fs::create_directories(ctx.out_dir / "plots");
    chart = ctx.out_dir / "plots" / "histogram.png";
  }
  export_histogram(report, ctx.out_dir / "histogram.csv", chart);

  json out;
  out["schema_version"] = 1;
  out["command"] = "diagnose";
  out["sample_count"] = report.sample_count;
  out["attribute_names"] = report.attribute_names;
  out["sensitivity"] = std::vector<double>(report.s.data(), report.s.data() + report.s.size());
  out["normalized"] = std::vector<double>(report.normalized.data(),
                                          report.normalized.data() + report.normalized.size());
  out["normalization_degenerate"] = report.normalization_degenerate;
  out["sdar"] = report.sdar;
  out["top_attributes"] = top_k(report, top_count);

  if (single_attribute) {
    const SensitivityReport single = single_attribute_sensitivity(
        *target.model, target.generator, target.dataset, indices, attack, ctx.workers);
    out["single_attribute"] = {
        {"sensitivity", std::vector<double>(single.s.data(), single.s.data() + single.s.size())},
        {"sdar", single.sdar},
        {"top_attributes", top_k(single, top_count)}};
  }
  write_json_artifact(out, ctx.out_dir / "report.json");
}

// ---------------------------------------------------------------------------
// advtrain

void cmd_advtrain(const json& config, const RunContext& ctx) {
  ConfigReader reader(config, "");
  consume_common(reader, "advtrain");
  const std::uint64_t seed = resolve_seed(reader);
  const std::string dataset_dir = reader.require<std::string>("dataset_dir");
  const std::string checkpoint = reader.require<std::string>("checkpoint");

  ConfigReader gen_reader = reader.child("generation");
  SliceSpec gen_slice;
  if (auto slice_reader = gen_reader.child_if_present("slice")) {
    gen_slice = parse_slice(*slice_reader);
  } else {
    gen_slice.split = "train";
  }
  const AttackConfig gen_attack = parse_attack_config(gen_reader, seed);

  ConfigReader ft = reader.child("finetune");
  const int ft_epochs = ft.optional<int>("epochs", 1);
  const double ft_lr = ft.require<double>("lr");
  const int ft_batch = ft.optional<int>("batch_size", 32);
  ft.finish();

  ConfigReader eval_reader = reader.child("evaluation");
  SliceSpec eval_slice;
  if (auto slice_reader = eval_reader.child_if_present("slice"))
    eval_slice = parse_slice(*slice_reader);
  std::vector<EvalAttack> eval_attacks;
  {
    if (!eval_reader.raw().contains("attacks"))
      throw SchemaError("evaluation.attacks", "missing required field");
    const json& attacks_json = eval_reader.raw().at("attacks");
    eval_reader.optional<json>("attacks", json::array());
    if (!attacks_json.is_array())
      throw SchemaError("evaluation.attacks", "expected an array");
    for (std::size_t i = 0; i < attacks_json.size(); ++i) {
      ConfigReader one(attacks_json[i], "evaluation.attacks[" + std::to_string(i) + "]");
      EvalAttack attack;
      attack.name = one.require<std::string>("name");
      const std::string kind = one.require<std::string>("kind");
      if (kind == "clean") attack.kind = EvalAttack::Kind::kClean;
      else if (kind == "fgsm") attack.kind = EvalAttack::Kind::kFgsm;
      else if (kind == "pgd") attack.kind = EvalAttack::Kind::kPgd;
      else if (kind == "sia") attack.kind = EvalAttack::Kind::kSia;
      else throw SchemaError(one.child_path("kind"), "must be clean, fgsm, pgd or sia");
      attack.config = parse_attack_config(one, seed);
      eval_attacks.push_back(std::move(attack));
    }
  }
  eval_reader.finish();
  const bool compute_sdar = reader.optional<bool>("sdar", true);
  reader.finish();

  LoadedTarget target = load_target(dataset_dir, checkpoint);
  const std::vector<long> gen_indices = resolve_slice(gen_slice, target.dataset);
  const std::vector<long> eval_indices = resolve_slice(eval_slice, target.dataset);

  // Generate adversaries from the training slice with their true labels.
  const auto gen_results = run_attack_batch(*target.model, &target.generator, target.dataset,
                                            gen_indices, gen_attack, AttackKind::kSia,
                                            ctx.workers);
  std::vector<ImageTensor> adversaries;
  std::vector<GroundTruth> truths;
  adversaries.reserve(gen_results.size());
  for (std::size_t i = 0; i < gen_results.size(); ++i) {
    adversaries.push_back(gen_results[i].example.adversary);
    truths.push_back(truth_of(*target.model, target.dataset.samples[gen_indices[i]]));
  }

  const auto finetuned =
      adversarial_finetune(*target.model, adversaries, truths, ft_epochs, ft_lr, seed, ft_batch);

  const std::vector<std::pair<std::string, const TargetModel*>> models = {
      {"non_adv", target.model.get()}, {"sia_adv", finetuned.get()}};
  const RobustnessMatrix matrix = robustness_matrix(models, eval_attacks, target.dataset,
                                                    eval_indices, &target.generator, ctx.workers);

  fs::create_directories(ctx.out_dir);
  write_resolved_config(config, "advtrain", ctx, seed);
  save_checkpoint(*finetuned, ctx.out_dir / "finetuned.ckpt");

  std::vector<std::vector<std::string>> rows;
  for (std::size_t r = 0; r < matrix.row_names.size(); ++r) {
    std::vector<std::string> row{matrix.row_names[r]};
    for (std::size_t c = 0; c < matrix.col_names.size(); ++c)
      row.push_back(format_double(matrix.accuracy_percent(long(r), long(c))));
    rows.push_back(std::move(row));
  }
  std::vector<std::string> header{"attack"};
  header.insert(header.end(), matrix.col_names.begin(), matrix.col_names.end());
  write_csv(ctx.out_dir / "robustness_matrix.csv", header, rows);

  json report;
  report["schema_version"] = 1;
  report["command"] = "advtrain";
  report["adversary_count"] = static_cast<long>(adversaries.size());
  json matrix_json;
  for (std::size_t r = 0; r < matrix.row_names.size(); ++r)
    for (std::size_t c = 0; c < matrix.col_names.size(); ++c)
      matrix_json[matrix.row_names[r]][matrix.col_names[c]] =
          matrix.accuracy_percent(long(r), long(c));
  report["robustness_matrix"] = matrix_json;

  if (compute_sdar) {
    const auto sensitivity_of = [&](const TargetModel& model) {
      const auto results = run_attack_batch(model, &target.generator, target.dataset,
                                            eval_indices, gen_attack, AttackKind::kSia,
                                            ctx.workers);
      std::vector<AttackTrace> traces;
      traces.reserve(results.size());
      for (const auto& r : results) traces.push_back(r.trace);
      return sensitivity(traces, target.dataset.manifest.attribute_names);
    };
    report["sdar"] = {{"non_adv", sensitivity_of(*target.model).sdar},
                      {"sia_adv", sensitivity_of(*finetuned).sdar}};
  }
  write_json_artifact(report, ctx.out_dir / "report.json");
}

// ---------------------------------------------------------------------------
// augment

void cmd_augment(const json& config, const RunContext& ctx) {
  ConfigReader reader(config, "");
  consume_common(reader, "augment");
  const std::uint64_t seed = resolve_seed(reader);
  const std::string dataset_dir = reader.require<std::string>("dataset_dir");

  ConfigReader imbalance = reader.child("imbalance");
  const double positive_fraction = imbalance.require<double>("positive_fraction");
  const long total = imbalance.require<long>("total");
  imbalance.finish();

  ImbalanceExperiment experiment;
  experiment.workers = ctx.workers;
  {
    if (!reader.raw().contains("strategies"))
      throw SchemaError("strategies", "missing required field");
    const json& list = reader.raw().at("strategies");
    reader.optional<json>("strategies", json::array());
    if (!list.is_array() || list.empty())
      throw SchemaError("strategies", "expected a non-empty array");
    for (const auto& name : list)
      experiment.strategies.push_back(strategy_from_name(name.get<std::string>()));
  }

  ConfigReader train = reader.child("train");
  experiment.train.epochs = train.optional<int>("epochs", 150);
  experiment.train.lr = train.optional<double>("lr", 2.0);
  experiment.train.hidden = train.optional<int>("hidden", 16);
  experiment.train.seed = seed;
  train.finish();

  ConfigReader attack_reader = reader.child("augment_attack");
  experiment.augment_attack = parse_attack_config(attack_reader, seed);
  experiment.augmentation_count = reader.optional<long>("augmentation_count", 0);

  if (auto cm = reader.child_if_present("cutmix")) {
    experiment.cutmix_probability = cm->optional<double>("probability", 0.5);
    experiment.cutmix_alpha = cm->optional<double>("alpha", 1.0);
    cm->finish();
  }

  SliceSpec eval_slice;
  {
    ConfigReader eval_reader = reader.child("evaluation");
    if (auto slice_reader = eval_reader.child_if_present("slice"))
      eval_slice = parse_slice(*slice_reader);
    eval_reader.finish();
  }
  reader.finish();

  const ToyDataset dataset = load_dataset(dataset_dir);
  const ToyGenerator generator(dataset.basis);
  const ToyDataset imbalanced = make_imbalanced(dataset, positive_fraction, total, seed);
  const std::vector<long> eval_indices = resolve_slice(eval_slice, dataset);

  const auto results =
      strategy_comparison(imbalanced, generator, dataset, eval_indices, experiment);

  fs::create_directories(ctx.out_dir);
  write_resolved_config(config, "augment", ctx, seed);

  std::vector<std::vector<std::string>> rows;
  json strategies_json = json::array();
  for (const StrategyResult& r : results) {
    rows.push_back({strategy_name(r.strategy), format_double(r.metrics.precision),
                    format_double(r.metrics.recall), format_double(r.metrics.accuracy_percent)});
    json entry = classification_json(r.metrics);
    entry["strategy"] = strategy_name(r.strategy);
    strategies_json.push_back(std::move(entry));
  }
  write_csv(ctx.out_dir / "strategies.csv", {"strategy", "precision", "recall", "accuracy"}, rows);

  json report;
  report["schema_version"] = 1;
  report["command"] = "augment";
  report["positive_fraction"] = positive_fraction;
  report["total"] = total;
  report["eval_count"] = static_cast<long>(eval_indices.size());
  report["strategies"] = strategies_json;
  write_json_artifact(report, ctx.out_dir / "report.json");
}

// ---------------------------------------------------------------------------
// report

namespace {

void flatten_numeric(const json& node, const std::string& prefix,
                     std::vector<std::pair<std::string, double>>& out) {
  if (node.is_number()) {
    out.emplace_back(prefix, node.get<double>());
  } else if (node.is_object()) {
    for (const auto& [key, value] : node.items())
      flatten_numeric(value, prefix.empty() ? key : prefix + "." + key, out);
  } else if (node.is_array()) {
    for (std::size_t i = 0; i < node.size(); ++i)
      flatten_numeric(node[i], prefix + "[" + std::to_string(i) + "]", out);
  }
}

}  // namespace

void cmd_report(const json& config, const RunContext& ctx) {
  ConfigReader reader(config, "");
  consume_common(reader, "report");
  const std::uint64_t seed = resolve_seed(reader);
  const std::vector<std::string> runs = reader.require<std::vector<std::string>>("runs");
  reader.finish();
  if (runs.empty()) throw std::invalid_argument("report: no run directories given");

  json merged;
  merged["schema_version"] = 1;
  merged["command"] = "report";
  json entries = json::array();
  std::vector<std::vector<std::string>> rows;
  for (const std::string& dir : runs) {
    const fs::path path = fs::path(dir) / "report.json";
    std::ifstream in(path);
    if (!in) throw MissingInputError("report: cannot open " + path.string());
    const json run_report = json::parse(in);
    entries.push_back(json{{"dir", dir}, {"report", run_report}});
    std::vector<std::pair<std::string, double>> flat;
    flatten_numeric(run_report, "", flat);
    const std::string command = run_report.value("command", "unknown");
    for (const auto& [key, value] : flat)
      rows.push_back({dir, command, key, format_double(value)});
  }
  merged["runs"] = entries;

  fs::create_directories(ctx.out_dir);
  write_resolved_config(config, "report", ctx, seed);
  write_json_artifact(merged, ctx.out_dir / "report.json");
  write_csv(ctx.out_dir / "comparison.csv", {"run", "command", "metric", "value"}, rows);
}

// ---------------------------------------------------------------------------
// CLI

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Semantic image attack laboratory"};
  app.require_subcommand(1);

  struct SubOptions {
    std::string config_path;
    std::string out;
    std::optional<std::uint64_t> seed;
    bool plots = false;
    int workers = 1;
  };

  const std::vector<std::pair<std::string, void (*)(const json&, const RunContext&)>> commands = {
      {"gen-data", cmd_gen_data}, {"train-target", cmd_train_target}, {"attack", cmd_attack},
      {"diagnose", cmd_diagnose}, {"advtrain", cmd_advtrain},         {"augment", cmd_augment},
      {"report", cmd_report},
  };

  std::map<std::string, SubOptions> options;
  for (const auto& [name, _] : commands) {
    CLI::App* sub = app.add_subcommand(name);
    SubOptions& opt = options[name];
    sub->add_option("--config", opt.config_path, "Path to the JSON config")->required();
    sub->add_option("--out", opt.out, "Run directory");
    sub->add_option("--seed", opt.seed, "Override the config seed");
    sub->add_flag("--plots", opt.plots, "Also emit plot images");
    sub->add_option("--workers", opt.workers, "Parallel workers for per-sample work");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  for (const auto& [name, fn] : commands) {
    CLI::App* sub = app.get_subcommand(name);
    if (!sub->parsed()) continue;
    const SubOptions& opt = options.at(name);
    try {
      json config = load_config_file(opt.config_path);
      if (!config.is_object()) throw SchemaError("", "config must be a JSON object");
      if (opt.seed.has_value()) config["seed"] = *opt.seed;

      RunContext ctx;
      std::string out = opt.out;
      if (out.empty()) out = config.value("out", "");
      if (out.empty()) throw SchemaError("out", "no output directory (--out or config key)");
      ctx.out_dir = out;
      ctx.plots = opt.plots || config.value("plots", false);
      ctx.workers = opt.workers;
      if (const char* env = std::getenv("SIA_LAB_WORKERS")) {
        try {
          ctx.workers = std::max(1, std::stoi(env));
        } catch (...) {
          std::cerr << "warning: ignoring invalid SIA_LAB_WORKERS\n";
        }
      }

      fn(config, ctx);
      return 0;
    } catch (const SchemaError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    } catch (const MissingInputError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 3;
    } catch (const NumericError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 4;
    } catch (const std::invalid_argument& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }
  return 1;
}

}  // namespace sia
