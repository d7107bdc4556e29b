#include "sia/robustify.hpp"

#include "sia/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sia {

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kNone: return "none";
    case Strategy::kReweight: return "reweight";
    case Strategy::kResample: return "resample";
    case Strategy::kCutMix: return "cutmix";
    case Strategy::kSiaAugment: return "sia_augment";
    case Strategy::kSiaAugmentReweight: return "sia_augment_reweight";
  }
  return "none";
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "none") return Strategy::kNone;
  if (name == "reweight") return Strategy::kReweight;
  if (name == "resample") return Strategy::kResample;
  if (name == "cutmix") return Strategy::kCutMix;
  if (name == "sia_augment") return Strategy::kSiaAugment;
  if (name == "sia_augment_reweight") return Strategy::kSiaAugmentReweight;
  throw std::invalid_argument("unknown strategy: " + name);
}

namespace {

template <typename T>
void seeded_shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i)
    std::swap(items[i - 1], items[static_cast<std::size_t>(rng.uniform_int(0, long(i) - 1))]);
}

std::pair<std::vector<long>, std::vector<long>> split_by_class(const ToyDataset& dataset) {
  std::vector<long> positives, negatives;
  for (long i = 0; i < dataset.size(); ++i)
    (dataset.samples[i].label == 1 ? positives : negatives).push_back(i);
  return {positives, negatives};
}

}  // namespace

std::unique_ptr<TargetModel> adversarial_finetune(const TargetModel& model,
                                                  const std::vector<ImageTensor>& adversaries,
                                                  const std::vector<GroundTruth>& truths,
                                                  int epochs, double lr, std::uint64_t seed,
                                                  int batch_size) {
  if (epochs < 0) throw std::invalid_argument("adversarial_finetune: epochs must be >= 0");
  if (adversaries.size() != truths.size())
    throw std::invalid_argument("adversarial_finetune: adversaries/truths length mismatch");
  if (adversaries.empty() && epochs > 0)
    throw std::invalid_argument("adversarial_finetune: no adversaries");
  if (batch_size < 1) throw std::invalid_argument("adversarial_finetune: batch_size must be >= 1");

  std::unique_ptr<TargetModel> copy = model.clone();
  if (epochs == 0) return copy;
  auto* trainable = dynamic_cast<TrainableModel*>(copy.get());
  if (!trainable) throw std::invalid_argument("adversarial_finetune: model is not trainable");

  std::vector<long> order(adversaries.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 0xf17e));
  for (int epoch = 0; epoch < epochs; ++epoch) {
    seeded_shuffle(order, rng);
    for (std::size_t at = 0; at < order.size(); at += batch_size) {
      const std::size_t end = std::min(order.size(), at + batch_size);
      std::vector<ImageTensor> batch;
      std::vector<GroundTruth> batch_truths;
      batch.reserve(end - at);
      for (std::size_t i = at; i < end; ++i) {
        batch.push_back(adversaries[order[i]]);
        batch_truths.push_back(truths[order[i]]);
      }
      trainable->gradient_step(batch, batch_truths, Array::Ones(long(end - at)), lr);
    }
  }
  return copy;
}

RobustnessMatrix robustness_matrix(
    const std::vector<std::pair<std::string, const TargetModel*>>& models,
    const std::vector<EvalAttack>& attacks, const ToyDataset& dataset,
    const std::vector<long>& indices, const AttributeGenerator* generator, int workers) {
  if (models.empty() || attacks.empty())
    throw std::invalid_argument("robustness_matrix: empty model or attack list");
  if (indices.empty()) throw std::invalid_argument("robustness_matrix: empty slice");

  RobustnessMatrix matrix;
  matrix.accuracy_percent.resize(static_cast<long>(attacks.size()),
                                 static_cast<long>(models.size()));
  for (const auto& [name, _] : models) matrix.col_names.push_back(name);
  for (const auto& attack : attacks) matrix.row_names.push_back(attack.name);

  for (std::size_t col = 0; col < models.size(); ++col) {
    const TargetModel& model = *models[col].second;
    for (std::size_t row = 0; row < attacks.size(); ++row) {
      const EvalAttack& attack = attacks[row];
      long correct = 0;
      if (attack.kind == EvalAttack::Kind::kClean) {
        for (long idx : indices) {
          const Prediction pred = model.predict(dataset.rendered(idx));
          correct += pred.label == dataset.samples[idx].label ? 1 : 0;
        }
      } else {
        const AttackKind kind = attack.kind == EvalAttack::Kind::kFgsm  ? AttackKind::kFgsm
                                : attack.kind == EvalAttack::Kind::kPgd ? AttackKind::kPgd
                                                                        : AttackKind::kSia;
        const auto results =
            run_attack_batch(model, generator, dataset, indices, attack.config, kind, workers);
        for (std::size_t i = 0; i < results.size(); ++i) {
          const Prediction pred = model.predict(results[i].example.adversary);
          correct += pred.label == dataset.samples[indices[i]].label ? 1 : 0;
        }
      }
      matrix.accuracy_percent(static_cast<long>(row), static_cast<long>(col)) =
          100.0 * static_cast<double>(correct) / static_cast<double>(indices.size());
    }
  }
  return matrix;
}

ToyDataset make_imbalanced(const ToyDataset& dataset, double positive_fraction, long total,
                           std::uint64_t seed) {
  if (positive_fraction < 0.0 || positive_fraction > 1.0)
    throw std::invalid_argument("make_imbalanced: positive_fraction must be in [0,1]");
  if (total < 1) throw std::invalid_argument("make_imbalanced: total must be >= 1");
  const long want_pos = std::lround(positive_fraction * static_cast<double>(total));
  const long want_neg = total - want_pos;

  auto [positives, negatives] = split_by_class(dataset);
  // draw from the train split only
  const auto in_train = [&](std::vector<long>& v) {
    v.erase(std::remove_if(v.begin(), v.end(),
                           [&](long i) { return i >= dataset.manifest.train_count; }),
            v.end());
  };
  in_train(positives);
  in_train(negatives);
  if (static_cast<long>(positives.size()) < want_pos ||
      static_cast<long>(negatives.size()) < want_neg)
    throw std::invalid_argument("make_imbalanced: source has too few samples of a class");

  Rng rng(mix_seed(seed, 0x1b1a5));
  seeded_shuffle(positives, rng);
  seeded_shuffle(negatives, rng);
  std::vector<long> chosen(positives.begin(), positives.begin() + want_pos);
  chosen.insert(chosen.end(), negatives.begin(), negatives.begin() + want_neg);
  seeded_shuffle(chosen, rng);

  ToyDataset out;
  out.manifest = dataset.manifest;
  out.basis = dataset.basis;
  out.manifest.derived = true;
  out.manifest.sample_count = total;
  out.manifest.train_count = total;
  out.samples.reserve(total);
  for (long idx : chosen) out.samples.push_back(dataset.samples[idx]);
  return out;
}

Array reweight(const ToyDataset& dataset) {
  auto [positives, negatives] = split_by_class(dataset);
  if (positives.empty() || negatives.empty())
    throw std::invalid_argument("reweight: need both classes present");
  const double n = static_cast<double>(dataset.size());
  const double w_pos = n / (2.0 * static_cast<double>(positives.size()));
  const double w_neg = n / (2.0 * static_cast<double>(negatives.size()));
  Array weights(dataset.size());
  for (long i = 0; i < dataset.size(); ++i)
    weights[i] = dataset.samples[i].label == 1 ? w_pos : w_neg;
  return weights;
}

ToyDataset resample(const ToyDataset& dataset, std::uint64_t seed) {
  auto [positives, negatives] = split_by_class(dataset);
  ToyDataset out;
  out.manifest = dataset.manifest;
  out.basis = dataset.basis;
  out.samples = dataset.samples;
  if (positives.empty() || negatives.empty() || positives.size() == negatives.size()) return out;

  const auto& minority = positives.size() < negatives.size() ? positives : negatives;
  const long deficit =
      static_cast<long>(std::max(positives.size(), negatives.size()) - minority.size());
  Rng rng(mix_seed(seed, 0x2e5a));
  for (long i = 0; i < deficit; ++i)
    out.samples.push_back(
        dataset.samples[minority[rng.uniform_int(0, static_cast<long>(minority.size()) - 1)]]);
  out.manifest.derived = true;
  out.manifest.sample_count = static_cast<long>(out.samples.size());
  out.manifest.train_count = out.manifest.sample_count;
  return out;
}

MixedBatch cutmix(const std::vector<ImageTensor>& images, const Array& labels, double probability,
                  double alpha, std::uint64_t seed) {
  if (images.size() < 2) throw std::invalid_argument("cutmix: batch must hold at least 2 images");
  if (static_cast<long>(images.size()) != labels.size())
    throw std::invalid_argument("cutmix: images/labels length mismatch");
  if (probability < 0.0 || probability > 1.0)
    throw std::invalid_argument("cutmix: probability must be in [0,1]");
  if (alpha <= 0.0) throw std::invalid_argument("cutmix: alpha must be > 0");

  MixedBatch out;
  out.images = images;
  out.labels = labels;

  Rng rng(mix_seed(seed, 0xc07));
  std::vector<long> partner(images.size());
  std::iota(partner.begin(), partner.end(), 0);
  seeded_shuffle(partner, rng);

  const int height = images.front().height;
  const int width = images.front().width;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (partner[i] == static_cast<long>(i)) continue;
    if (!rng.bernoulli(probability)) continue;
    const double lambda = rng.beta(alpha, alpha);
    // standard CutMix box: side ratio sqrt(1 - lambda), uniform center
    const double cut_ratio = std::sqrt(1.0 - lambda);
    const int cut_h = static_cast<int>(std::round(height * cut_ratio));
    const int cut_w = static_cast<int>(std::round(width * cut_ratio));
    const int cr = static_cast<int>(rng.uniform_int(0, height - 1));
    const int cc = static_cast<int>(rng.uniform_int(0, width - 1));
    const int r0 = std::clamp(cr - cut_h / 2, 0, height);
    const int r1 = std::clamp(cr + (cut_h + 1) / 2, 0, height);
    const int c0 = std::clamp(cc - cut_w / 2, 0, width);
    const int c1 = std::clamp(cc + (cut_w + 1) / 2, 0, width);
    if (r1 <= r0 || c1 <= c0) continue;  // degenerate rectangle, labels unchanged

    const ImageTensor& donor = images[partner[i]];
    ImageTensor& target = out.images[i];
    for (int r = r0; r < r1; ++r)
      for (int c = c0; c < c1; ++c)
        for (int ch = 0; ch < target.channels; ++ch) target.at(r, c, ch) = donor.at(r, c, ch);
    // mix by the realized area after clamping
    const double pasted = static_cast<double>((r1 - r0) * (c1 - c0)) / (height * width);
    const double lam = 1.0 - pasted;
    out.labels[i] = lam * labels[i] + (1.0 - lam) * labels[partner[i]];
  }
  return out;
}

ToyDataset sia_augment(const TargetModel& model, const AttributeGenerator& generator,
                       const ToyDataset& dataset, const AttackConfig& config, long count,
                       std::uint64_t seed, bool oversample_minority, int workers) {
  if (count < 0) throw std::invalid_argument("sia_augment: count must be >= 0");
  ToyDataset out;
  out.manifest = dataset.manifest;
  out.basis = dataset.basis;
  out.samples = dataset.samples;
  if (count == 0) return out;

  auto [positives, negatives] = split_by_class(dataset);
  std::vector<long>* pool = nullptr;
  if (oversample_minority && !positives.empty() && !negatives.empty()) {
    pool = positives.size() <= negatives.size() ? &positives : &negatives;
  }

  Rng rng(mix_seed(seed, 0xa06));
  std::vector<long> sources(count);
  for (long i = 0; i < count; ++i) {
    if (pool) {
      sources[i] = (*pool)[rng.uniform_int(0, static_cast<long>(pool->size()) - 1)];
    } else {
      sources[i] = rng.uniform_int(0, dataset.size() - 1);
    }
  }

  AttackConfig attack = config;
  if (!attack.seed.has_value()) attack.seed = seed;
  const auto results =
      run_attack_batch(model, &generator, dataset, sources, attack, AttackKind::kSia, workers);

  const Shape shape = dataset.basis.shape();
  for (std::size_t i = 0; i < results.size(); ++i) {
    const AttackTrace& trace = results[i].trace;
    ToySample sample;
    sample.base_image =
        ImageTensor::from_data(shape.height, shape.width, shape.channels, trace.final_image);
    sample.attributes = AttributeVector(
        dataset.manifest.attribute_names,
        trace.attrs.row(trace.attrs.rows() - 1).array().transpose());
    sample.label = dataset.samples[sources[i]].label;
    sample.keypoints = dataset.samples[sources[i]].keypoints;
    out.samples.push_back(std::move(sample));
  }
  out.manifest.derived = true;
  out.manifest.sample_count = static_cast<long>(out.samples.size());
  out.manifest.train_count = out.manifest.sample_count;
  return out;
}

namespace {

std::unique_ptr<ToyClassifier> train_plain(const ToyDataset& dataset,
                                           const ClassifierTrainParams& params,
                                           const Array& weights) {
  auto model = std::make_unique<ToyClassifier>(dataset.manifest.height, dataset.manifest.width,
                                               dataset.manifest.channels, params.hidden,
                                               params.seed);
  const auto indices = dataset.train_indices();
  const Eigen::MatrixXd X = rendered_matrix(dataset, indices);
  Array targets(static_cast<long>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i)
    targets[static_cast<long>(i)] = dataset.samples[indices[i]].label;
  for (int epoch = 0; epoch < params.epochs; ++epoch)
    model->fit_step(X, targets, weights, params.lr);
  return model;
}

std::unique_ptr<ToyClassifier> train_cutmix(const ToyDataset& dataset,
                                            const ClassifierTrainParams& params,
                                            double probability, double alpha,
                                            std::uint64_t seed) {
  auto model = std::make_unique<ToyClassifier>(dataset.manifest.height, dataset.manifest.width,
                                               dataset.manifest.channels, params.hidden,
                                               params.seed);
  const auto indices = dataset.train_indices();
  std::vector<ImageTensor> images;
  images.reserve(indices.size());
  Array labels(static_cast<long>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) {
    images.push_back(dataset.rendered(indices[i]));
    labels[static_cast<long>(i)] = dataset.samples[indices[i]].label;
  }
  const Array weights = Array::Ones(labels.size());
  const long d = dataset.basis.shape().size();
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    const MixedBatch mixed =
        cutmix(images, labels, probability, alpha, mix_seed(seed, 0xe90c + epoch));
    Eigen::MatrixXd X(static_cast<long>(mixed.images.size()), d);
    for (std::size_t i = 0; i < mixed.images.size(); ++i)
      X.row(static_cast<long>(i)) = mixed.images[i].data.matrix().transpose();
    model->fit_step(X, mixed.labels, weights, params.lr);
  }
  return model;
}

}  // namespace

std::vector<StrategyResult> strategy_comparison(const ToyDataset& imbalanced_train,
                                                const AttributeGenerator& generator,
                                                const ToyDataset& eval_dataset,
                                                const std::vector<long>& eval_indices,
                                                const ImbalanceExperiment& experiment) {
  if (eval_indices.empty()) throw std::invalid_argument("strategy_comparison: empty eval slice");

  // The plain model doubles as the attack target for the augment strategies.
  const Array ones = Array::Ones(imbalanced_train.size());
  std::unique_ptr<ToyClassifier> base = train_plain(imbalanced_train, experiment.train, ones);

  auto [positives, negatives] = split_by_class(imbalanced_train);
  long augment_count = experiment.augmentation_count;
  if (augment_count == 0)
    augment_count = static_cast<long>(std::max(positives.size(), negatives.size()) -
                                      std::min(positives.size(), negatives.size()));

  std::optional<ToyDataset> augmented;
  const auto ensure_augmented = [&]() -> const ToyDataset& {
    if (!augmented)
      augmented = sia_augment(*base, generator, imbalanced_train, experiment.augment_attack,
                              augment_count, experiment.train.seed, true, experiment.workers);
    return *augmented;
  };

  std::vector<StrategyResult> results;
  for (Strategy strategy : experiment.strategies) {
    std::unique_ptr<ToyClassifier> model;
    switch (strategy) {
      case Strategy::kNone:
        model = train_plain(imbalanced_train, experiment.train, ones);
        break;
      case Strategy::kReweight:
        model = train_plain(imbalanced_train, experiment.train, reweight(imbalanced_train));
        break;
      case Strategy::kResample: {
        const ToyDataset balanced = resample(imbalanced_train, experiment.train.seed);
        model = train_plain(balanced, experiment.train, Array::Ones(balanced.size()));
        break;
      }
      case Strategy::kCutMix:
        model = train_cutmix(imbalanced_train, experiment.train, experiment.cutmix_probability,
                             experiment.cutmix_alpha, experiment.train.seed);
        break;
      case Strategy::kSiaAugment: {
        const ToyDataset& data = ensure_augmented();
        model = train_plain(data, experiment.train, Array::Ones(data.size()));
        break;
      }
      case Strategy::kSiaAugmentReweight: {
        const ToyDataset& data = ensure_augmented();
        model = train_plain(data, experiment.train, reweight(data));
        break;
      }
    }

    std::vector<int> preds, gts;
    preds.reserve(eval_indices.size());
    for (long idx : eval_indices) {
      preds.push_back(model->predict(eval_dataset.rendered(idx)).label);
      gts.push_back(eval_dataset.samples[idx].label);
    }
    results.push_back({strategy, classification_metrics(preds, gts)});
  }
  return results;
}

}  // namespace sia
