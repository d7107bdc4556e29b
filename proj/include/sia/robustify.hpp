#pragma once

#include "sia/attack.hpp"
#include "sia/metrics.hpp"
#include "sia/models.hpp"
#include "sia/toyworld.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace sia {

enum class Strategy { kNone, kReweight, kResample, kCutMix, kSiaAugment, kSiaAugmentReweight };

const char* strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

struct TrainingPlan {
  Strategy strategy = Strategy::kNone;
  int epochs = 150;
  double lr = 2.0;
  long augmentation_count = 0;  // 0: top the minority class up to parity
  std::uint64_t seed = 0;
  double cutmix_probability = 0.5;
  double cutmix_alpha = 1.0;
};

// Fine-tunes a copy of the model on the adversaries with deterministic
// mini-batch SGD (seeded shuffle); the input model is untouched.
std::unique_ptr<TargetModel> adversarial_finetune(const TargetModel& model,
                                                  const std::vector<ImageTensor>& adversaries,
                                                  const std::vector<GroundTruth>& truths,
                                                  int epochs, double lr, std::uint64_t seed,
                                                  int batch_size = 32);

struct EvalAttack {
  enum class Kind { kClean, kFgsm, kPgd, kSia };
  std::string name;
  Kind kind = Kind::kClean;
  AttackConfig config;  // eps_x doubles as the FGSM bound
};

// rows = evaluation attacks (incl. clean), columns = models, cells =
// accuracy (%) of the model under that attack on the same fixed slice.
struct RobustnessMatrix {
  std::vector<std::string> row_names;
  std::vector<std::string> col_names;
  Eigen::MatrixXd accuracy_percent;
};

RobustnessMatrix robustness_matrix(
    const std::vector<std::pair<std::string, const TargetModel*>>& models,
    const std::vector<EvalAttack>& attacks, const ToyDataset& dataset,
    const std::vector<long>& indices, const AttributeGenerator* generator, int workers = 1);

// Subsamples the train split to exact class counts round(total * fraction)
// positives and the rest negatives.
ToyDataset make_imbalanced(const ToyDataset& dataset, double positive_fraction, long total,
                           std::uint64_t seed);

// Per-sample weights proportional to 1 / class count, normalized so the
// total weight is N; the two classes carry equal total weight.
Array reweight(const ToyDataset& dataset);

// Duplicates minority samples (uniform, with replacement) until both
// classes match the majority count.
ToyDataset resample(const ToyDataset& dataset, std::uint64_t seed);

struct MixedBatch {
  std::vector<ImageTensor> images;
  Array labels;  // soft labels in [0,1]
};

// Pairs samples via a seeded shuffle; with probability `probability` per
// pair, pastes a random rectangle from the partner and mixes labels by the
// surviving area fraction lambda ~ Beta(alpha, alpha).
MixedBatch cutmix(const std::vector<ImageTensor>& images, const Array& labels, double probability,
                  double alpha, std::uint64_t seed);

// Appends `count` SIA adversaries of training samples (labels preserved
// from their sources). Sources are drawn with replacement, optionally only
// from the minority class.
ToyDataset sia_augment(const TargetModel& model, const AttributeGenerator& generator,
                       const ToyDataset& dataset, const AttackConfig& config, long count,
                       std::uint64_t seed, bool oversample_minority = true, int workers = 1);

struct StrategyResult {
  Strategy strategy = Strategy::kNone;
  ClassificationMetrics metrics;
};

struct ImbalanceExperiment {
  std::vector<Strategy> strategies;
  ClassifierTrainParams train;
  AttackConfig augment_attack;  // used by the sia_augment strategies
  long augmentation_count = 0;
  double cutmix_probability = 0.5;
  double cutmix_alpha = 1.0;
  int workers = 1;
};

// Trains one classifier per strategy on the imbalanced set and evaluates
// each on the same (balanced) slice of eval_dataset.
std::vector<StrategyResult> strategy_comparison(const ToyDataset& imbalanced_train,
                                                const AttributeGenerator& generator,
                                                const ToyDataset& eval_dataset,
                                                const std::vector<long>& eval_indices,
                                                const ImbalanceExperiment& experiment);

}  // namespace sia
