#pragma once

#include "sia/toyworld.hpp"
#include "sia/types.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sia {

// Which spaces receive updates; PARTIAL spaces update only during the
// first partial_iters iterations.
enum class AttackMode {
  kReconstructOnly,
  kImageOnly,
  kImagePlusPartialAttr,
  kAttrOnly,
  kAttrPlusPartialImage,
  kFull,
};

const char* attack_mode_name(AttackMode mode);
AttackMode attack_mode_from_name(const std::string& name);

struct AttackConfig {
  double eta_a = 0.02;
  double eta_x = 0.25 / 255.0;
  double eps_a = 0.5;
  double eps_x = 1.5 / 255.0;
  int iterations = 50;  // T
  AttackMode mode = AttackMode::kFull;
  // Per-attribute radius override, e.g. a small cap on the attribute that
  // matches the target classifier's concept.
  std::map<std::string, double> frozen_attr_caps;
  int partial_iters = -1;  // -1: iterations / 10
  std::optional<std::uint64_t> seed;
  double detector_success_threshold = 0.10;  // fraction of the image diagonal
  bool record_images = false;

  int effective_partial_iters() const {
    return partial_iters >= 0 ? partial_iters : iterations / 10;
  }
  void validate() const;
  // Resolved per-attribute radii for a generator's attribute list.
  Array attribute_radii(const std::vector<std::string>& names) const;
};

struct AttackTrace {
  Eigen::MatrixXd attrs;       // (T+1) x K, row i = a_i
  std::vector<Array> images;   // (T+1) x_i, only when record_images is set
  std::vector<double> losses;  // T+1, loss at each iterate
  Array final_image;           // x_T (the latent/base-space iterate)
  ImageTensor final_adversary;
  std::uint64_t seed = 0;

  int steps() const { return static_cast<int>(attrs.rows()) - 1; }
};

struct AdversarialExample {
  ImageTensor adversary;
  long source_index = -1;
  bool success = false;
};

struct AttackResult {
  AdversarialExample example;
  AttackTrace trace;
};

// Success rule shared by attacks and metrics: classifier label flip, or
// mean keypoint error above threshold * image diagonal.
bool attack_succeeded(const TargetModel& model, const ImageTensor& adversary,
                      const GroundTruth& truth, double detector_threshold = 0.10);

// Joint attribute+image projected signed-gradient attack. Both updates in
// iteration i use gradients evaluated at (x_{i-1}, a_{i-1}); the final
// adversary is decode(x_T, a_T).
AttackResult sia_attack(const TargetModel& model, const AttributeGenerator& generator,
                        const ImageTensor& x0, const AttributeVector& a0, const GroundTruth& truth,
                        const AttackConfig& config);

// Single signed step in image space, clipped to [0,1].
AdversarialExample fgsm_attack(const TargetModel& model, const ImageTensor& x0,
                               const GroundTruth& truth, double eps,
                               double detector_threshold = 0.10);

// Iterated signed steps in image space only, no generator, no random start.
AttackResult pgd_attack(const TargetModel& model, const ImageTensor& x0, const GroundTruth& truth,
                        const AttackConfig& config);

enum class AttackKind { kSia, kFgsm, kPgd };

const char* attack_kind_name(AttackKind kind);
AttackKind attack_kind_from_name(const std::string& name);

// Attacks a dataset slice sample by sample. SIA starts from the stored
// base image and attributes; FGSM/PGD start from the rendered image.
// Per-sample seed = config seed XOR sample index. Deterministic regardless
// of worker count.
std::vector<AttackResult> run_attack_batch(const TargetModel& model,
                                           const AttributeGenerator* generator,
                                           const ToyDataset& dataset,
                                           const std::vector<long>& indices,
                                           const AttackConfig& config, AttackKind kind,
                                           int workers = 1);

}  // namespace sia
