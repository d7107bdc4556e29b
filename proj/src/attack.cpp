#include "sia/attack.hpp"

#include "sia/metrics.hpp"
#include "sia/ops.hpp"
#include "sia/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <mutex>
#include <thread>

namespace sia {

const char* attack_mode_name(AttackMode mode) {
  switch (mode) {
    case AttackMode::kReconstructOnly: return "reconstruct_only";
    case AttackMode::kImageOnly: return "image_only";
    case AttackMode::kImagePlusPartialAttr: return "image_plus_partial_attr";
    case AttackMode::kAttrOnly: return "attr_only";
    case AttackMode::kAttrPlusPartialImage: return "attr_plus_partial_image";
    case AttackMode::kFull: return "full";
  }
  return "full";
}

AttackMode attack_mode_from_name(const std::string& name) {
  if (name == "reconstruct_only") return AttackMode::kReconstructOnly;
  if (name == "image_only") return AttackMode::kImageOnly;
  if (name == "image_plus_partial_attr") return AttackMode::kImagePlusPartialAttr;
  if (name == "attr_only") return AttackMode::kAttrOnly;
  if (name == "attr_plus_partial_image") return AttackMode::kAttrPlusPartialImage;
  if (name == "full") return AttackMode::kFull;
  throw std::invalid_argument("unknown attack mode: " + name);
}

const char* attack_kind_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::kSia: return "sia";
    case AttackKind::kFgsm: return "fgsm";
    case AttackKind::kPgd: return "pgd";
  }
  return "sia";
}

AttackKind attack_kind_from_name(const std::string& name) {
  if (name == "sia") return AttackKind::kSia;
  if (name == "fgsm") return AttackKind::kFgsm;
  if (name == "pgd") return AttackKind::kPgd;
  throw std::invalid_argument("unknown attack kind: " + name);
}

void AttackConfig::validate() const {
  if (eta_a < 0 || eta_x < 0) throw std::invalid_argument("AttackConfig: eta must be >= 0");
  if (eps_a < 0 || eps_x < 0) throw std::invalid_argument("AttackConfig: eps must be >= 0");
  if (iterations < 0) throw std::invalid_argument("AttackConfig: iterations must be >= 0");
  const int partial = effective_partial_iters();
  if (partial < 0 || partial > iterations)
    throw std::invalid_argument("AttackConfig: partial_iters must be in [0, iterations]");
  for (const auto& [name, cap] : frozen_attr_caps)
    if (cap < 0) throw std::invalid_argument("AttackConfig: frozen cap for " + name + " < 0");
}

Array AttackConfig::attribute_radii(const std::vector<std::string>& names) const {
  Array radii = Array::Constant(static_cast<long>(names.size()), eps_a);
  for (const auto& [name, cap] : frozen_attr_caps) {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end())
      throw std::invalid_argument("AttackConfig: unknown attribute in frozen_attr_caps: " + name);
    radii[it - names.begin()] = std::min(eps_a, cap);
  }
  return radii;
}

bool attack_succeeded(const TargetModel& model, const ImageTensor& adversary,
                      const GroundTruth& truth, double detector_threshold) {
  const Prediction pred = model.predict(adversary);
  if (model.kind() == ModelKind::kBinaryClassifier) {
    return pred.label != std::get<int>(truth);
  }
  const auto& gt = std::get<std::vector<Keypoint>>(truth);
  const double diagonal = std::hypot(adversary.height - 1.0, adversary.width - 1.0);
  return keypoint_error(pred.keypoints, gt, diagonal) > detector_threshold;
}

namespace {

struct SpaceSchedule {
  bool attr_always = false, attr_partial = false;
  bool image_always = false, image_partial = false;
};

SpaceSchedule schedule_for(AttackMode mode) {
  switch (mode) {
    case AttackMode::kReconstructOnly: return {};
    case AttackMode::kImageOnly: return {.image_always = true};
    case AttackMode::kImagePlusPartialAttr: return {.attr_partial = true, .image_always = true};
    case AttackMode::kAttrOnly: return {.attr_always = true};
    case AttackMode::kAttrPlusPartialImage: return {.attr_always = true, .image_partial = true};
    case AttackMode::kFull: return {.attr_always = true, .image_always = true};
  }
  return {};
}

}  // namespace

AttackResult sia_attack(const TargetModel& model, const AttributeGenerator& generator,
                        const ImageTensor& x0, const AttributeVector& a0, const GroundTruth& truth,
                        const AttackConfig& config) {
  config.validate();
  if (a0.size() != generator.attribute_count())
    throw std::invalid_argument("sia_attack: attribute vector does not match generator");
  if (x0.shape() != generator.base_shape())
    throw std::invalid_argument("sia_attack: image does not match generator shape");

  const int T = config.iterations;
  const int partial = config.effective_partial_iters();
  const SpaceSchedule sched = schedule_for(config.mode);
  const Array attr_radii = config.attribute_radii(a0.names);

  AttackResult result;
  AttackTrace& trace = result.trace;
  trace.seed = config.seed.value_or(0);
  trace.attrs.resize(T + 1, a0.size());
  trace.losses.reserve(T + 1);

  Array a = a0.values;
  Array x = x0.data;
  trace.attrs.row(0) = a.matrix().transpose();
  if (config.record_images) trace.images.push_back(x);

  const auto latent = [&](const Array& img) {
    return ImageTensor::from_data(x0.height, x0.width, x0.channels, img);
  };

  for (int i = 1; i <= T; ++i) {
    const AttributeVector attrs(a0.names, a);
    const ImageTensor rendered = generator.decode(latent(x), attrs);
    trace.losses.push_back(model.loss(rendered, truth));

    const Array upstream = model.loss_gradient(rendered, truth);
    const GradientBundle grads = generator.pullback(latent(x), attrs, upstream);
    if (!grads.finite())
      throw NumericError("sia_attack: non-finite gradient at iteration", i);

    const bool attr_active = sched.attr_always || (sched.attr_partial && i <= partial);
    const bool image_active = sched.image_always || (sched.image_partial && i <= partial);
    if (attr_active)
      a = project_linf(signed_step(a, grads.grad_attributes, config.eta_a), a0.values, attr_radii,
                       0.0, 1.0);
    if (image_active)
      x = project_linf(signed_step(x, grads.grad_image, config.eta_x), x0.data, config.eps_x, 0.0,
                       1.0);

    trace.attrs.row(i) = a.matrix().transpose();
    if (config.record_images) trace.images.push_back(x);
  }

  trace.final_image = x;
  trace.final_adversary = generator.decode(latent(x), AttributeVector(a0.names, a));
  trace.losses.push_back(model.loss(trace.final_adversary, truth));

  result.example.adversary = trace.final_adversary;
  result.example.success =
      attack_succeeded(model, trace.final_adversary, truth, config.detector_success_threshold);
  return result;
}

AdversarialExample fgsm_attack(const TargetModel& model, const ImageTensor& x0,
                               const GroundTruth& truth, double eps, double detector_threshold) {
  if (eps < 0) throw std::invalid_argument("fgsm_attack: eps must be >= 0");
  const Array grad = model.loss_gradient(x0, truth);
  if (!grad.isFinite().all()) throw NumericError("fgsm_attack: non-finite gradient");
  AdversarialExample example;
  example.adversary = ImageTensor::from_data(
      x0.height, x0.width, x0.channels, (x0.data + eps * sign_of(grad)).max(0.0).min(1.0));
  example.success = attack_succeeded(model, example.adversary, truth, detector_threshold);
  return example;
}

AttackResult pgd_attack(const TargetModel& model, const ImageTensor& x0, const GroundTruth& truth,
                        const AttackConfig& config) {
  config.validate();
  const int T = config.iterations;

  AttackResult result;
  AttackTrace& trace = result.trace;
  trace.seed = config.seed.value_or(0);
  trace.attrs.resize(T + 1, 0);  // no attribute space
  trace.losses.reserve(T + 1);

  Array x = x0.data;
  if (config.record_images) trace.images.push_back(x);
  for (int i = 1; i <= T; ++i) {
    const ImageTensor current = ImageTensor::from_data(x0.height, x0.width, x0.channels, x);
    trace.losses.push_back(model.loss(current, truth));
    const Array grad = model.loss_gradient(current, truth);
    if (!grad.isFinite().all())
      throw NumericError("pgd_attack: non-finite gradient at iteration", i);
    x = project_linf(signed_step(x, grad, config.eta_x), x0.data, config.eps_x, 0.0, 1.0);
    if (config.record_images) trace.images.push_back(x);
  }

  trace.final_image = x;
  trace.final_adversary = ImageTensor::from_data(x0.height, x0.width, x0.channels, x);
  trace.losses.push_back(model.loss(trace.final_adversary, truth));
  result.example.adversary = trace.final_adversary;
  result.example.success =
      attack_succeeded(model, trace.final_adversary, truth, config.detector_success_threshold);
  return result;
}

namespace {

GroundTruth truth_for(const TargetModel& model, const ToySample& sample) {
  if (model.kind() == ModelKind::kBinaryClassifier) return sample.label;
  return sample.keypoints;
}

AttackResult attack_one(const TargetModel& model, const AttributeGenerator* generator,
                        const ToyDataset& dataset, long index, const AttackConfig& config,
                        AttackKind kind) {
  const ToySample& sample = dataset.samples.at(index);
  const GroundTruth truth = truth_for(model, sample);
  switch (kind) {
    case AttackKind::kSia: {
      if (!generator) throw std::invalid_argument("run_attack_batch: sia requires a generator");
      AttackResult r = sia_attack(model, *generator, sample.base_image, sample.attributes, truth,
                                  config);
      r.example.source_index = index;
      return r;
    }
    case AttackKind::kFgsm: {
      AttackResult r;
      r.example = fgsm_attack(model, dataset.rendered(index), truth, config.eps_x,
                              config.detector_success_threshold);
      r.example.source_index = index;
      r.trace.attrs.resize(1, 0);
      r.trace.final_adversary = r.example.adversary;
      return r;
    }
    case AttackKind::kPgd: {
      AttackResult r = pgd_attack(model, dataset.rendered(index), truth, config);
      r.example.source_index = index;
      return r;
    }
  }
  throw std::invalid_argument("run_attack_batch: unknown attack kind");
}

}  // namespace

std::vector<AttackResult> run_attack_batch(const TargetModel& model,
                                           const AttributeGenerator* generator,
                                           const ToyDataset& dataset,
                                           const std::vector<long>& indices,
                                           const AttackConfig& config, AttackKind kind,
                                           int workers) {
  config.validate();
  if (indices.empty()) throw std::invalid_argument("run_attack_batch: empty slice");
  if (!config.seed.has_value())
    throw std::invalid_argument("run_attack_batch: config seed is required");

  std::vector<AttackResult> results(indices.size());
  std::exception_ptr first_error;
  std::mutex error_mutex;

  const auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < indices.size(); i += stride) {
      try {
        AttackConfig per_sample = config;
        per_sample.seed = *config.seed ^ static_cast<std::uint64_t>(indices[i]);
        results[i] = attack_one(model, generator, dataset, indices[i], per_sample, kind);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };

  const int n_workers = std::max(1, std::min<int>(workers, static_cast<int>(indices.size())));
  if (n_workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(work, w, n_workers);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

}  // namespace sia
