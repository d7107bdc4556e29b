#pragma once

#include "sia/types.hpp"

#include <string>
#include <vector>

namespace sia {

struct MetricResult {
  std::string name;
  double value = 0.0;
  long count = 0;
  std::vector<std::pair<std::string, double>> params;
};

// Fraction of adversaries whose model output violates the ground truth
// (label flip, or keypoint error above threshold * diagonal).
double attack_success_rate(const TargetModel& model, const std::vector<ImageTensor>& adversaries,
                           const std::vector<GroundTruth>& truths,
                           double detector_threshold = 0.10);

// 10 log10(max^2 / MSE) in dB; identical images return `cap`.
double psnr(const ImageTensor& x, const ImageTensor& y, double max_value = 1.0,
            double cap = 100.0);

// Mean SSIM over non-overlapping windows and channels (the trailing window
// is realigned to the border when the size does not divide evenly).
// Uniform window weighting, population moments.
double ssim(const ImageTensor& x, const ImageTensor& y, int window = 8, double c1 = 0.0001,
            double c2 = 0.0009);

// Mean Euclidean keypoint distance divided by `normalizer`.
double keypoint_error(const std::vector<Keypoint>& pred, const std::vector<Keypoint>& gt,
                      double normalizer);

struct ClassificationMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double accuracy_percent = 0.0;
  double f1 = 0.0;
  bool precision_degenerate = false;  // no positives predicted
  bool recall_degenerate = false;     // no positives in ground truth
  bool f1_degenerate = false;
  long tp = 0, fp = 0, tn = 0, fn = 0;
};

ClassificationMetrics classification_metrics(const std::vector<int>& preds,
                                             const std::vector<int>& gts);

}  // namespace sia
