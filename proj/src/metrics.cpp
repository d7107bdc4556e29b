#include "sia/metrics.hpp"

#include "sia/attack.hpp"

#include <cmath>
#include <stdexcept>

namespace sia {

double attack_success_rate(const TargetModel& model, const std::vector<ImageTensor>& adversaries,
                           const std::vector<GroundTruth>& truths, double detector_threshold) {
  if (adversaries.empty()) throw std::invalid_argument("attack_success_rate: empty input");
  if (adversaries.size() != truths.size())
    throw std::invalid_argument("attack_success_rate: length mismatch");
  long successes = 0;
  for (std::size_t i = 0; i < adversaries.size(); ++i)
    successes += attack_succeeded(model, adversaries[i], truths[i], detector_threshold) ? 1 : 0;
  return static_cast<double>(successes) / static_cast<double>(adversaries.size());
}

double psnr(const ImageTensor& x, const ImageTensor& y, double max_value, double cap) {
  if (!x.same_shape(y)) throw std::invalid_argument("psnr: shape mismatch");
  const double mse = (x.data - y.data).square().mean();
  if (mse == 0.0) return cap;
  return 10.0 * std::log10(max_value * max_value / mse);
}

namespace {

struct WindowStats {
  double mean_x, mean_y, var_x, var_y, cov;
};

WindowStats window_stats(const ImageTensor& x, const ImageTensor& y, int r0, int c0, int window,
                         int ch) {
  const double n = static_cast<double>(window) * window;
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (int r = r0; r < r0 + window; ++r)
    for (int c = c0; c < c0 + window; ++c) {
      const double a = x.at(r, c, ch);
      const double b = y.at(r, c, ch);
      sx += a;
      sy += b;
      sxx += a * a;
      syy += b * b;
      sxy += a * b;
    }
  WindowStats s;
  s.mean_x = sx / n;
  s.mean_y = sy / n;
  s.var_x = sxx / n - s.mean_x * s.mean_x;
  s.var_y = syy / n - s.mean_y * s.mean_y;
  s.cov = sxy / n - s.mean_x * s.mean_y;
  return s;
}

}  // namespace

double ssim(const ImageTensor& x, const ImageTensor& y, int window, double c1, double c2) {
  if (!x.same_shape(y)) throw std::invalid_argument("ssim: shape mismatch");
  if (window < 1 || window > std::min(x.height, x.width))
    throw std::invalid_argument("ssim: window must fit inside the image");

  const auto starts = [&](int extent) {
    std::vector<int> s;
    for (int at = 0; at + window <= extent; at += window) s.push_back(at);
    if (s.empty() || s.back() + window < extent) s.push_back(extent - window);
    return s;
  };
  const std::vector<int> row_starts = starts(x.height);
  const std::vector<int> col_starts = starts(x.width);

  double total = 0.0;
  long count = 0;
  for (int ch = 0; ch < x.channels; ++ch)
    for (int r0 : row_starts)
      for (int c0 : col_starts) {
        const WindowStats s = window_stats(x, y, r0, c0, window, ch);
        const double numerator =
            (2 * s.mean_x * s.mean_y + c1) * (2 * s.cov + c2);
        const double denominator =
            (s.mean_x * s.mean_x + s.mean_y * s.mean_y + c1) * (s.var_x + s.var_y + c2);
        total += numerator / denominator;
        ++count;
      }
  return total / static_cast<double>(count);
}

double keypoint_error(const std::vector<Keypoint>& pred, const std::vector<Keypoint>& gt,
                      double normalizer) {
  if (pred.size() != gt.size()) throw std::invalid_argument("keypoint_error: count mismatch");
  if (pred.empty()) throw std::invalid_argument("keypoint_error: empty keypoint lists");
  if (normalizer <= 0.0) throw std::invalid_argument("keypoint_error: normalizer must be > 0");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    total += std::hypot(pred[i].row - gt[i].row, pred[i].col - gt[i].col);
  return total / (static_cast<double>(pred.size()) * normalizer);
}

ClassificationMetrics classification_metrics(const std::vector<int>& preds,
                                             const std::vector<int>& gts) {
  if (preds.empty()) throw std::invalid_argument("classification_metrics: empty input");
  if (preds.size() != gts.size())
    throw std::invalid_argument("classification_metrics: length mismatch");
  ClassificationMetrics m;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == 1 && gts[i] == 1) ++m.tp;
    else if (preds[i] == 1 && gts[i] == 0) ++m.fp;
    else if (preds[i] == 0 && gts[i] == 1) ++m.fn;
    else ++m.tn;
  }
  const long total = m.tp + m.fp + m.tn + m.fn;
  m.accuracy_percent = 100.0 * static_cast<double>(m.tp + m.tn) / static_cast<double>(total);
  if (m.tp + m.fp == 0) {
    m.precision_degenerate = true;
  } else {
    m.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
  }
  if (m.tp + m.fn == 0) {
    m.recall_degenerate = true;
  } else {
    m.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
  }
  if (m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  } else {
    m.f1_degenerate = true;
  }
  return m;
}

}  // namespace sia
