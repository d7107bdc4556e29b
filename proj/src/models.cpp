#include "sia/models.hpp"

#include "sia/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sia {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Numerically stable BCE for a single logit and soft target.
double bce_from_logit(double z, double target) {
  const double softplus = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
  return softplus - target * z;
}

int hard_label(const GroundTruth& truth) {
  const int* label = std::get_if<int>(&truth);
  if (!label) throw std::invalid_argument("classifier ground truth must be a binary label");
  if (*label != 0 && *label != 1)
    throw std::invalid_argument("classifier ground truth must be 0 or 1");
  return *label;
}

const std::vector<Keypoint>& keypoint_truth(const GroundTruth& truth) {
  const auto* pts = std::get_if<std::vector<Keypoint>>(&truth);
  if (!pts) throw std::invalid_argument("detector ground truth must be a keypoint list");
  return *pts;
}

}  // namespace

// ---------------------------------------------------------------------------
// ToyClassifier

ToyClassifier::ToyClassifier(int height, int width, int channels, int hidden, std::uint64_t seed)
    : height_(height), width_(width), channels_(channels), hidden_(hidden) {
  if (hidden < 1) throw std::invalid_argument("ToyClassifier: hidden must be >= 1");
  const long d = input_shape().size();
  Rng rng(mix_seed(seed, 0xc1a55));
  w1_.resize(hidden_, d);
  for (long i = 0; i < w1_.size(); ++i) w1_.data()[i] = 3.0 * rng.normal() / std::sqrt(double(d));
  b1_ = Eigen::VectorXd::Zero(hidden_);
  w2_.resize(hidden_);
  for (int i = 0; i < hidden_; ++i) w2_[i] = rng.normal() / std::sqrt(double(hidden_));
  b2_ = 0.0;
}

double ToyClassifier::logit(const Array& x) const {
  const Eigen::VectorXd t = (w1_ * (x - 0.5).matrix() + b1_).array().tanh();
  return w2_.dot(t) + b2_;
}

Prediction ToyClassifier::predict(const ImageTensor& image) const {
  if (image.shape() != input_shape()) throw std::invalid_argument("predict: wrong image shape");
  Prediction out;
  out.kind = kind();
  out.probability = sigmoid(logit(image.data));
  out.label = out.probability >= 0.5 ? 1 : 0;
  return out;
}

double ToyClassifier::loss(const ImageTensor& image, const GroundTruth& truth) const {
  if (image.shape() != input_shape()) throw std::invalid_argument("loss: wrong image shape");
  return bce_from_logit(logit(image.data), hard_label(truth));
}

Array ToyClassifier::loss_gradient(const ImageTensor& image, const GroundTruth& truth) const {
  if (image.shape() != input_shape())
    throw std::invalid_argument("loss_gradient: wrong image shape");
  const int c = hard_label(truth);
  const Eigen::VectorXd z = w1_ * (image.data - 0.5).matrix() + b1_;
  const Eigen::ArrayXd t = z.array().tanh();
  const double p = sigmoid(w2_.dot(t.matrix()) + b2_);
  // dL/dlogit = p - c; back through w2, tanh, w1
  const Eigen::VectorXd hidden_grad = (p - c) * (w2_.array() * (1.0 - t * t)).matrix();
  return (w1_.transpose() * hidden_grad).array();
}

std::unique_ptr<TargetModel> ToyClassifier::clone() const {
  return std::make_unique<ToyClassifier>(*this);
}

void ToyClassifier::fit_step(const Eigen::MatrixXd& X, const Array& targets, const Array& weights,
                             double lr) {
  const long n = X.rows();
  if (targets.size() != n || weights.size() != n)
    throw std::invalid_argument("fit_step: batch size mismatch");
  // forward on centered inputs
  Eigen::MatrixXd Xc = X.array() - 0.5;
  Eigen::MatrixXd Z = (w1_ * Xc.transpose()).colwise() + b1_;  // hidden x n
  Eigen::MatrixXd T = Z.array().tanh();
  Eigen::ArrayXd logits = (T.transpose() * w2_).array() + b2_;
  Eigen::ArrayXd p = logits.unaryExpr([](double z) { return sigmoid(z); });
  // weighted mean loss => scale residuals by weight / n
  Eigen::ArrayXd delta = (p - targets) * weights / double(n);
  // backward
  Eigen::VectorXd grad_w2 = T * delta.matrix();
  const double grad_b2 = delta.sum();
  Eigen::MatrixXd hidden_delta =
      (T.array().square() * -1.0 + 1.0).matrix();  // 1 - tanh^2, hidden x n
  hidden_delta = (hidden_delta.array().rowwise() * delta.transpose()).matrix();
  hidden_delta = (hidden_delta.array().colwise() * w2_.array()).matrix();
  Eigen::MatrixXd grad_w1 = hidden_delta * Xc;
  Eigen::VectorXd grad_b1 = hidden_delta.rowwise().sum();

  w1_ -= lr * grad_w1;
  b1_ -= lr * grad_b1;
  w2_ -= lr * grad_w2;
  b2_ -= lr * grad_b2;
}

void ToyClassifier::gradient_step(const std::vector<ImageTensor>& images,
                                  const std::vector<GroundTruth>& truths, const Array& weights,
                                  double lr) {
  if (images.empty()) throw std::invalid_argument("gradient_step: empty batch");
  if (images.size() != truths.size())
    throw std::invalid_argument("gradient_step: images/truths mismatch");
  const long n = static_cast<long>(images.size());
  Eigen::MatrixXd X(n, input_shape().size());
  Array targets(n);
  for (long i = 0; i < n; ++i) {
    X.row(i) = images[i].data.matrix().transpose();
    targets[i] = hard_label(truths[i]);
  }
  fit_step(X, targets, weights, lr);
}

Array ToyClassifier::parameters() const {
  Array out(w1_.size() + b1_.size() + w2_.size() + 1);
  long at = 0;
  out.segment(at, w1_.size()) = Eigen::Map<const Eigen::VectorXd>(w1_.data(), w1_.size());
  at += w1_.size();
  out.segment(at, b1_.size()) = b1_;
  at += b1_.size();
  out.segment(at, w2_.size()) = w2_;
  at += w2_.size();
  out[at] = b2_;
  return out;
}

void ToyClassifier::set_parameters(const Array& params) {
  if (params.size() != w1_.size() + b1_.size() + w2_.size() + 1)
    throw std::invalid_argument("set_parameters: wrong parameter count");
  long at = 0;
  Eigen::Map<Eigen::VectorXd>(w1_.data(), w1_.size()) = params.segment(at, w1_.size());
  at += w1_.size();
  b1_ = params.segment(at, b1_.size());
  at += b1_.size();
  w2_ = params.segment(at, w2_.size());
  at += w2_.size();
  b2_ = params[at];
}

// ---------------------------------------------------------------------------
// ToyKeypointDetector

ToyKeypointDetector::ToyKeypointDetector(int height, int width, int channels, int keypoints,
                                         int kernel_size, double sigma, std::uint64_t seed)
    : height_(height),
      width_(width),
      channels_(channels),
      keypoints_(keypoints),
      kernel_size_(kernel_size),
      sigma_(sigma) {
  if (keypoints < 1) throw std::invalid_argument("ToyKeypointDetector: keypoints must be >= 1");
  if (kernel_size < 1 || kernel_size % 2 == 0)
    throw std::invalid_argument("ToyKeypointDetector: kernel_size must be odd and positive");
  if (sigma <= 0.0) throw std::invalid_argument("ToyKeypointDetector: sigma must be > 0");
  Rng rng(mix_seed(seed, 0xde7ec7));
  kernels_ = Array(static_cast<long>(keypoints_) * channels_ * kernel_size_ * kernel_size_);
  for (long i = 0; i < kernels_.size(); ++i)
    kernels_[i] = 0.1 * rng.normal() / kernel_size_;
  biases_ = Array::Zero(keypoints_);
}

Array ToyKeypointDetector::forward_flat(const Array& x) const {
  const int o = kernel_size_ / 2;
  Array maps = Array::Zero(static_cast<long>(keypoints_) * height_ * width_);
  for (int j = 0; j < keypoints_; ++j) {
    for (int r = 0; r < height_; ++r) {
      for (int c = 0; c < width_; ++c) {
        double acc = biases_[j];
        for (int ch = 0; ch < channels_; ++ch) {
          const long kbase =
              ((static_cast<long>(j) * channels_ + ch) * kernel_size_) * kernel_size_;
          for (int u = 0; u < kernel_size_; ++u) {
            const int rr = r + u - o;
            if (rr < 0 || rr >= height_) continue;
            for (int v = 0; v < kernel_size_; ++v) {
              const int cc = c + v - o;
              if (cc < 0 || cc >= width_) continue;
              acc += kernels_[kbase + static_cast<long>(u) * kernel_size_ + v] *
                     (x[(static_cast<long>(rr) * width_ + cc) * channels_ + ch] - 0.5);
            }
          }
        }
        maps[(static_cast<long>(j) * height_ + r) * width_ + c] = acc;
      }
    }
  }
  return maps;
}

Array ToyKeypointDetector::gt_flat(const std::vector<Keypoint>& pts) const {
  if (static_cast<int>(pts.size()) != keypoints_)
    throw std::invalid_argument("detector ground truth has wrong keypoint count");
  const auto maps = heatmap_from_keypoints(pts, height_, width_, sigma_);
  Array flat(static_cast<long>(keypoints_) * height_ * width_);
  for (int j = 0; j < keypoints_; ++j)
    flat.segment(static_cast<long>(j) * height_ * width_, static_cast<long>(height_) * width_) =
        maps[j];
  return flat;
}

std::vector<Array> ToyKeypointDetector::heatmaps(const ImageTensor& image) const {
  const Array flat = forward_flat(image.data);
  std::vector<Array> maps;
  maps.reserve(keypoints_);
  for (int j = 0; j < keypoints_; ++j)
    maps.push_back(
        flat.segment(static_cast<long>(j) * height_ * width_, static_cast<long>(height_) * width_));
  return maps;
}

Prediction ToyKeypointDetector::predict(const ImageTensor& image) const {
  if (image.shape() != input_shape()) throw std::invalid_argument("predict: wrong image shape");
  const Array flat = forward_flat(image.data);
  Prediction out;
  out.kind = kind();
  for (int j = 0; j < keypoints_; ++j) {
    long best = 0;
    double best_val = flat[static_cast<long>(j) * height_ * width_];
    for (long i = 1; i < static_cast<long>(height_) * width_; ++i) {
      const double v = flat[static_cast<long>(j) * height_ * width_ + i];
      if (v > best_val) {
        best_val = v;
        best = i;
      }
    }
    out.keypoints.push_back(
        {static_cast<double>(best / width_), static_cast<double>(best % width_)});
  }
  return out;
}

double ToyKeypointDetector::loss(const ImageTensor& image, const GroundTruth& truth) const {
  if (image.shape() != input_shape()) throw std::invalid_argument("loss: wrong image shape");
  const Array diff = forward_flat(image.data) - gt_flat(keypoint_truth(truth));
  return diff.square().mean();
}

Array ToyKeypointDetector::loss_gradient(const ImageTensor& image, const GroundTruth& truth) const {
  if (image.shape() != input_shape())
    throw std::invalid_argument("loss_gradient: wrong image shape");
  const Array residual = forward_flat(image.data) - gt_flat(keypoint_truth(truth));
  const double scale = 2.0 / static_cast<double>(residual.size());
  const int o = kernel_size_ / 2;
  Array grad = Array::Zero(image.size());
  for (int j = 0; j < keypoints_; ++j) {
    for (int r = 0; r < height_; ++r) {
      for (int c = 0; c < width_; ++c) {
        const double g = scale * residual[(static_cast<long>(j) * height_ + r) * width_ + c];
        if (g == 0.0) continue;
        for (int ch = 0; ch < channels_; ++ch) {
          const long kbase =
              ((static_cast<long>(j) * channels_ + ch) * kernel_size_) * kernel_size_;
          for (int u = 0; u < kernel_size_; ++u) {
            const int rr = r + u - o;
            if (rr < 0 || rr >= height_) continue;
            for (int v = 0; v < kernel_size_; ++v) {
              const int cc = c + v - o;
              if (cc < 0 || cc >= width_) continue;
              grad[(static_cast<long>(rr) * width_ + cc) * channels_ + ch] +=
                  g * kernels_[kbase + static_cast<long>(u) * kernel_size_ + v];
            }
          }
        }
      }
    }
  }
  return grad;
}

std::unique_ptr<TargetModel> ToyKeypointDetector::clone() const {
  return std::make_unique<ToyKeypointDetector>(*this);
}

void ToyKeypointDetector::gradient_step(const std::vector<ImageTensor>& images,
                                        const std::vector<GroundTruth>& truths,
                                        const Array& weights, double lr) {
  if (images.empty()) throw std::invalid_argument("gradient_step: empty batch");
  if (images.size() != truths.size())
    throw std::invalid_argument("gradient_step: images/truths mismatch");
  const long n = static_cast<long>(images.size());
  const int o = kernel_size_ / 2;
  Array grad_k = Array::Zero(kernels_.size());
  Array grad_b = Array::Zero(keypoints_);
  for (long s = 0; s < n; ++s) {
    const Array& x = images[s].data;
    const Array residual = forward_flat(x) - gt_flat(keypoint_truth(truths[s]));
    const double scale = 2.0 * weights[s] / (static_cast<double>(residual.size()) * n);
    for (int j = 0; j < keypoints_; ++j) {
      for (int r = 0; r < height_; ++r) {
        for (int c = 0; c < width_; ++c) {
          const double g = scale * residual[(static_cast<long>(j) * height_ + r) * width_ + c];
          if (g == 0.0) continue;
          grad_b[j] += g;
          for (int ch = 0; ch < channels_; ++ch) {
            const long kbase =
                ((static_cast<long>(j) * channels_ + ch) * kernel_size_) * kernel_size_;
            for (int u = 0; u < kernel_size_; ++u) {
              const int rr = r + u - o;
              if (rr < 0 || rr >= height_) continue;
              for (int v = 0; v < kernel_size_; ++v) {
                const int cc = c + v - o;
                if (cc < 0 || cc >= width_) continue;
                grad_k[kbase + static_cast<long>(u) * kernel_size_ + v] +=
                    g * (x[(static_cast<long>(rr) * width_ + cc) * channels_ + ch] - 0.5);
              }
            }
          }
        }
      }
    }
  }
  kernels_ -= lr * grad_k;
  biases_ -= lr * grad_b;
}

Array ToyKeypointDetector::parameters() const {
  Array out(kernels_.size() + biases_.size());
  out << kernels_, biases_;
  return out;
}

void ToyKeypointDetector::set_parameters(const Array& params) {
  if (params.size() != kernels_.size() + biases_.size())
    throw std::invalid_argument("set_parameters: wrong parameter count");
  kernels_ = params.head(kernels_.size());
  biases_ = params.tail(biases_.size());
}

// ---------------------------------------------------------------------------
// Training

Eigen::MatrixXd rendered_matrix(const ToyDataset& dataset, const std::vector<long>& indices) {
  if (indices.empty()) throw std::invalid_argument("rendered_matrix: empty index list");
  const long d = dataset.basis.shape().size();
  Eigen::MatrixXd X(static_cast<long>(indices.size()), d);
  for (std::size_t i = 0; i < indices.size(); ++i)
    X.row(static_cast<long>(i)) = dataset.rendered(indices[i]).data.matrix().transpose();
  return X;
}

std::unique_ptr<ToyClassifier> train_classifier(const ToyDataset& dataset,
                                                const ClassifierTrainParams& params) {
  if (params.epochs < 0) throw std::invalid_argument("train_classifier: epochs must be >= 0");
  auto model = std::make_unique<ToyClassifier>(dataset.manifest.height, dataset.manifest.width,
                                               dataset.manifest.channels, params.hidden,
                                               params.seed);
  if (params.epochs == 0) return model;

  const auto indices = dataset.train_indices();
  if (indices.empty()) throw std::invalid_argument("train_classifier: empty train split");
  Array targets(static_cast<long>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i)
    targets[static_cast<long>(i)] = dataset.samples[indices[i]].label;
  if ((targets == targets[0]).all())
    throw std::invalid_argument("train_classifier: train split contains a single class");

  const Eigen::MatrixXd X = rendered_matrix(dataset, indices);
  const Array weights = Array::Ones(targets.size());
  for (int epoch = 0; epoch < params.epochs; ++epoch)
    model->fit_step(X, targets, weights, params.lr);
  return model;
}

std::unique_ptr<ToyKeypointDetector> train_keypoint_detector(const ToyDataset& dataset,
                                                             const DetectorTrainParams& params) {
  if (params.epochs < 0)
    throw std::invalid_argument("train_keypoint_detector: epochs must be >= 0");
  if (dataset.manifest.keypoint_count < 1)
    throw std::invalid_argument("train_keypoint_detector: dataset has no keypoints");
  auto model = std::make_unique<ToyKeypointDetector>(
      dataset.manifest.height, dataset.manifest.width, dataset.manifest.channels,
      dataset.manifest.keypoint_count, params.kernel_size, params.sigma, params.seed);
  if (params.epochs == 0) return model;

  const auto indices = dataset.train_indices();
  if (indices.empty()) throw std::invalid_argument("train_keypoint_detector: empty train split");
  std::vector<ImageTensor> images;
  std::vector<GroundTruth> truths;
  images.reserve(indices.size());
  for (long idx : indices) {
    images.push_back(dataset.rendered(idx));
    truths.emplace_back(dataset.samples[idx].keypoints);
  }
  const Array weights = Array::Ones(static_cast<long>(indices.size()));
  for (int epoch = 0; epoch < params.epochs; ++epoch)
    model->gradient_step(images, truths, weights, params.lr);
  return model;
}

}  // namespace sia
