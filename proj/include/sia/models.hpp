#pragma once

#include "sia/toyworld.hpp"
#include "sia/types.hpp"

#include <cstdint>
#include <vector>

namespace sia {

// Extends the target-model contract with the hooks training, fine-tuning
// and checkpointing need.
class TrainableModel : public TargetModel {
 public:
  // One gradient-descent step on a weighted batch. Classifier targets may
  // be soft labels in [0,1] (encoded as the int/keypoint ground truth for
  // hard labels, see fit_step overloads on the concrete types).
  virtual void gradient_step(const std::vector<ImageTensor>& images,
                             const std::vector<GroundTruth>& truths, const Array& weights,
                             double lr) = 0;
  virtual Array parameters() const = 0;
  virtual void set_parameters(const Array& params) = 0;
};

// Tanh MLP over the flattened image with a sigmoid output; binary
// cross-entropy loss.
class ToyClassifier final : public TrainableModel {
 public:
  ToyClassifier(int height, int width, int channels, int hidden, std::uint64_t seed);

  ModelKind kind() const override { return ModelKind::kBinaryClassifier; }
  Shape input_shape() const override { return {height_, width_, channels_}; }
  Prediction predict(const ImageTensor& image) const override;
  double loss(const ImageTensor& image, const GroundTruth& truth) const override;
  Array loss_gradient(const ImageTensor& image, const GroundTruth& truth) const override;
  std::unique_ptr<TargetModel> clone() const override;

  void gradient_step(const std::vector<ImageTensor>& images,
                     const std::vector<GroundTruth>& truths, const Array& weights,
                     double lr) override;
  Array parameters() const override;
  void set_parameters(const Array& params) override;

  double logit(const Array& image_data) const;
  // One full-batch GD step on rows of X with soft targets and weights.
  void fit_step(const Eigen::MatrixXd& X, const Array& targets, const Array& weights, double lr);

  int hidden() const { return hidden_; }

 private:
  int height_, width_, channels_, hidden_;
  Eigen::MatrixXd w1_;   // hidden x D
  Eigen::VectorXd b1_;   // hidden
  Eigen::VectorXd w2_;   // hidden
  double b2_ = 0.0;
};

// One linear convolution per keypoint channel; mean-squared error against
// Gaussian ground-truth heatmaps. Predicted keypoint = argmax of the
// channel's heatmap.
class ToyKeypointDetector final : public TrainableModel {
 public:
  ToyKeypointDetector(int height, int width, int channels, int keypoints, int kernel_size,
                      double sigma, std::uint64_t seed);

  ModelKind kind() const override { return ModelKind::kKeypointDetector; }
  Shape input_shape() const override { return {height_, width_, channels_}; }
  Prediction predict(const ImageTensor& image) const override;
  double loss(const ImageTensor& image, const GroundTruth& truth) const override;
  Array loss_gradient(const ImageTensor& image, const GroundTruth& truth) const override;
  std::unique_ptr<TargetModel> clone() const override;

  void gradient_step(const std::vector<ImageTensor>& images,
                     const std::vector<GroundTruth>& truths, const Array& weights,
                     double lr) override;
  Array parameters() const override;
  void set_parameters(const Array& params) override;

  std::vector<Array> heatmaps(const ImageTensor& image) const;
  int keypoint_count() const { return keypoints_; }
  int kernel_size() const { return kernel_size_; }
  double sigma() const { return sigma_; }

 private:
  Array forward_flat(const Array& image_data) const;  // keypoints*H*W
  Array gt_flat(const std::vector<Keypoint>& pts) const;

  int height_, width_, channels_, keypoints_, kernel_size_;
  double sigma_;
  Array kernels_;  // keypoints*channels*ksize*ksize
  Array biases_;   // keypoints
};

struct ClassifierTrainParams {
  int epochs = 150;
  double lr = 0.5;
  int hidden = 16;
  std::uint64_t seed = 0;
};

struct DetectorTrainParams {
  int epochs = 220;
  double lr = 1.5;
  double sigma = 1.5;
  int kernel_size = 5;
  std::uint64_t seed = 0;
};

// Full-batch gradient descent on the train split; deterministic per seed.
std::unique_ptr<ToyClassifier> train_classifier(const ToyDataset& dataset,
                                                const ClassifierTrainParams& params);
std::unique_ptr<ToyKeypointDetector> train_keypoint_detector(const ToyDataset& dataset,
                                                             const DetectorTrainParams& params);

// Rendered train-split design matrix (one row per sample).
Eigen::MatrixXd rendered_matrix(const ToyDataset& dataset, const std::vector<long>& indices);

}  // namespace sia
