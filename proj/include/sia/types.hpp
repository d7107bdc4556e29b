#pragma once

#include <Eigen/Dense>

#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace sia {

using Array = Eigen::ArrayXd;

// Raised when a computation produces NaN/Inf. Carries the offending
// iteration or sample index when one is known (-1 otherwise).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg, long index = -1)
      : std::runtime_error(index >= 0 ? msg + " (index " + std::to_string(index) + ")" : msg),
        index_(index) {}
  long index() const { return index_; }

 private:
  long index_;
};

struct Shape {
  int height = 0;
  int width = 0;
  int channels = 0;
  long size() const { return static_cast<long>(height) * width * channels; }
  bool operator==(const Shape&) const = default;
};

// H x W x C image with values in [0,1], stored flat in row-major
// (row, col, channel) order.
struct ImageTensor {
  int height = 0;
  int width = 0;
  int channels = 0;
  Array data;

  ImageTensor() = default;
  ImageTensor(int h, int w, int c)
      : height(h), width(w), channels(c), data(Array::Zero(static_cast<long>(h) * w * c)) {}

  static ImageTensor from_data(int h, int w, int c, Array values) {
    ImageTensor img;
    img.height = h;
    img.width = w;
    img.channels = c;
    if (values.size() != static_cast<long>(h) * w * c)
      throw std::invalid_argument("ImageTensor: data size does not match shape");
    img.data = std::move(values);
    return img;
  }

  long index(int r, int c, int ch) const {
    return (static_cast<long>(r) * width + c) * channels + ch;
  }
  double& at(int r, int c, int ch) { return data[index(r, c, ch)]; }
  double at(int r, int c, int ch) const { return data[index(r, c, ch)]; }

  long size() const { return data.size(); }
  Shape shape() const { return {height, width, channels}; }
  bool same_shape(const ImageTensor& o) const { return shape() == o.shape(); }
  bool in_unit_range(double slack = 0.0) const {
    return (data >= -slack).all() && (data <= 1.0 + slack).all();
  }
};

// Named vector of semantic attribute intensities in [0,1].
struct AttributeVector {
  std::vector<std::string> names;
  Array values;

  AttributeVector() = default;
  AttributeVector(std::vector<std::string> n, Array v) : names(std::move(n)), values(std::move(v)) {
    if (static_cast<long>(names.size()) != values.size())
      throw std::invalid_argument("AttributeVector: names/values length mismatch");
  }

  int size() const { return static_cast<int>(values.size()); }
};

struct GradientBundle {
  Array grad_image;
  Array grad_attributes;

  bool finite() const {
    return grad_image.isFinite().all() && grad_attributes.isFinite().all();
  }
};

struct Keypoint {
  double row = 0.0;
  double col = 0.0;
};

enum class ModelKind { kBinaryClassifier, kKeypointDetector };

// Classifier ground truth is a binary label; detector ground truth is the
// keypoint list.
using GroundTruth = std::variant<int, std::vector<Keypoint>>;

struct Prediction {
  ModelKind kind = ModelKind::kBinaryClassifier;
  double probability = 0.0;         // classifier
  int label = 0;                    // classifier
  std::vector<Keypoint> keypoints;  // detector
};

// Differentiable target model contract. loss_gradient must agree with the
// finite-difference oracle (see check_gradient).
class TargetModel {
 public:
  virtual ~TargetModel() = default;
  virtual ModelKind kind() const = 0;
  virtual Shape input_shape() const = 0;
  virtual Prediction predict(const ImageTensor& image) const = 0;
  virtual double loss(const ImageTensor& image, const GroundTruth& truth) const = 0;
  virtual Array loss_gradient(const ImageTensor& image, const GroundTruth& truth) const = 0;
  virtual std::unique_ptr<TargetModel> clone() const = 0;
};

// Differentiable attribute-conditioned generator contract.
// decode(encode(x), a) must land in [0,1]; pullback must pass the
// finite-difference oracle.
class AttributeGenerator {
 public:
  virtual ~AttributeGenerator() = default;
  virtual Shape base_shape() const = 0;
  virtual int attribute_count() const = 0;
  virtual const std::vector<std::string>& attribute_names() const = 0;
  virtual ImageTensor encode(const ImageTensor& image) const = 0;
  virtual ImageTensor decode(const ImageTensor& latent, const AttributeVector& attrs) const = 0;
  // Gradient of sum(upstream * decode(latent, attrs)) with respect to the
  // latent image and the attribute vector.
  virtual GradientBundle pullback(const ImageTensor& latent, const AttributeVector& attrs,
                                  const Array& upstream) const = 0;
};

}  // namespace sia
