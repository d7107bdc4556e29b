#pragma once

#include "sia/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sia {

// One additive pattern per attribute; the toy stand-in for a learned
// attribute direction. Entries are in [-1, 1] and patterns are pairwise
// distinguishable.
struct PatternBasis {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<Array> patterns;  // each height*width*channels

  int count() const { return static_cast<int>(patterns.size()); }
  Shape shape() const { return {height, width, channels}; }
};

// label = (attributes[attr] >= threshold)
struct LabelRule {
  int attr = 0;
  double threshold = 0.5;

  bool evaluate(const Array& attributes) const {
    return attributes[attr] >= threshold;
  }
};

struct DatasetManifest {
  std::uint64_t seed = 0;
  int attribute_count = 0;  // K
  long sample_count = 0;    // N
  int height = 0, width = 0, channels = 0;
  long train_count = 0;  // first train_count samples form the train split
  int keypoint_count = 0;
  LabelRule label_rule;
  double pattern_amplitude = 0.3;
  double marker_amplitude = 0.6;
  bool derived = false;  // true once strategies rewrite the sample list
  std::vector<std::string> warnings;
  std::vector<std::string> attribute_names;
};

struct ToySample {
  ImageTensor base_image;     // latent for the generator; markers baked in
  AttributeVector attributes;
  int label = 0;
  std::vector<Keypoint> keypoints;
};

struct DatasetParams {
  int attribute_count = 6;
  long sample_count = 100;
  int height = 32, width = 32, channels = 3;
  LabelRule label_rule;
  std::uint64_t seed = 0;
  long train_count = -1;  // default: all samples
  int keypoint_count = 3;
  double pattern_amplitude = 0.3;
  double marker_amplitude = 0.6;
};

struct ToyDataset {
  DatasetManifest manifest;
  PatternBasis basis;
  std::vector<ToySample> samples;

  long size() const { return static_cast<long>(samples.size()); }
  long train_count() const { return manifest.train_count; }
  long test_count() const { return size() - manifest.train_count; }

  // The observable image of a sample: render(basis, base, attributes).
  ImageTensor rendered(long index) const;

  std::vector<long> train_indices() const;
  std::vector<long> test_indices() const;
};

// Deterministic smooth pattern stack. Per-pattern amplitudes are graded so
// attributes differ in visual strength.
PatternBasis make_pattern_basis(int k, int height, int width, int channels, double amplitude,
                                std::uint64_t seed);

// Analytic decode: clamp(base + sum_k a_k * P_k, 0, 1).
ImageTensor render(const PatternBasis& basis, const ImageTensor& base, const AttributeVector& a);

ToyDataset generate_dataset(const DatasetParams& params);

// Regenerates the dataset a manifest describes; bit-identical to the
// original generation.
ToyDataset dataset_from_manifest(const DatasetManifest& manifest);

// Per-keypoint 2-D Gaussian heatmaps at input resolution; peak exactly 1.0
// at the pixel nearest each keypoint.
std::vector<Array> heatmap_from_keypoints(const std::vector<Keypoint>& points, int height,
                                          int width, double sigma);

std::vector<std::string> default_attribute_names(int k);

// The analytic attribute-conditioned generator: encode is the identity on
// the stored base image, decode is render().
class ToyGenerator final : public AttributeGenerator {
 public:
  explicit ToyGenerator(PatternBasis basis);

  Shape base_shape() const override { return basis_.shape(); }
  int attribute_count() const override { return basis_.count(); }
  const std::vector<std::string>& attribute_names() const override { return names_; }
  ImageTensor encode(const ImageTensor& image) const override { return image; }
  ImageTensor decode(const ImageTensor& latent, const AttributeVector& attrs) const override;
  GradientBundle pullback(const ImageTensor& latent, const AttributeVector& attrs,
                          const Array& upstream) const override;

  const PatternBasis& basis() const { return basis_; }

 private:
  PatternBasis basis_;
  std::vector<std::string> names_;
};

}  // namespace sia
