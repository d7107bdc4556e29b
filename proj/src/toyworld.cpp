#include "sia/toyworld.hpp"

#include "sia/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sia {

namespace {

constexpr std::uint64_t kTagBasis = 0xba515;
constexpr std::uint64_t kTagAnchors = 0xa2c40;
constexpr std::uint64_t kTagSample = 0x5a3b1e;

// Low-frequency value noise: coarse uniform grid, bilinear upsample.
Array smooth_field(Rng& rng, int height, int width, int channels, int grid) {
  const int gh = std::max(2, grid);
  const int gw = std::max(2, grid);
  std::vector<double> coarse(static_cast<std::size_t>(gh) * gw * channels);
  for (auto& v : coarse) v = rng.uniform01();

  Array out(static_cast<long>(height) * width * channels);
  for (int r = 0; r < height; ++r) {
    const double gr = (gh - 1) * static_cast<double>(r) / std::max(1, height - 1);
    const int r0 = std::min(gh - 2, static_cast<int>(gr));
    const double fr = gr - r0;
    for (int c = 0; c < width; ++c) {
      const double gc = (gw - 1) * static_cast<double>(c) / std::max(1, width - 1);
      const int c0 = std::min(gw - 2, static_cast<int>(gc));
      const double fc = gc - c0;
      for (int ch = 0; ch < channels; ++ch) {
        const auto at = [&](int rr, int cc) {
          return coarse[(static_cast<std::size_t>(rr) * gw + cc) * channels + ch];
        };
        const double top = at(r0, c0) * (1 - fc) + at(r0, c0 + 1) * fc;
        const double bot = at(r0 + 1, c0) * (1 - fc) + at(r0 + 1, c0 + 1) * fc;
        out[(static_cast<long>(r) * width + c) * channels + ch] = top * (1 - fr) + bot * fr;
      }
    }
  }
  return out;
}

// Quantize to the 8-bit grid so PNG round-trips are lossless.
double snap8(double v) { return std::round(v * 255.0) / 255.0; }

void stamp_marker(ImageTensor& image, const Keypoint& kp, int channel, double amplitude,
                  double sigma) {
  const int r0 = static_cast<int>(std::lround(kp.row));
  const int c0 = static_cast<int>(std::lround(kp.col));
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  for (int r = std::max(0, r0 - radius); r <= std::min(image.height - 1, r0 + radius); ++r) {
    for (int c = std::max(0, c0 - radius); c <= std::min(image.width - 1, c0 + radius); ++c) {
      const double d2 = (r - kp.row) * (r - kp.row) + (c - kp.col) * (c - kp.col);
      double& px = image.at(r, c, channel);
      px = std::clamp(px + amplitude * std::exp(-d2 / (2 * sigma * sigma)), 0.0, 1.0);
    }
  }
}

}  // namespace

std::vector<std::string> default_attribute_names(int k) {
  std::vector<std::string> names;
  names.reserve(k);
  for (int i = 0; i < k; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "attr_%02d", i);
    names.emplace_back(buf);
  }
  return names;
}

PatternBasis make_pattern_basis(int k, int height, int width, int channels, double amplitude,
                                std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("make_pattern_basis: need at least 1 pattern");
  if (amplitude <= 0.0 || amplitude > 1.0)
    throw std::invalid_argument("make_pattern_basis: amplitude must be in (0,1]");
  PatternBasis basis;
  basis.height = height;
  basis.width = width;
  basis.channels = channels;
  basis.patterns.reserve(k);

  Rng rng(mix_seed(seed, kTagBasis));
  for (int i = 0; i < k; ++i) {
    // vary spatial frequency and amplitude across attributes
    const int grid = 3 + static_cast<int>(rng.uniform_int(0, 4));
    const double amp = amplitude * (0.5 + 0.5 * static_cast<double>(i) / std::max(1, k - 1));
    Array field = smooth_field(rng, height, width, channels, grid);
    const double lo = field.minCoeff();
    const double hi = field.maxCoeff();
    const double span = std::max(hi - lo, 1e-12);
    basis.patterns.push_back(((field - lo) / span * 2.0 - 1.0) * amp);
  }

  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j)
      if ((basis.patterns[i] - basis.patterns[j]).abs().maxCoeff() < 0.05)
        throw std::runtime_error("make_pattern_basis: patterns not distinguishable");
  return basis;
}

ImageTensor render(const PatternBasis& basis, const ImageTensor& base, const AttributeVector& a) {
  if (base.shape() != basis.shape())
    throw std::invalid_argument("render: base shape does not match basis");
  if (a.size() != basis.count())
    throw std::invalid_argument("render: attribute count does not match basis");
  Array pre = base.data;
  for (int k = 0; k < basis.count(); ++k) pre += a.values[k] * basis.patterns[k];
  return ImageTensor::from_data(base.height, base.width, base.channels,
                                pre.max(0.0).min(1.0));
}

ToyGenerator::ToyGenerator(PatternBasis basis)
    : basis_(std::move(basis)), names_(default_attribute_names(basis_.count())) {}

ImageTensor ToyGenerator::decode(const ImageTensor& latent, const AttributeVector& attrs) const {
  return render(basis_, latent, attrs);
}

GradientBundle ToyGenerator::pullback(const ImageTensor& latent, const AttributeVector& attrs,
                                      const Array& upstream) const {
  if (upstream.size() != latent.size())
    throw std::invalid_argument("pullback: upstream size mismatch");
  Array pre = latent.data;
  for (int k = 0; k < basis_.count(); ++k) pre += attrs.values[k] * basis_.patterns[k];
  // clamp passes gradient only where 0 < pre < 1
  const Array masked = ((pre > 0.0) && (pre < 1.0)).cast<double>() * upstream;

  GradientBundle bundle;
  bundle.grad_image = masked;
  bundle.grad_attributes = Array(basis_.count());
  for (int k = 0; k < basis_.count(); ++k)
    bundle.grad_attributes[k] = (masked * basis_.patterns[k]).sum();
  return bundle;
}

ImageTensor ToyDataset::rendered(long index) const {
  return render(basis, samples.at(index).base_image, samples.at(index).attributes);
}

std::vector<long> ToyDataset::train_indices() const {
  std::vector<long> idx(manifest.train_count);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

std::vector<long> ToyDataset::test_indices() const {
  std::vector<long> idx(size() - manifest.train_count);
  std::iota(idx.begin(), idx.end(), manifest.train_count);
  return idx;
}

ToyDataset generate_dataset(const DatasetParams& params) {
  if (params.attribute_count < 2)
    throw std::invalid_argument("generate_dataset: attribute_count must be >= 2");
  if (params.sample_count < 1)
    throw std::invalid_argument("generate_dataset: sample_count must be >= 1");
  if (params.label_rule.attr < 0 || params.label_rule.attr >= params.attribute_count)
    throw std::invalid_argument("generate_dataset: label_rule attribute out of range");
  if (params.keypoint_count < 0)
    throw std::invalid_argument("generate_dataset: keypoint_count must be >= 0");

  ToyDataset dataset;
  DatasetManifest& m = dataset.manifest;
  m.seed = params.seed;
  m.attribute_count = params.attribute_count;
  m.sample_count = params.sample_count;
  m.height = params.height;
  m.width = params.width;
  m.channels = params.channels;
  m.train_count = params.train_count < 0 ? params.sample_count
                                         : std::min(params.train_count, params.sample_count);
  m.keypoint_count = params.keypoint_count;
  m.label_rule = params.label_rule;
  m.pattern_amplitude = params.pattern_amplitude;
  m.marker_amplitude = params.marker_amplitude;
  m.attribute_names = default_attribute_names(params.attribute_count);

  dataset.basis = make_pattern_basis(m.attribute_count, m.height, m.width, m.channels,
                                     m.pattern_amplitude, m.seed);

  // Keypoint anchors and attribute-driven shifts are dataset-level constants.
  Rng anchor_rng(mix_seed(m.seed, kTagAnchors));
  const int margin = 5;
  std::vector<Keypoint> anchors;
  std::vector<Keypoint> shifts;
  for (int j = 0; j < m.keypoint_count; ++j) {
    anchors.push_back(
        {static_cast<double>(anchor_rng.uniform_int(margin, std::max(margin, m.height - 1 - margin))),
         static_cast<double>(anchor_rng.uniform_int(margin, std::max(margin, m.width - 1 - margin)))});
    const double dr = anchor_rng.bernoulli(0.5) ? 3.0 : -3.0;
    const double dc = anchor_rng.bernoulli(0.5) ? 3.0 : -3.0;
    shifts.push_back({dr, dc});
  }

  dataset.samples.reserve(m.sample_count);
  long positives = 0;
  for (long idx = 0; idx < m.sample_count; ++idx) {
    Rng rng(mix_seed(mix_seed(m.seed, kTagSample), static_cast<std::uint64_t>(idx)));
    ToySample sample;

    Array attrs(m.attribute_count);
    for (int k = 0; k < m.attribute_count; ++k) attrs[k] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    sample.attributes = AttributeVector(m.attribute_names, attrs);
    sample.label = m.label_rule.evaluate(attrs) ? 1 : 0;
    positives += sample.label;

    Array field = smooth_field(rng, m.height, m.width, m.channels, 4);
    sample.base_image =
        ImageTensor::from_data(m.height, m.width, m.channels, 0.35 + 0.3 * field);

    for (int j = 0; j < m.keypoint_count; ++j) {
      const double drive = attrs[j % m.attribute_count];
      Keypoint kp{anchors[j].row + drive * shifts[j].row, anchors[j].col + drive * shifts[j].col};
      kp.row = std::clamp(kp.row, 0.0, static_cast<double>(m.height - 1));
      kp.col = std::clamp(kp.col, 0.0, static_cast<double>(m.width - 1));
      sample.keypoints.push_back(kp);
      stamp_marker(sample.base_image, kp, j % m.channels, m.marker_amplitude, 1.2);
    }
    for (long i = 0; i < sample.base_image.size(); ++i)
      sample.base_image.data[i] = snap8(sample.base_image.data[i]);

    dataset.samples.push_back(std::move(sample));
  }

  if (positives == 0 || positives == m.sample_count)
    m.warnings.push_back("degenerate label rule: all samples share one class");
  return dataset;
}

ToyDataset dataset_from_manifest(const DatasetManifest& manifest) {
  DatasetParams params;
  params.attribute_count = manifest.attribute_count;
  params.sample_count = manifest.sample_count;
  params.height = manifest.height;
  params.width = manifest.width;
  params.channels = manifest.channels;
  params.label_rule = manifest.label_rule;
  params.seed = manifest.seed;
  params.train_count = manifest.train_count;
  params.keypoint_count = manifest.keypoint_count;
  params.pattern_amplitude = manifest.pattern_amplitude;
  params.marker_amplitude = manifest.marker_amplitude;
  return generate_dataset(params);
}

std::vector<Array> heatmap_from_keypoints(const std::vector<Keypoint>& points, int height,
                                          int width, double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("heatmap_from_keypoints: sigma must be > 0");
  std::vector<Array> maps;
  maps.reserve(points.size());
  for (const Keypoint& kp : points) {
    if (kp.row < 0 || kp.row > height - 1 || kp.col < 0 || kp.col > width - 1)
      throw std::invalid_argument("heatmap_from_keypoints: keypoint out of bounds");
    // center on the nearest pixel so the peak is exactly 1
    const double cr = std::round(kp.row);
    const double cc = std::round(kp.col);
    Array map(static_cast<long>(height) * width);
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < width; ++c) {
        const double d2 = (r - cr) * (r - cr) + (c - cc) * (c - cc);
        map[static_cast<long>(r) * width + c] = std::exp(-d2 / (2 * sigma * sigma));
      }
    maps.push_back(std::move(map));
  }
  return maps;
}

}  // namespace sia
