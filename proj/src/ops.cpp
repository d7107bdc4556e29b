#include "sia/ops.hpp"

#include "sia/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace sia {

namespace {

void require_same_size(const Array& a, const Array& b, const char* what) {
  if (a.size() != b.size())
    throw std::invalid_argument(std::string(what) + ": shape mismatch (" +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
}

}  // namespace

Array signed_step(const Array& v, const Array& grad, double eta) {
  require_same_size(v, grad, "signed_step");
  if (eta < 0.0) throw std::invalid_argument("signed_step: eta must be >= 0");
  if (!grad.isFinite().all()) throw NumericError("signed_step: non-finite gradient");
  return v + eta * sign_of(grad);
}

Array project_linf(const Array& v, const Array& center, double epsilon, double lo, double hi) {
  return project_linf(v, center, Array::Constant(center.size(), epsilon), lo, hi);
}

Array project_linf(const Array& v, const Array& center, const Array& epsilon, double lo,
                   double hi) {
  require_same_size(v, center, "project_linf");
  require_same_size(v, epsilon, "project_linf(epsilon)");
  if ((epsilon < 0.0).any()) throw std::invalid_argument("project_linf: epsilon must be >= 0");
  if (lo > hi) throw std::invalid_argument("project_linf: lo > hi");
  return v.max(center - epsilon).min(center + epsilon).max(lo).min(hi);
}

Array finite_difference_gradient(const std::function<double(const Array&)>& f, const Array& point,
                                 double h) {
  if (h <= 0.0) throw std::invalid_argument("finite_difference_gradient: h must be > 0");
  Array grad(point.size());
  Array probe = point;
  for (long i = 0; i < point.size(); ++i) {
    const double original = probe[i];
    probe[i] = original + h;
    const double fp = f(probe);
    probe[i] = original - h;
    const double fm = f(probe);
    probe[i] = original;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("finite_difference_gradient: function returned non-finite value", i);
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

namespace {

std::vector<long> sample_coords(Rng& rng, long dim, int want) {
  std::vector<long> coords;
  const long n = std::min<long>(dim, want);
  coords.reserve(n);
  for (long i = 0; i < n; ++i) coords.push_back(rng.uniform_int(0, dim - 1));
  std::sort(coords.begin(), coords.end());
  coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
  return coords;
}

double central_difference(const std::function<double(double)>& f1d, double x, double h) {
  const double fp = f1d(x + h);
  const double fm = f1d(x - h);
  if (!std::isfinite(fp) || !std::isfinite(fm))
    throw NumericError("check_gradient: non-finite probe value");
  return (fp - fm) / (2.0 * h);
}

}  // namespace

GradientCheckReport check_gradient(const TargetModel& model, const GradientCheckOptions& opts) {
  if (opts.probes < 1) throw std::invalid_argument("check_gradient: probes must be >= 1");
  const Shape shape = model.input_shape();
  Rng rng(mix_seed(opts.seed, 0x6d6f64656cull));

  GradientCheckReport report;
  report.probes = opts.probes;
  for (int p = 0; p < opts.probes; ++p) {
    ImageTensor image(shape.height, shape.width, shape.channels);
    for (long i = 0; i < image.size(); ++i) image.data[i] = rng.uniform(0.05, 0.95);

    GroundTruth truth;
    if (model.kind() == ModelKind::kBinaryClassifier) {
      truth = static_cast<int>(rng.uniform_int(0, 1));
    } else {
      std::vector<Keypoint> pts;
      const std::size_t count = model.predict(image).keypoints.size();
      for (std::size_t j = 0; j < count; ++j)
        pts.push_back({static_cast<double>(rng.uniform_int(2, shape.height - 3)),
                       static_cast<double>(rng.uniform_int(2, shape.width - 3))});
      truth = std::move(pts);
    }

    const Array analytic = model.loss_gradient(image, truth);
    if (!analytic.isFinite().all()) throw NumericError("check_gradient: non-finite gradient", p);

    for (long coord : sample_coords(rng, image.size(), opts.coords_per_probe)) {
      const double numeric = central_difference(
          [&](double x) {
            ImageTensor probe = image;
            probe.data[coord] = x;
            return model.loss(probe, truth);
          },
          image.data[coord], opts.h);
      report.max_rel_error = std::max(report.max_rel_error, relative_error(analytic[coord], numeric));
      ++report.coords_checked;
    }
  }
  report.pass = report.max_rel_error <= opts.tol;
  return report;
}

GradientCheckReport check_gradient(const AttributeGenerator& generator,
                                   const GradientCheckOptions& opts, double clip_margin) {
  if (opts.probes < 1) throw std::invalid_argument("check_gradient: probes must be >= 1");
  const Shape shape = generator.base_shape();
  const int k = generator.attribute_count();
  Rng rng(mix_seed(opts.seed, 0x67656e6572ull));

  GradientCheckReport report;
  report.probes = opts.probes;
  for (int p = 0; p < opts.probes; ++p) {
    ImageTensor latent(shape.height, shape.width, shape.channels);
    for (long i = 0; i < latent.size(); ++i) latent.data[i] = rng.uniform(0.1, 0.9);
    Array attr_values(k);
    for (int i = 0; i < k; ++i) attr_values[i] = rng.uniform(0.05, 0.95);
    const AttributeVector attrs(generator.attribute_names(), attr_values);

    // Mask out pixels whose pre-clamp value is too close to a clamp
    // threshold; central differences are invalid there. decode() clamps at
    // 0 and 1, so probing decode twice recovers which pixels moved freely.
    Array upstream(latent.size());
    for (long i = 0; i < latent.size(); ++i) upstream[i] = rng.normal();
    const ImageTensor decoded = generator.decode(latent, attrs);
    for (long i = 0; i < latent.size(); ++i) {
      const double v = decoded.data[i];
      if (v <= clip_margin || v >= 1.0 - clip_margin) upstream[i] = 0.0;
    }

    const auto functional = [&](const ImageTensor& img, const AttributeVector& a) {
      return (generator.decode(img, a).data * upstream).sum();
    };

    const GradientBundle bundle = generator.pullback(latent, attrs, upstream);
    if (!bundle.finite()) throw NumericError("check_gradient: non-finite pullback", p);

    for (long coord : sample_coords(rng, latent.size(), opts.coords_per_probe)) {
      const double numeric = central_difference(
          [&](double x) {
            ImageTensor probe = latent;
            probe.data[coord] = x;
            return functional(probe, attrs);
          },
          latent.data[coord], opts.h);
      report.max_rel_error =
          std::max(report.max_rel_error, relative_error(bundle.grad_image[coord], numeric));
      ++report.coords_checked;
    }
    for (int coord = 0; coord < k; ++coord) {
      const double numeric = central_difference(
          [&](double x) {
            Array probe = attr_values;
            probe[coord] = x;
            return functional(latent, AttributeVector(generator.attribute_names(), probe));
          },
          attr_values[coord], opts.h);
      report.max_rel_error =
          std::max(report.max_rel_error, relative_error(bundle.grad_attributes[coord], numeric));
      ++report.coords_checked;
    }
  }
  report.pass = report.max_rel_error <= opts.tol;
  return report;
}

}  // namespace sia
