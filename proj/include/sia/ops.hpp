#pragma once

#include "sia/types.hpp"

#include <cstdint>
#include <functional>

namespace sia {

// Elementwise sign with sign(0) = 0, so zero-gradient coordinates are
// never perturbed.
template <typename Derived>
auto sign_of(const Eigen::ArrayBase<Derived>& g) {
  using Scalar = typename Derived::Scalar;
  return g.unaryExpr([](Scalar x) -> Scalar {
    return x > Scalar(0) ? Scalar(1) : (x < Scalar(0) ? Scalar(-1) : Scalar(0));
  });
}

// v + eta * sign(grad). Inputs are untouched.
Array signed_step(const Array& v, const Array& grad, double eta);

// Clip each element to [center - eps, center + eps], then to [lo, hi].
// Idempotent.
Array project_linf(const Array& v, const Array& center, double epsilon, double lo, double hi);

// Per-coordinate radius variant (used for frozen attribute caps).
Array project_linf(const Array& v, const Array& center, const Array& epsilon, double lo, double hi);

// Central-difference gradient estimate of a scalar function.
Array finite_difference_gradient(const std::function<double(const Array&)>& f, const Array& point,
                                 double h);

struct GradientCheckReport {
  bool pass = false;
  double max_rel_error = 0.0;
  int probes = 0;
  int coords_checked = 0;
};

struct GradientCheckOptions {
  int probes = 8;
  double tol = 1e-3;
  std::uint64_t seed = 0;
  double h = 1e-4;
  int coords_per_probe = 24;
};

// Compares the model's analytic loss gradient against finite differences on
// random probe images and random coordinate subsets. Deterministic per seed.
GradientCheckReport check_gradient(const TargetModel& model, const GradientCheckOptions& opts);

// Same oracle for a generator's pullback: probes a random linear functional
// of the decoded image. Coordinates whose pre-clamp value sits within
// `clip_margin` of the clamp thresholds are excluded from the functional,
// since the clamp is not differentiable there.
GradientCheckReport check_gradient(const AttributeGenerator& generator,
                                   const GradientCheckOptions& opts, double clip_margin = 1e-2);

double relative_error(double analytic, double numeric);

}  // namespace sia
