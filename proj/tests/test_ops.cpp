#include "sia/ops.hpp"

#include "sia/rng.hpp"
#include "sia/toyworld.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace sia;

namespace {

Array arr(std::initializer_list<double> values) {
  Array a(static_cast<long>(values.size()));
  long i = 0;
  for (double v : values) a[i++] = v;
  return a;
}

}  // namespace

TEST_CASE("signed_step follows the sign of the gradient") {
  const Array out = signed_step(arr({0.5, 0.5}), arr({0.3, -0.2}), 0.1);
  CHECK(out[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(out[1] == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("signed_step treats zero gradient as no movement") {
  const Array out = signed_step(arr({0.2}), arr({0.0}), 0.1);
  CHECK(out[0] == 0.2);
}

TEST_CASE("signed_step hand evaluation with mixed magnitudes") {
  const Array out = signed_step(arr({0.1, 0.9, 0.5}), arr({-5.0, 1e-9, 7.0}), 0.05);
  CHECK(out[0] == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(out[1] == doctest::Approx(0.95).epsilon(1e-12));
  CHECK(out[2] == doctest::Approx(0.55).epsilon(1e-12));
}

TEST_CASE("signed_step validates inputs") {
  CHECK_THROWS_AS(signed_step(arr({1.0}), arr({1.0, 2.0}), 0.1), std::invalid_argument);
  CHECK_THROWS_AS(signed_step(arr({1.0}), arr({1.0}), -0.1), std::invalid_argument);
  CHECK_THROWS_AS(signed_step(arr({1.0}), arr({std::nan("")}), 0.1), NumericError);
  Array v = arr({0.25, 0.75});
  const Array g = arr({1.0, -1.0});
  signed_step(v, g, 0.5);
  CHECK(v[0] == 0.25);  // inputs untouched
  CHECK(v[1] == 0.75);
}

TEST_CASE("signed_step with eta zero is the identity") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    Array v(8), g(8);
    for (int i = 0; i < 8; ++i) {
      v[i] = rng.uniform(-2, 2);
      g[i] = rng.uniform(-2, 2);
    }
    CHECK((signed_step(v, g, 0.0) == v).all());
  }
}

TEST_CASE("project_linf clips to the ball edge") {
  CHECK(project_linf(arr({0.75}), arr({0.5}), 0.1, 0, 1)[0] == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("project_linf is the identity inside the ball") {
  CHECK(project_linf(arr({0.55}), arr({0.5}), 0.1, 0, 1)[0] == 0.55);
}

TEST_CASE("project_linf applies the range floor after the ball") {
  CHECK(project_linf(arr({-0.2}), arr({0.05}), 0.1, 0, 1)[0] == 0.0);
}

TEST_CASE("project_linf validates inputs") {
  CHECK_THROWS_AS(project_linf(arr({1.0}), arr({1.0, 2.0}), 0.1, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(project_linf(arr({1.0}), arr({1.0}), -0.1, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(project_linf(arr({1.0}), arr({1.0}), 0.1, 1, 0), std::invalid_argument);
}

TEST_CASE("project_linf is idempotent and respects both bounds") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 6;
    Array v(n), center(n);
    const double lo = rng.uniform(-1, 0);
    const double hi = rng.uniform(0.5, 2);
    const double eps = rng.uniform(0, 0.5);
    for (int i = 0; i < n; ++i) {
      center[i] = rng.uniform(lo, hi);
      v[i] = rng.uniform(-3, 3);
    }
    const Array once = project_linf(v, center, eps, lo, hi);
    const Array twice = project_linf(once, center, eps, lo, hi);
    CHECK((once == twice).all());
    CHECK(((once - center).abs() <= eps + 1e-12).all());
    CHECK((once >= lo).all());
    CHECK((once <= hi).all());
  }
}

TEST_CASE("finite differences recover the quadratic gradient") {
  const auto f = [](const Array& v) { return v[0] * v[0]; };
  const Array g = finite_difference_gradient(f, arr({3.0}), 1e-4);
  CHECK(g[0] == doctest::Approx(6.0).epsilon(1e-6));
}

TEST_CASE("finite differences of a constant are zero") {
  const auto f = [](const Array&) { return 4.25; };
  const Array g = finite_difference_gradient(f, arr({1.0, -2.0, 0.5}), 1e-4);
  CHECK((g == 0.0).all());
}

TEST_CASE("finite differences reject non-finite functions") {
  const auto f = [](const Array& v) { return std::log(v[0]); };
  CHECK_THROWS_AS(finite_difference_gradient(f, arr({0.0}), 1e-4), NumericError);
}

TEST_CASE("check_gradient passes the analytic generator at tight tolerance") {
  const PatternBasis basis = make_pattern_basis(3, 10, 10, 1, 0.3, 21);
  const ToyGenerator generator(basis);
  const GradientCheckReport report =
      check_gradient(generator, {.probes = 8, .tol = 1e-4, .seed = 3});
  CHECK(report.pass);
  CHECK(report.probes == 8);
  CHECK(report.coords_checked > 0);
}

TEST_CASE("check_gradient is deterministic per seed") {
  const PatternBasis basis = make_pattern_basis(2, 8, 8, 1, 0.2, 33);
  const ToyGenerator generator(basis);
  const auto a = check_gradient(generator, {.probes = 4, .tol = 1e-4, .seed = 9});
  const auto b = check_gradient(generator, {.probes = 4, .tol = 1e-4, .seed = 9});
  CHECK(a.max_rel_error == b.max_rel_error);
}

namespace {

// Injected fault: reports twice the true gradient.
class ScaledGradientModel final : public TargetModel {
 public:
  explicit ScaledGradientModel(std::unique_ptr<TargetModel> inner) : inner_(std::move(inner)) {}
  ModelKind kind() const override { return inner_->kind(); }
  Shape input_shape() const override { return inner_->input_shape(); }
  Prediction predict(const ImageTensor& image) const override { return inner_->predict(image); }
  double loss(const ImageTensor& image, const GroundTruth& truth) const override {
    return inner_->loss(image, truth);
  }
  Array loss_gradient(const ImageTensor& image, const GroundTruth& truth) const override {
    return 2.0 * inner_->loss_gradient(image, truth);
  }
  std::unique_ptr<TargetModel> clone() const override {
    return std::make_unique<ScaledGradientModel>(inner_->clone());
  }

 private:
  std::unique_ptr<TargetModel> inner_;
};

}  // namespace

TEST_CASE("check_gradient flags a scaled-gradient bug") {
  auto model = std::make_unique<ToyClassifier>(8, 8, 1, 4, 17);
  const ScaledGradientModel buggy(std::move(model));
  const GradientCheckReport report = check_gradient(buggy, {.probes = 4, .tol = 1e-3, .seed = 1});
  CHECK_FALSE(report.pass);
  // |2g - g| / max(|2g|, |g|) = 0.5
  CHECK(report.max_rel_error == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("relative error uses the max-denominator convention") {
  CHECK(relative_error(2.0, 1.0) == doctest::Approx(0.5));
  CHECK(relative_error(0.0, 0.0) == 0.0);
}
