#include "sia/metrics.hpp"

#include "sia/rng.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace sia;

TEST_CASE("psnr caps at 100 dB for identical images") {
  ImageTensor x(4, 4, 1);
  x.data.setConstant(0.5);
  CHECK(psnr(x, x) == 100.0);
}

TEST_CASE("psnr closed form at MSE 0.01") {
  ImageTensor x(5, 5, 1), y(5, 5, 1);
  y.data.setConstant(0.1);
  CHECK(psnr(x, y) == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("psnr of black versus white is zero") {
  ImageTensor x(3, 3, 3), y(3, 3, 3);
  y.data.setConstant(1.0);
  CHECK(psnr(x, y) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("psnr is symmetric and decreases with noise") {
  Rng rng(3);
  ImageTensor x = test::random_image(8, 8, 3, rng);
  ImageTensor y = x, z = x;
  for (long i = 0; i < y.size(); ++i) {
    const double noise = rng.uniform(-0.01, 0.01);
    y.data[i] += noise;
    z.data[i] += 4 * noise;
  }
  CHECK(psnr(x, y) == psnr(y, x));
  CHECK(psnr(x, y) > psnr(x, z));
  CHECK_THROWS_AS(psnr(x, ImageTensor(4, 4, 1)), std::invalid_argument);
}

TEST_CASE("ssim of an image with itself is one") {
  Rng rng(4);
  const ImageTensor x = test::random_image(16, 16, 3, rng, 0.0, 1.0);
  CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ssim closed form for constant black versus white") {
  ImageTensor x(16, 16, 1), y(16, 16, 1);
  y.data.setConstant(1.0);
  CHECK(ssim(x, y) == doctest::Approx(9.999000099990002e-05).epsilon(1e-9));
}

TEST_CASE("ssim is symmetric and bounded") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const ImageTensor x = test::random_image(12, 10, 3, rng, 0.0, 1.0);
    const ImageTensor y = test::random_image(12, 10, 3, rng, 0.0, 1.0);
    const double s = ssim(x, y, 8);
    CHECK(s == ssim(y, x, 8));
    CHECK(s >= -1.0);
    CHECK(s <= 1.0);
  }
  const ImageTensor x = test::random_image(8, 8, 1, rng);
  CHECK_THROWS_AS(ssim(x, x, 9), std::invalid_argument);
}

TEST_CASE("keypoint error basics") {
  CHECK(keypoint_error({{2, 3}}, {{2, 3}}, 1.0) == 0.0);
  CHECK(keypoint_error({{3, 4}}, {{0, 0}}, 1.0) == doctest::Approx(5.0).epsilon(1e-12));
  // normalizing by the diagonal makes the value resolution-independent
  const double small = keypoint_error({{3, 4}}, {{0, 0}}, std::hypot(9.0, 9.0));
  const double large = keypoint_error({{6, 8}}, {{0, 0}}, std::hypot(18.0, 18.0));
  CHECK(small == doctest::Approx(large).epsilon(1e-12));
  CHECK_THROWS_AS(keypoint_error({{1, 1}}, {{1, 1}, {2, 2}}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(keypoint_error({{1, 1}}, {{1, 1}}, 0.0), std::invalid_argument);
}

TEST_CASE("classification metrics on perfect predictions") {
  const auto m = classification_metrics({1, 0, 1, 0}, {1, 0, 1, 0});
  CHECK(m.precision == 1.0);
  CHECK(m.recall == 1.0);
  CHECK(m.accuracy_percent == 100.0);
  CHECK(m.f1 == 1.0);
}

TEST_CASE("all-negative predictions on a balanced set") {
  const auto m = classification_metrics({0, 0, 0, 0}, {1, 1, 0, 0});
  CHECK(m.recall == 0.0);
  CHECK(m.accuracy_percent == 50.0);
  CHECK(m.precision_degenerate);
  CHECK(m.precision == 0.0);
  CHECK(m.f1_degenerate);
}

TEST_CASE("classification metrics hand counts") {
  // TP=2 FP=1 FN=2 TN=10
  const std::vector<int> gts = {1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  const std::vector<int> preds = {1, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
  const auto m = classification_metrics(preds, gts);
  CHECK(m.precision == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(m.recall == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(m.accuracy_percent == doctest::Approx(80.0).epsilon(1e-12));
  CHECK(m.f1 == doctest::Approx(4.0 / 7.0).epsilon(1e-12));
}

TEST_CASE("accuracy and f1 identities hold on random confusions") {
  Rng rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<int> preds, gts;
    for (int i = 0; i < 40; ++i) {
      preds.push_back(rng.bernoulli(0.5) ? 1 : 0);
      gts.push_back(rng.bernoulli(0.5) ? 1 : 0);
    }
    const auto m = classification_metrics(preds, gts);
    CHECK(m.accuracy_percent ==
          doctest::Approx(100.0 * double(m.tp + m.tn) / double(m.tp + m.tn + m.fp + m.fn)));
    if (m.precision > 0 && m.recall > 0)
      CHECK(m.f1 ==
            doctest::Approx(2.0 / (1.0 / m.precision + 1.0 / m.recall)).epsilon(1e-12));
  }
  CHECK_THROWS_AS(classification_metrics({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(classification_metrics({1}, {1, 0}), std::invalid_argument);
}
