#include "sia/diagnosis.hpp"

#include "sia/io.hpp"
#include "sia/models.hpp"
#include "sia/rng.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <filesystem>

using namespace sia;

namespace {

AttackTrace trace_of(std::initializer_list<double> a0, std::initializer_list<double> aT) {
  AttackTrace trace;
  trace.attrs.resize(2, static_cast<long>(a0.size()));
  long i = 0;
  for (double v : a0) trace.attrs(0, i++) = v;
  i = 0;
  for (double v : aT) trace.attrs(1, i++) = v;
  return trace;
}

// Appendix-style fixture: the 14 gender-classifier sensitivities at N=10000.
const std::vector<std::string> kGenderNames = {
    "Bald",        "Bangs",    "Black_Hair", "Blond_Hair", "Brown_Hair",
    "Bushy_Eyebrows", "Eyeglasses", "Mouth_Slightly_Open", "Mustache", "No_Beard",
    "Pale_Skin",   "Young",    "Smiling",    "Wearing_Lipstick"};

Array gender_row() {
  Array s(14);
  s << 0.0427, 0.0595, 0.0409, 0.0424, 0.0532, 0.0879, 0.0838, 0.0548, 0.0775, 0.1499, 0.0458,
      0.0652, 0.0359, 0.1606;
  return s;
}

}  // namespace

TEST_CASE("sensitivity of a single trace is the absolute attribute displacement") {
  const std::vector<AttackTrace> traces = {trace_of({0.2, 0.8}, {0.5, 0.7})};
  const SensitivityReport report = sensitivity(traces, {"a", "b"});
  CHECK(report.s[0] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(report.s[1] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(report.sample_count == 1);
}

TEST_CASE("zero-iteration traces give zero sensitivity") {
  AttackTrace trace;
  trace.attrs.resize(1, 3);
  trace.attrs.row(0) << 0.1, 0.5, 0.9;
  const SensitivityReport report = sensitivity({trace}, {"a", "b", "c"});
  CHECK((report.s == 0.0).all());
  CHECK(report.normalization_degenerate);
}

TEST_CASE("sensitivity averages per-sample displacements") {
  const std::vector<AttackTrace> traces = {trace_of({0.5, 0.5}, {0.7, 0.5}),
                                           trace_of({0.5, 0.5}, {0.5, 0.9})};
  const SensitivityReport report = sensitivity(traces, {"a", "b"});
  CHECK(report.s[0] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(report.s[1] == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("sensitivity validates its inputs") {
  CHECK_THROWS_AS(sensitivity({}, {}), std::invalid_argument);
  const std::vector<AttackTrace> mixed = {trace_of({0.1}, {0.2}), trace_of({0.1, 0.2}, {0.2, 0.3})};
  CHECK_THROWS_AS(sensitivity(mixed, {"a"}), std::invalid_argument);
}

TEST_CASE("sensitivity is permutation-equivariant in samples and attributes") {
  Rng rng(17);
  std::vector<AttackTrace> traces;
  for (int i = 0; i < 6; ++i) {
    AttackTrace t;
    t.attrs.resize(4, 3);
    for (long r = 0; r < 4; ++r)
      for (long c = 0; c < 3; ++c) t.attrs(r, c) = rng.uniform01();
    traces.push_back(std::move(t));
  }
  const SensitivityReport base = sensitivity(traces, {"a", "b", "c"});

  std::vector<AttackTrace> shuffled = {traces[3], traces[0], traces[5],
                                       traces[1], traces[4], traces[2]};
  const SensitivityReport permuted_samples = sensitivity(shuffled, {"a", "b", "c"});
  CHECK((base.s == permuted_samples.s).all());

  std::vector<AttackTrace> swapped = traces;
  for (AttackTrace& t : swapped) t.attrs.col(0).swap(t.attrs.col(2));
  const SensitivityReport permuted_attrs = sensitivity(swapped, {"c", "b", "a"});
  CHECK(base.s[0] == permuted_attrs.s[2]);
  CHECK(base.s[2] == permuted_attrs.s[0]);
}

TEST_CASE("normalization divides by the sum") {
  Array s(3);
  s << 1, 1, 2;
  const Array n = normalize_sensitivity(s);
  CHECK(n[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(n[1] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(n[2] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("normalizing an all-zero vector flags degeneracy") {
  bool degenerate = false;
  const Array n = normalize_sensitivity(Array::Zero(4), &degenerate);
  CHECK(degenerate);
  CHECK((n == 0.0).all());
  CHECK_THROWS_AS(normalize_sensitivity(-Array::Ones(2)), std::invalid_argument);
}

TEST_CASE("normalizing the gender fixture preserves the argmax") {
  const Array s = gender_row();
  const Array n = normalize_sensitivity(s);
  CHECK(n.sum() == doctest::Approx(1.0).epsilon(1e-12));
  long arg_s = 0, arg_n = 0;
  s.maxCoeff(&arg_s);
  n.maxCoeff(&arg_n);
  CHECK(arg_s == arg_n);
  CHECK(arg_n == 13);
  CHECK(n[13] == doctest::Approx(0.16058394160583941).epsilon(1e-12));
}

TEST_CASE("normalization preserves the ranking on random inputs") {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    Array s(6);
    for (int i = 0; i < 6; ++i) s[i] = rng.uniform01();
    const Array n = normalize_sensitivity(s);
    long arg_s = 0, arg_n = 0;
    s.maxCoeff(&arg_s);
    n.maxCoeff(&arg_n);
    CHECK(arg_s == arg_n);
  }
}

TEST_CASE("top_k on the gender fixture selects lipstick first") {
  SensitivityReport report;
  report.s = gender_row();
  report.attribute_names = kGenderNames;
  const auto top = top_k(report, 3);
  REQUIRE(top.size() == 3);
  CHECK(top[0] == "Wearing_Lipstick");
  CHECK(top[1] == "No_Beard");
  CHECK(top[2] == "Bushy_Eyebrows");
}

TEST_CASE("top_k breaks ties lexicographically") {
  SensitivityReport report;
  report.s = Array::Constant(4, 0.25);
  report.attribute_names = {"delta", "alpha", "charlie", "bravo"};
  const auto top = top_k(report, 3);
  CHECK(top == std::vector<std::string>{"alpha", "bravo", "charlie"});
}

TEST_CASE("top_k with k equal to K is a permutation of all names") {
  SensitivityReport report;
  report.s = gender_row();
  report.attribute_names = kGenderNames;
  auto top = top_k(report, 14);
  std::sort(top.begin(), top.end());
  auto expected = kGenderNames;
  std::sort(expected.begin(), expected.end());
  CHECK(top == expected);
  CHECK_THROWS_AS(top_k(report, 0), std::invalid_argument);
  CHECK_THROWS_AS(top_k(report, 15), std::invalid_argument);
}

TEST_CASE("sdar of a uniform vector is zero") {
  CHECK(sdar(Array::Constant(5, 0.3)) == 0.0);
}

TEST_CASE("sdar hand evaluation") {
  Array s(2);
  s << 0.1, 0.3;
  CHECK(sdar(s) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("sdar of the gender fixture matches the frozen oracle value") {
  // computed with an independent spreadsheet-style oracle before the
  // implementation existed
  CHECK(sdar(gender_row()) == doctest::Approx(0.03768240603371547).epsilon(1e-9));
  CHECK_THROWS_AS(sdar(Array(0)), std::invalid_argument);
}

TEST_CASE("sdar is invariant under constant shifts") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Array s(7);
    for (int i = 0; i < 7; ++i) s[i] = rng.uniform01();
    const double c = rng.uniform(-2, 2);
    CHECK(sdar(s + c) == doctest::Approx(sdar(s)).epsilon(1e-9));
  }
}

TEST_CASE("single-attribute sensitivity with one attribute equals the joint run") {
  // K=1 world built by hand (generate_dataset requires K >= 2)
  PatternBasis basis = make_pattern_basis(1, 8, 8, 1, 0.3, 5);
  ToyGenerator generator(basis);
  ToyDataset dataset;
  dataset.basis = basis;
  dataset.manifest.attribute_count = 1;
  dataset.manifest.height = 8;
  dataset.manifest.width = 8;
  dataset.manifest.channels = 1;
  dataset.manifest.attribute_names = generator.attribute_names();
  Rng rng(6);
  for (int i = 0; i < 5; ++i) {
    ToySample sample;
    sample.base_image = test::random_image(8, 8, 1, rng, 0.3, 0.7);
    sample.attributes = AttributeVector(generator.attribute_names(),
                                        Array::Constant(1, rng.bernoulli(0.5) ? 1.0 : 0.0));
    sample.label = static_cast<int>(sample.attributes.values[0]);
    dataset.samples.push_back(std::move(sample));
  }
  dataset.manifest.sample_count = dataset.size();
  dataset.manifest.train_count = dataset.size();
  const ToyClassifier model(8, 8, 1, 4, 3);

  AttackConfig config;
  config.mode = AttackMode::kAttrOnly;
  config.eta_a = 0.05;
  config.eps_a = 0.5;
  config.iterations = 6;
  config.seed = 2;

  const std::vector<long> indices = {0, 1, 2, 3, 4};
  const SensitivityReport single =
      single_attribute_sensitivity(model, generator, dataset, indices, config);
  const auto joint =
      run_attack_batch(model, &generator, dataset, indices, config, AttackKind::kSia);
  std::vector<AttackTrace> traces;
  for (const auto& r : joint) traces.push_back(r.trace);
  const SensitivityReport joint_report = sensitivity(traces, generator.attribute_names());
  CHECK(single.s[0] == doctest::Approx(joint_report.s[0]).epsilon(1e-12));
}

TEST_CASE("single-attribute sensitivity is zero for a zero-iteration attack") {
  const auto& world = test::small_world();
  AttackConfig config;
  config.mode = AttackMode::kAttrOnly;
  config.iterations = 0;
  config.seed = 4;
  const SensitivityReport report = single_attribute_sensitivity(
      *world.classifier, world.generator, world.dataset, {0, 1, 2}, config);
  CHECK((report.s == 0.0).all());
}

TEST_CASE("single- and multi-attribute argmax agree on the P0-driven fixture") {
  const auto& world = test::small_world();
  AttackConfig config;
  config.mode = AttackMode::kAttrOnly;
  config.eta_a = 0.04;
  config.eps_a = 0.6;
  config.iterations = 15;
  config.seed = 8;

  std::vector<long> indices;
  for (long i = 0; i < 40; ++i) indices.push_back(world.dataset.train_count() + i);

  const auto results = run_attack_batch(*world.classifier, &world.generator, world.dataset,
                                        indices, config, AttackKind::kSia);
  std::vector<AttackTrace> traces;
  for (const auto& r : results) traces.push_back(r.trace);
  const SensitivityReport multi = sensitivity(traces, world.generator.attribute_names());
  const SensitivityReport single = single_attribute_sensitivity(
      *world.classifier, world.generator, world.dataset, indices, config);

  long arg_multi = 0, arg_single = 0;
  multi.s.maxCoeff(&arg_multi);
  single.s.maxCoeff(&arg_single);
  CHECK(arg_multi == 0);
  CHECK(arg_single == 0);
}

TEST_CASE("export_histogram writes a parseable canonical CSV") {
  SensitivityReport report;
  report.s = gender_row();
  report.normalized = normalize_sensitivity(report.s, &report.normalization_degenerate);
  report.attribute_names = kGenderNames;
  report.sample_count = 10000;
  report.sdar = sdar(report.s);

  const auto dir = std::filesystem::temp_directory_path() / "sia_diag_test";
  std::filesystem::create_directories(dir);
  const auto csv_path = dir / "histogram.csv";
  const auto png_path = dir / "histogram.png";
  export_histogram(report, csv_path, png_path);

  const auto rows = read_csv(csv_path);
  REQUIRE(rows.size() == 15);  // header + K
  CHECK(rows[0] == std::vector<std::string>{"attribute", "sensitivity", "normalized"});
  double norm_sum = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i][0] == kGenderNames[i - 1]);
    CHECK(std::stod(rows[i][1]) == report.s[static_cast<long>(i - 1)]);
    norm_sum += std::stod(rows[i][2]);
  }
  CHECK(norm_sum == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::filesystem::exists(png_path));
  std::filesystem::remove_all(dir);
}
