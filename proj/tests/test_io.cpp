#include "sia/io.hpp"

#include "sia/rng.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace sia;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("format_double survives a parse round trip") {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const double v = rng.uniform(-1e6, 1e6) * std::pow(10, rng.uniform_int(-12, 3));
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(20.0) == "20");
}

TEST_CASE("csv writing uses CRLF and RFC 4180 quoting") {
  TempDir dir("sia_io_csv");
  const fs::path path = dir.path / "t.csv";
  write_csv(path, {"name", "note"},
            {{"plain", "hello"}, {"with,comma", "with \"quote\""}, {"multi\nline", "x"}});
  const std::string raw = slurp(path);
  CHECK(raw.find("\r\n") != std::string::npos);
  CHECK(raw.find("\"with,comma\"") != std::string::npos);
  CHECK(raw.find("\"with \"\"quote\"\"\"") != std::string::npos);

  const auto rows = read_csv(path);
  REQUIRE(rows.size() == 4);
  CHECK(rows[1] == std::vector<std::string>{"plain", "hello"});
  CHECK(rows[2] == std::vector<std::string>{"with,comma", "with \"quote\""});
  CHECK(rows[3] == std::vector<std::string>{"multi\nline", "x"});
}

TEST_CASE("png writer emits a valid signature") {
  TempDir dir("sia_io_png");
  Rng rng(3);
  const ImageTensor img = test::random_image(9, 7, 3, rng, 0.0, 1.0);
  const fs::path path = dir.path / "img.png";
  write_png(img, path);
  const std::string raw = slurp(path);
  REQUIRE(raw.size() > 8);
  CHECK(static_cast<unsigned char>(raw[0]) == 0x89);
  CHECK(raw.substr(1, 3) == "PNG");
  CHECK_THROWS_AS(write_png(ImageTensor(4, 4, 2), dir.path / "bad.png"), std::invalid_argument);
}

TEST_CASE("datasets round trip through disk by regeneration") {
  TempDir dir("sia_io_dataset");
  DatasetParams p;
  p.attribute_count = 3;
  p.sample_count = 12;
  p.train_count = 9;
  p.height = 10;
  p.width = 10;
  p.channels = 3;
  p.seed = 47;
  p.keypoint_count = 2;
  const ToyDataset dataset = generate_dataset(p);
  save_dataset(dataset, dir.path);

  CHECK(fs::exists(dir.path / "manifest.json"));
  CHECK(fs::exists(dir.path / "samples.json"));
  CHECK(fs::exists(dir.path / "images" / "sample_00000.png"));

  const ToyDataset loaded = load_dataset(dir.path);
  REQUIRE(loaded.size() == dataset.size());
  CHECK(loaded.manifest.train_count == 9);
  for (long i = 0; i < dataset.size(); ++i) {
    CHECK((loaded.samples[i].base_image.data == dataset.samples[i].base_image.data).all());
    CHECK((loaded.samples[i].attributes.values == dataset.samples[i].attributes.values).all());
    CHECK(loaded.samples[i].label == dataset.samples[i].label);
  }
  for (int k = 0; k < dataset.basis.count(); ++k)
    CHECK((loaded.basis.patterns[k] == dataset.basis.patterns[k]).all());

  CHECK_THROWS_AS(load_dataset(dir.path / "missing"), MissingInputError);
}

TEST_CASE("derived datasets refuse persistence") {
  const auto& world = test::small_world();
  ToyDataset derived = world.dataset;
  derived.manifest.derived = true;
  TempDir dir("sia_io_derived");
  CHECK_THROWS_AS(save_dataset(derived, dir.path), std::invalid_argument);
}

TEST_CASE("classifier checkpoints restore float32-exact parameters") {
  TempDir dir("sia_io_ckpt");
  const auto& world = test::small_world();
  const fs::path path = dir.path / "model.ckpt";
  save_checkpoint(*world.classifier, path);

  const auto loaded = load_checkpoint(path);
  const auto* clf = dynamic_cast<const ToyClassifier*>(loaded.get());
  REQUIRE(clf != nullptr);
  CHECK(clf->input_shape() == world.classifier->input_shape());

  const Array original = world.classifier->parameters();
  const Array restored = clf->parameters();
  REQUIRE(restored.size() == original.size());
  for (long i = 0; i < original.size(); ++i)
    CHECK(restored[i] == static_cast<double>(static_cast<float>(original[i])));

  CHECK_THROWS_AS(load_checkpoint(dir.path / "none.ckpt"), MissingInputError);
}

TEST_CASE("detector checkpoints restore architecture and parameters") {
  TempDir dir("sia_io_ckpt_det");
  const ToyKeypointDetector detector(12, 12, 3, 2, 5, 1.5, 9);
  const fs::path path = dir.path / "det.ckpt";
  save_checkpoint(detector, path);
  const auto loaded = load_checkpoint(path);
  const auto* det = dynamic_cast<const ToyKeypointDetector*>(loaded.get());
  REQUIRE(det != nullptr);
  CHECK(det->keypoint_count() == 2);
  CHECK(det->kernel_size() == 5);
  CHECK(det->sigma() == 1.5);
  const Array original = detector.parameters();
  const Array restored = det->parameters();
  for (long i = 0; i < original.size(); ++i)
    CHECK(restored[i] == static_cast<double>(static_cast<float>(original[i])));
}

TEST_CASE("trace JSON records trajectories and losses") {
  TempDir dir("sia_io_trace");
  AttackTrace trace;
  trace.attrs.resize(3, 2);
  trace.attrs << 0.1, 0.9, 0.2, 0.8, 0.3, 0.7;
  trace.losses = {0.5, 0.6, 0.7};
  trace.seed = 42;
  const fs::path path = dir.path / "trace.json";
  write_trace_json(trace, {"a", "b"}, 7, path);

  std::ifstream in(path);
  const auto j = nlohmann::json::parse(in);
  CHECK(j.at("source_index") == 7);
  CHECK(j.at("seed") == 42);
  CHECK(j.at("attributes").size() == 3);
  CHECK(j.at("attributes")[0][0] == 0.1);
  CHECK(j.at("losses").size() == 3);
}

TEST_CASE("image trajectory blobs round trip as float32 deltas") {
  TempDir dir("sia_io_siat");
  Rng rng(5);
  AttackTrace trace;
  const Shape shape{6, 5, 1};
  for (int i = 0; i < 4; ++i) {
    Array frame(shape.size());
    for (long j = 0; j < frame.size(); ++j) frame[j] = rng.uniform01();
    trace.images.push_back(std::move(frame));
  }
  const fs::path path = dir.path / "trace.siat";
  write_trace_deltas(trace, shape, path);

  const std::string raw = slurp(path);
  CHECK(raw.substr(0, 4) == "SIAT");

  Shape read_shape;
  const auto deltas = read_trace_deltas(path, &read_shape);
  CHECK(read_shape == shape);
  REQUIRE(deltas.size() == 4);
  for (std::size_t f = 0; f < deltas.size(); ++f)
    for (long j = 0; j < shape.size(); ++j)
      CHECK(deltas[f][j] ==
            static_cast<double>(static_cast<float>(trace.images[f][j] - trace.images[0][j])));
}
