#include "sia/io.hpp"

#include <png.h>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sia {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_row(std::ofstream& out, const std::vector<std::string>& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    out << csv_escape(row[i]);
  }
  out << "\r\n";
}

}  // namespace

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path.string());
  write_row(out, header);
  for (const auto& row : rows) write_row(out, row);
  if (!out) throw std::runtime_error("write_csv: write failed for " + path.string());
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("read_csv: cannot open " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < content.size(); ++i) {
    const char c = content[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < content.size() && content[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
    } else {
      field += c;
    }
  }
  if (!field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// PNG

void write_png(const ImageTensor& image, const fs::path& path) {
  if (image.channels != 1 && image.channels != 3)
    throw std::invalid_argument("write_png: only 1- or 3-channel images are supported");
  FILE* fp = std::fopen(path.string().c_str(), "wb");
  if (!fp) throw std::runtime_error("write_png: cannot open " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    std::fclose(fp);
    throw std::runtime_error("write_png: libpng failure for " + path.string());
  }

  png_init_io(png, fp);
  png_set_IHDR(png, info, image.width, image.height, 8,
               image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  std::vector<png_byte> rowbuf(static_cast<std::size_t>(image.width) * image.channels);
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c)
      for (int ch = 0; ch < image.channels; ++ch) {
        const double v = std::clamp(image.at(r, c, ch), 0.0, 1.0);
        rowbuf[static_cast<std::size_t>(c) * image.channels + ch] =
            static_cast<png_byte>(std::lround(v * 255.0));
      }
    png_write_row(png, rowbuf.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

void write_bar_chart(const std::vector<double>& values, const fs::path& path) {
  const int bar_width = 18, gap = 6, chart_height = 160, margin = 12;
  const int width = margin * 2 + static_cast<int>(values.size()) * (bar_width + gap) - gap;
  const int height = chart_height + margin * 2;
  ImageTensor canvas(height, std::max(width, 32), 3);
  canvas.data.setConstant(1.0);

  double peak = 1e-12;
  for (double v : values) peak = std::max(peak, std::abs(v));

  for (std::size_t i = 0; i < values.size(); ++i) {
    const int h = static_cast<int>(std::round(chart_height * std::abs(values[i]) / peak));
    const int c0 = margin + static_cast<int>(i) * (bar_width + gap);
    for (int r = height - margin - h; r < height - margin; ++r)
      for (int c = c0; c < c0 + bar_width; ++c) {
        canvas.at(r, c, 0) = 0.21;
        canvas.at(r, c, 1) = 0.45;
        canvas.at(r, c, 2) = 0.74;
      }
  }
  // baseline
  for (int c = margin / 2; c < canvas.width - margin / 2; ++c)
    for (int ch = 0; ch < 3; ++ch) canvas.at(height - margin, c, ch) = 0.2;
  write_png(canvas, path);
}

// ---------------------------------------------------------------------------
// Dataset

namespace {

json manifest_to_json(const DatasetManifest& m) {
  json j;
  j["schema_version"] = 1;
  j["seed"] = m.seed;
  j["attribute_count"] = m.attribute_count;
  j["sample_count"] = m.sample_count;
  j["height"] = m.height;
  j["width"] = m.width;
  j["channels"] = m.channels;
  j["train_count"] = m.train_count;
  j["keypoint_count"] = m.keypoint_count;
  j["label_rule"] = {{"attr", m.label_rule.attr}, {"threshold", m.label_rule.threshold}};
  j["pattern_amplitude"] = m.pattern_amplitude;
  j["marker_amplitude"] = m.marker_amplitude;
  j["derived"] = m.derived;
  j["warnings"] = m.warnings;
  j["attribute_names"] = m.attribute_names;
  return j;
}

DatasetManifest manifest_from_json(const json& j) {
  DatasetManifest m;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.attribute_count = j.at("attribute_count").get<int>();
  m.sample_count = j.at("sample_count").get<long>();
  m.height = j.at("height").get<int>();
  m.width = j.at("width").get<int>();
  m.channels = j.at("channels").get<int>();
  m.train_count = j.at("train_count").get<long>();
  m.keypoint_count = j.at("keypoint_count").get<int>();
  m.label_rule.attr = j.at("label_rule").at("attr").get<int>();
  m.label_rule.threshold = j.at("label_rule").at("threshold").get<double>();
  m.pattern_amplitude = j.at("pattern_amplitude").get<double>();
  m.marker_amplitude = j.at("marker_amplitude").get<double>();
  m.derived = j.at("derived").get<bool>();
  m.warnings = j.at("warnings").get<std::vector<std::string>>();
  m.attribute_names = j.at("attribute_names").get<std::vector<std::string>>();
  return m;
}

void write_json_file(const json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open " + path.string());
  return json::parse(in);
}

std::string sample_image_name(long index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "sample_%05ld.png", index);
  return buf;
}

}  // namespace

void save_dataset(const ToyDataset& dataset, const fs::path& dir, bool write_images) {
  if (dataset.manifest.derived)
    throw std::invalid_argument("save_dataset: derived datasets are not persistable");
  fs::create_directories(dir);
  write_json_file(manifest_to_json(dataset.manifest), dir / "manifest.json");

  json samples = json::array();
  if (write_images) fs::create_directories(dir / "images");
  for (long i = 0; i < dataset.size(); ++i) {
    const ToySample& s = dataset.samples[i];
    json entry;
    entry["image"] = "images/" + sample_image_name(i);
    entry["attributes"] = std::vector<double>(s.attributes.values.data(),
                                              s.attributes.values.data() + s.attributes.size());
    entry["label"] = s.label;
    json kps = json::array();
    for (const Keypoint& kp : s.keypoints) kps.push_back({{"row", kp.row}, {"col", kp.col}});
    entry["keypoints"] = kps;
    samples.push_back(std::move(entry));
    if (write_images) write_png(dataset.rendered(i), dir / "images" / sample_image_name(i));
  }
  write_json_file(json{{"schema_version", 1}, {"samples", samples}}, dir / "samples.json");
}

ToyDataset load_dataset(const fs::path& dir) {
  const json manifest_json = read_json_file(dir / "manifest.json");
  const DatasetManifest manifest = manifest_from_json(manifest_json);
  if (manifest.derived)
    throw std::invalid_argument("load_dataset: derived datasets cannot be regenerated");
  return dataset_from_manifest(manifest);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

void append_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t read_u32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

void append_f32_blob(std::string& out, const Array& params) {
  for (long i = 0; i < params.size(); ++i) {
    const float f = static_cast<float>(params[i]);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    append_u32(out, bits);
  }
}

}  // namespace

void save_checkpoint(const TargetModel& model, const fs::path& path) {
  json header;
  header["schema_version"] = 1;
  const Shape shape = model.input_shape();
  header["input_shape"] = {{"height", shape.height}, {"width", shape.width},
                           {"channels", shape.channels}};

  Array params;
  if (const auto* clf = dynamic_cast<const ToyClassifier*>(&model)) {
    header["architecture"] = {{"type", "toy_classifier"}, {"hidden", clf->hidden()}};
    params = clf->parameters();
  } else if (const auto* det = dynamic_cast<const ToyKeypointDetector*>(&model)) {
    header["architecture"] = {{"type", "toy_keypoint_detector"},
                              {"keypoints", det->keypoint_count()},
                              {"kernel_size", det->kernel_size()},
                              {"sigma", det->sigma()}};
    params = det->parameters();
  } else {
    throw std::invalid_argument("save_checkpoint: unsupported model type");
  }
  header["parameter_count"] = params.size();

  std::string out = "SIAC";
  const std::string header_text = header.dump();
  append_u32(out, static_cast<std::uint32_t>(header_text.size()));
  out += header_text;
  append_f32_blob(out, params);

  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

std::unique_ptr<TargetModel> load_checkpoint(const fs::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw MissingInputError("load_checkpoint: cannot open " + path.string());
  std::string content((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  if (content.size() < 8 || content.compare(0, 4, "SIAC") != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path.string());
  const std::uint32_t header_len = read_u32(content.data() + 4);
  if (content.size() < 8 + header_len)
    throw std::runtime_error("load_checkpoint: truncated header in " + path.string());
  const json header = json::parse(content.substr(8, header_len));

  const long param_count = header.at("parameter_count").get<long>();
  if (content.size() != 8 + header_len + static_cast<std::size_t>(param_count) * 4)
    throw std::runtime_error("load_checkpoint: truncated blob in " + path.string());
  Array params(param_count);
  const char* blob = content.data() + 8 + header_len;
  for (long i = 0; i < param_count; ++i) {
    const std::uint32_t bits = read_u32(blob + i * 4);
    float f;
    std::memcpy(&f, &bits, 4);
    params[i] = f;
  }

  const auto& shape = header.at("input_shape");
  const int h = shape.at("height").get<int>();
  const int w = shape.at("width").get<int>();
  const int c = shape.at("channels").get<int>();
  const auto& arch = header.at("architecture");
  const std::string type = arch.at("type").get<std::string>();
  std::unique_ptr<TrainableModel> model;
  if (type == "toy_classifier") {
    model = std::make_unique<ToyClassifier>(h, w, c, arch.at("hidden").get<int>(), 0);
  } else if (type == "toy_keypoint_detector") {
    model = std::make_unique<ToyKeypointDetector>(h, w, c, arch.at("keypoints").get<int>(),
                                                  arch.at("kernel_size").get<int>(),
                                                  arch.at("sigma").get<double>(), 0);
  } else {
    throw std::runtime_error("load_checkpoint: unknown architecture " + type);
  }
  model->set_parameters(params);
  return model;
}

// ---------------------------------------------------------------------------
// Traces

void write_trace_json(const AttackTrace& trace, const std::vector<std::string>& attribute_names,
                      long source_index, const fs::path& path) {
  json j;
  j["schema_version"] = 1;
  j["source_index"] = source_index;
  j["seed"] = trace.seed;
  j["attribute_names"] = attribute_names;
  json attrs = json::array();
  for (long r = 0; r < trace.attrs.rows(); ++r) {
    json row = json::array();
    for (long c = 0; c < trace.attrs.cols(); ++c) row.push_back(trace.attrs(r, c));
    attrs.push_back(std::move(row));
  }
  j["attributes"] = std::move(attrs);
  j["losses"] = trace.losses;
  write_json_file(j, path);
}

void write_trace_deltas(const AttackTrace& trace, const Shape& shape, const fs::path& path) {
  if (trace.images.empty())
    throw std::invalid_argument("write_trace_deltas: trace has no recorded images");
  std::string out = "SIAT";
  append_u32(out, 1);  // version
  append_u32(out, static_cast<std::uint32_t>(trace.images.size()));
  append_u32(out, static_cast<std::uint32_t>(shape.height));
  append_u32(out, static_cast<std::uint32_t>(shape.width));
  append_u32(out, static_cast<std::uint32_t>(shape.channels));
  const Array& x0 = trace.images.front();
  for (const Array& frame : trace.images) append_f32_blob(out, frame - x0);

  std::ofstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("write_trace_deltas: cannot open " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw std::runtime_error("write_trace_deltas: write failed for " + path.string());
}

std::vector<Array> read_trace_deltas(const fs::path& path, Shape* shape) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw MissingInputError("read_trace_deltas: cannot open " + path.string());
  std::string content((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  if (content.size() < 24 || content.compare(0, 4, "SIAT") != 0)
    throw std::runtime_error("read_trace_deltas: bad magic in " + path.string());
  const std::uint32_t version = read_u32(content.data() + 4);
  if (version != 1) throw std::runtime_error("read_trace_deltas: unsupported version");
  const std::uint32_t frames = read_u32(content.data() + 8);
  Shape s{static_cast<int>(read_u32(content.data() + 12)),
          static_cast<int>(read_u32(content.data() + 16)),
          static_cast<int>(read_u32(content.data() + 20))};
  if (shape) *shape = s;
  const long frame_size = s.size();
  if (content.size() != 24 + static_cast<std::size_t>(frames) * frame_size * 4)
    throw std::runtime_error("read_trace_deltas: truncated blob in " + path.string());

  std::vector<Array> deltas;
  deltas.reserve(frames);
  const char* blob = content.data() + 24;
  for (std::uint32_t f = 0; f < frames; ++f) {
    Array frame(frame_size);
    for (long i = 0; i < frame_size; ++i) {
      const std::uint32_t bits = read_u32(blob + (static_cast<long>(f) * frame_size + i) * 4);
      float v;
      std::memcpy(&v, &bits, 4);
      frame[i] = v;
    }
    deltas.push_back(std::move(frame));
  }
  return deltas;
}

}  // namespace sia
