#pragma once

#include "sia/attack.hpp"
#include "sia/models.hpp"
#include "sia/toyworld.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace sia {

// Raised when a referenced file or directory does not exist.
class MissingInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shortest round-trip decimal representation.
std::string format_double(double value);

// RFC 4180: CRLF line endings, quoting when a field needs it.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

// 8-bit PNG (1 or 3 channels); values are clamped then quantized.
void write_png(const ImageTensor& image, const std::filesystem::path& path);

// Minimal bar-chart rendering for --plots output.
void write_bar_chart(const std::vector<double>& values, const std::filesystem::path& path);

// Dataset directory: manifest.json + samples.json + images/*.png.
// Loading regenerates the samples from the manifest seed (bit-identical);
// derived datasets (resampled/augmented) are not persistable this way.
void save_dataset(const ToyDataset& dataset, const std::filesystem::path& dir,
                  bool write_images = true);
ToyDataset load_dataset(const std::filesystem::path& dir);

// Checkpoint file: "SIAC" magic, u32 little-endian header length, JSON
// header (architecture, shapes, seed, training config), then the raw
// little-endian float32 parameter blob.
void save_checkpoint(const TargetModel& model, const std::filesystem::path& path);
std::unique_ptr<TargetModel> load_checkpoint(const std::filesystem::path& path);

// Per-sample trace JSON (attribute trajectory + losses).
void write_trace_json(const AttackTrace& trace, const std::vector<std::string>& attribute_names,
                      long source_index, const std::filesystem::path& path);

// Optional image-trajectory blob: "SIAT" magic, u32 version, u32 frames,
// u32 height, width, channels, then frames * H*W*C little-endian float32
// deltas relative to the initial image (frame i stores x_i - x_0).
void write_trace_deltas(const AttackTrace& trace, const Shape& shape,
                        const std::filesystem::path& path);
std::vector<Array> read_trace_deltas(const std::filesystem::path& path, Shape* shape = nullptr);

}  // namespace sia
