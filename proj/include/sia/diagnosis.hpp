#pragma once

#include "sia/attack.hpp"
#include "sia/types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sia {

// Per-attribute sensitivity of a target model: mean absolute attribute
// displacement incurred by the attack, s = mean_p |a_T - a_0| per attribute.
struct SensitivityReport {
  Array s;           // length K, each in [0,1]
  Array normalized;  // s / sum(s); zeros when degenerate
  std::vector<std::string> attribute_names;
  long sample_count = 0;
  double sdar = 0.0;
  bool normalization_degenerate = false;
};

SensitivityReport sensitivity(const std::vector<AttackTrace>& traces,
                              const std::vector<std::string>& attribute_names);

Array normalize_sensitivity(const Array& s, bool* degenerate = nullptr);

// Names of the k largest sensitivities, descending; ties broken by
// lexicographic attribute name.
std::vector<std::string> top_k(const SensitivityReport& report, int k);

// Population standard deviation (divisor L).
double sdar(const Array& s);

// Runs K separate single-attribute attacks (all other attributes frozen)
// and reports s_k = mean |delta a_k| of run k.
SensitivityReport single_attribute_sensitivity(const TargetModel& model,
                                               const AttributeGenerator& generator,
                                               const ToyDataset& dataset,
                                               const std::vector<long>& indices,
                                               const AttackConfig& config, int workers = 1);

// Writes histogram.csv (attribute,sensitivity,normalized) and, when a png
// path is given, a bar-chart rendering. The CSV is the canonical artifact.
void export_histogram(const SensitivityReport& report, const std::filesystem::path& csv_path,
                      const std::optional<std::filesystem::path>& png_path = std::nullopt);

}  // namespace sia
