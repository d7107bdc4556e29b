#include "sia/diagnosis.hpp"

#include "sia/io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sia {

SensitivityReport sensitivity(const std::vector<AttackTrace>& traces,
                              const std::vector<std::string>& attribute_names) {
  if (traces.empty()) throw std::invalid_argument("sensitivity: no traces");
  const long k = traces.front().attrs.cols();
  if (static_cast<long>(attribute_names.size()) != k)
    throw std::invalid_argument("sensitivity: attribute name count mismatch");

  Array total = Array::Zero(k);
  for (const AttackTrace& trace : traces) {
    if (trace.attrs.cols() != k)
      throw std::invalid_argument("sensitivity: traces disagree on attribute count");
    total += (trace.attrs.row(trace.attrs.rows() - 1) - trace.attrs.row(0))
                 .array()
                 .abs()
                 .transpose();
  }

  SensitivityReport report;
  report.s = total / static_cast<double>(traces.size());
  report.normalized = normalize_sensitivity(report.s, &report.normalization_degenerate);
  report.attribute_names = attribute_names;
  report.sample_count = static_cast<long>(traces.size());
  report.sdar = sdar(report.s);
  return report;
}

Array normalize_sensitivity(const Array& s, bool* degenerate) {
  if ((s < 0.0).any()) throw std::invalid_argument("normalize_sensitivity: negative entry");
  const double total = s.sum();
  if (degenerate) *degenerate = (total == 0.0);
  if (total == 0.0) return Array::Zero(s.size());
  return s / total;
}

std::vector<std::string> top_k(const SensitivityReport& report, int k) {
  const int n = static_cast<int>(report.s.size());
  if (k < 1 || k > n) throw std::invalid_argument("top_k: k out of range");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (report.s[a] != report.s[b]) return report.s[a] > report.s[b];
    return report.attribute_names[a] < report.attribute_names[b];
  });
  std::vector<std::string> names;
  names.reserve(k);
  for (int i = 0; i < k; ++i) names.push_back(report.attribute_names[order[i]]);
  return names;
}

double sdar(const Array& s) {
  if (s.size() < 1) throw std::invalid_argument("sdar: empty vector");
  const double mean = s.mean();
  return std::sqrt((s - mean).square().mean());
}

SensitivityReport single_attribute_sensitivity(const TargetModel& model,
                                               const AttributeGenerator& generator,
                                               const ToyDataset& dataset,
                                               const std::vector<long>& indices,
                                               const AttackConfig& config, int workers) {
  const int k = generator.attribute_count();
  const auto& names = generator.attribute_names();

  Array s(k);
  for (int free_attr = 0; free_attr < k; ++free_attr) {
    AttackConfig single = config;
    single.mode = AttackMode::kAttrOnly;
    for (int j = 0; j < k; ++j)
      if (j != free_attr) single.frozen_attr_caps[names[j]] = 0.0;

    const auto results = run_attack_batch(model, &generator, dataset, indices, single,
                                          AttackKind::kSia, workers);
    double total = 0.0;
    for (const AttackResult& r : results) {
      const auto& attrs = r.trace.attrs;
      total += std::abs(attrs(attrs.rows() - 1, free_attr) - attrs(0, free_attr));
    }
    s[free_attr] = total / static_cast<double>(results.size());
  }

  SensitivityReport report;
  report.s = s;
  report.normalized = normalize_sensitivity(s, &report.normalization_degenerate);
  report.attribute_names = names;
  report.sample_count = static_cast<long>(indices.size());
  report.sdar = sdar(s);
  return report;
}

void export_histogram(const SensitivityReport& report, const std::filesystem::path& csv_path,
                      const std::optional<std::filesystem::path>& png_path) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(report.s.size());
  for (long i = 0; i < report.s.size(); ++i)
    rows.push_back({report.attribute_names[i], format_double(report.s[i]),
                    format_double(report.normalized[i])});
  write_csv(csv_path, {"attribute", "sensitivity", "normalized"}, rows);

  if (png_path) {
    std::vector<double> values(report.s.data(), report.s.data() + report.s.size());
    write_bar_chart(values, *png_path);
  }
}

}  // namespace sia
