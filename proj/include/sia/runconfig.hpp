#pragma once

#include "sia/attack.hpp"
#include "sia/toyworld.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <set>
#include <string>

namespace sia {

// Configuration schema violation; carries the offending field path.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& path, const std::string& msg)
      : std::runtime_error("config error at '" + (path.empty() ? "." : path) + "': " + msg),
        path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Strict reader over a JSON object: every key must be consumed, unknown
// keys are rejected with their full path.
class ConfigReader {
 public:
  ConfigReader(const nlohmann::json& object, std::string path);

  bool has(const std::string& key) const { return object_.contains(key); }

  template <typename T>
  T require(const std::string& key) {
    if (!object_.contains(key)) throw SchemaError(child_path(key), "missing required field");
    consumed_.insert(key);
    return get_as<T>(key);
  }

  template <typename T>
  T optional(const std::string& key, T fallback) {
    if (!object_.contains(key)) return fallback;
    consumed_.insert(key);
    return get_as<T>(key);
  }

  ConfigReader child(const std::string& key);
  std::optional<ConfigReader> child_if_present(const std::string& key);

  // Object-valued map of doubles (frozen attribute caps).
  std::map<std::string, double> double_map(const std::string& key);

  // Throws if any key was never consumed.
  void finish() const;

  const nlohmann::json& raw() const { return object_; }
  std::string child_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  template <typename T>
  T get_as(const std::string& key) {
    try {
      return object_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw SchemaError(child_path(key), "wrong type");
    }
  }

  const nlohmann::json& object_;
  std::string path_;
  std::set<std::string> consumed_;
};

struct SliceSpec {
  std::string split = "test";  // train | test | all
  long begin = 0;
  long count = -1;  // -1: to the end of the split
};

SliceSpec parse_slice(ConfigReader& reader);
std::vector<long> resolve_slice(const SliceSpec& slice, const ToyDataset& dataset);

// Shared attack-config parsing (kind handled by the caller).
AttackConfig parse_attack_config(ConfigReader& reader, std::uint64_t seed);

}  // namespace sia
