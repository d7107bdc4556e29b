#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace sia {

struct RunContext {
  std::filesystem::path out_dir;
  bool plots = false;
  int workers = 1;
};

void cmd_gen_data(const nlohmann::json& config, const RunContext& ctx);
void cmd_train_target(const nlohmann::json& config, const RunContext& ctx);
void cmd_attack(const nlohmann::json& config, const RunContext& ctx);
void cmd_diagnose(const nlohmann::json& config, const RunContext& ctx);
void cmd_advtrain(const nlohmann::json& config, const RunContext& ctx);
void cmd_augment(const nlohmann::json& config, const RunContext& ctx);
void cmd_report(const nlohmann::json& config, const RunContext& ctx);

// Full CLI: parses arguments, dispatches, maps errors to exit codes
// (2 schema violation, 3 missing input, 4 numeric failure).
int run_cli(int argc, const char* const* argv);

}  // namespace sia
