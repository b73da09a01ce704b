#ifndef SPVI_TOOLS_CLI_COMMANDS_HPP
#define SPVI_TOOLS_CLI_COMMANDS_HPP

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace spvi::cli {

/// Invalid configuration; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Values given on the command line; each one overrides the config file.
struct FlagOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> engine;
  std::optional<double> alpha;
  std::optional<int> mc_samples;
  std::optional<unsigned> threads;
  std::optional<std::string> out_dir;
};

/// Reads the JSON config (empty path = empty object) and applies overrides.
nlohmann::json load_config(const std::string& path, const FlagOverrides& flags);

/// Rejects unknown keys anywhere in the tree.
void validate_config(const nlohmann::json& cfg);

void cmd_simulate(const nlohmann::json& cfg);
void cmd_fit(const nlohmann::json& cfg);
void cmd_diagnose(const nlohmann::json& cfg);
void cmd_report(const nlohmann::json& cfg, const std::vector<std::string>& inputs);

/// Runs a command and converts exceptions to the exit-code contract.
int run_guarded(const std::function<void()>& fn);

}  // namespace spvi::cli

#endif  // SPVI_TOOLS_CLI_COMMANDS_HPP
