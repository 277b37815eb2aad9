#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "symreach/agent.hpp"
#include "symreach/demo.hpp"
#include "symreach/env.hpp"

namespace symreach::config {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Paths {
    std::string demo_file;
    std::string checkpoint;
};

struct RunConfig {
    env::TaskKind task = env::TaskKind::P2P;
    std::uint64_t seed = 1;
    int n_trials = 500;
    env::EnvParams env;
    demo::DemoOptions demo;
    agent::TrainConfig train;
    Paths paths;

    /// Environment parameters with the episode horizon taken from train.n_tau.
    env::EnvParams env_params() const;
    /// Throws ConfigError naming the offending section.key.
    void validate() const;
};

/// Every settable key as "section.name", in snapshot order.
std::vector<std::string> known_keys();

/// Sets one key from its text form. Unknown keys and malformed values throw ConfigError.
void set_value(RunConfig& config, const std::string& key, const std::string& value);
std::string get_value(const RunConfig& config, const std::string& key);

/// Applies an INI file on top of `config`; unknown sections or keys are errors.
void load_file(RunConfig& config, const std::filesystem::path& path);

/// Applies "section.key=value" overrides in order.
void apply_overrides(RunConfig& config, const std::vector<std::string>& assignments);

std::vector<std::string> preset_names();
/// Applies a named preset on top of `config`.
void apply_preset(RunConfig& config, const std::string& name);

/// Full INI rendering that load_file reads back to an identical config.
std::string snapshot(const RunConfig& config);

}  // namespace symreach::config
