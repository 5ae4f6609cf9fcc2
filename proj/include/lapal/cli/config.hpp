#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lapal/orchestrator/run.hpp"

namespace lapal::cli {

// Everything a pipeline command needs, resolved from preset < file < flags.
struct TrainConfig {
  std::string preset = "desk";
  orch::RunConfig run;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  int demo_episodes = 64;
  std::uint64_t demo_seed = 0;
};

// "desk": small networks sized for a single CPU core. "paper": the published
// network widths and learning rates. Throws ConfigError for other names.
TrainConfig preset_config(const std::string& name);
const std::vector<std::string>& preset_names();

// Flat typed key-value text:
//
//   [run]
//   string algo = lapal_agnostic
//   int total_env_steps = 20000
//   float disc_lr = 3.0000000000000001e-05
//   ints disc_hidden = 64,64
//
// Types: int, u64, float (printed with %.17g), bool (true/false), string,
// ints and u64s (comma separated). Blank lines and lines starting with '#'
// are ignored. Serialization lists every key in a fixed order, so
// parse(serialize(c)) == c and serialize is byte-stable.
std::string serialize_config(const TrainConfig& config);
// Keys absent from the text keep their values from base. Throws ConfigError
// naming the line on unknown sections or keys, type mismatches or bad values.
TrainConfig parse_config(const std::string& text, const TrainConfig& base);
TrainConfig load_config(const std::string& path, const TrainConfig& base);

// Applies "section.key=value" (value in the config file syntax of the key's type).
void apply_override(TrainConfig& config, const std::string& assignment);

// Every "section.key" the format knows, in serialization order.
std::vector<std::string> config_keys();

// preset < file < overrides. Without an explicit preset the file's
// general.preset (or "desk") selects the base.
TrainConfig resolve_config(const std::string& preset, const std::string& file,
                           const std::vector<std::string>& overrides);

bool configs_equal(const TrainConfig& a, const TrainConfig& b);

}  // namespace lapal::cli
