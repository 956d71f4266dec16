#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "robust_te/dataio.hpp"
#include "robust_te/policy.hpp"

namespace robust_te {

inline const std::vector<std::string>& known_schemes() {
  static const std::vector<std::string> kSchemes = {"drl", "hindsight", "mlu-optimal", "ecmp",
                                                    "oblivious"};
  return kSchemes;
}

struct CapacityRange {
  double lo = 1e6;
  double hi = 9e6;
  std::uint64_t seed = 1;
};

struct ExperimentConfig {
  std::string topology_path;
  // Either a trace file or a synthetic generator.
  std::string trace_path;
  std::string trace_format = "csv";
  double unit_scale = 1.0;
  double interval_seconds = 300.0;
  std::optional<SynthOptions> synth;
  std::optional<CapacityRange> random_capacities;

  double scale = 1.0;
  std::size_t k = 4;
  std::vector<std::size_t> c_values{2};
  std::vector<std::size_t> w_values{1};
  std::optional<std::size_t> r_size;  // empty: calibrate from MLU-optimal routing

  std::size_t epochs = 1000;
  std::size_t epoch_length = 0;  // window starts per epoch; 0 = one simulated day
  std::size_t batch_size = 0;    // experiences per update; 0 = one update per epoch
  std::size_t samples_per_state = 4;
  std::size_t checkpoint_every = 50;
  double train_frac = 0.7;
  std::uint64_t split_seed = 1;
  std::uint64_t init_seed = 2;
  std::uint64_t sample_seed = 3;

  std::vector<std::string> schemes = known_schemes();
  std::string output_dir = "out";

  std::size_t filters = 128;
  std::size_t hidden = 128;
  OptimizerSettings optimizer;
  std::string normalization = "global-max";
  std::size_t threads = 1;
  bool export_lp = false;
};

// JSON config; relative paths resolve against `base_dir`. Unknown keys and
// invalid values raise ConfigError.
ExperimentConfig parse_config(const std::string& json_text, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);
void validate_config(const ExperimentConfig& config);

// Canonical JSON of the effective configuration and its FNV-1a hash.
std::string config_to_json(const ExperimentConfig& config);
std::string config_hash(const ExperimentConfig& config);

}  // namespace robust_te
