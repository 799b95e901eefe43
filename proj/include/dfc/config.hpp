#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dfc/agents.hpp"
#include "dfc/env.hpp"

namespace dfc {

struct CodecConfig {
  int num_features = 8;  // F
  int dim = 1;           // K
  int max_level = 6;     // V
  int dataset_size = 50000;
  int lloyd_iterations = 300;
  int pixel_pool = 4;
  double ridge = 1e-3;
  double holdout_fraction = 0.2;
};

struct EvalConfig {
  int episodes = 1000;
  int trace_episodes = 250;
  int bootstrap_resamples = 1000;
  int heatmap_bins = 20;
  int min_count = 20;
  int entropy_bins = 10;
  int lenhist_bin = 25;
  // Static schemes at v = 1..V with the robot trained at V.
  bool static_sweep = true;
};

struct RunConfig {
  EnvConfig env;
  CodecConfig codec;
  TrainConfig train;
  EvalConfig eval;
  std::vector<double> beta_grid_a{2.0, 7.0, 12.0};
  std::vector<double> beta_grid_b{0.003, 0.01, 0.014, 0.017};
  std::vector<double> beta_grid_c{0.03, 0.1, 0.3};
  std::vector<CommLevel> observer_levels{CommLevel::kA, CommLevel::kB, CommLevel::kC};
  std::string out_dir = "out";
  std::uint64_t seed = 1;

  const std::vector<double>& beta_grid(CommLevel level) const;
  // Throws naming the offending key.
  void validate() const;
};

// Flat "key = value" lines grouped under [section] headers; '#' starts a
// comment. Keys are addressed as section.key. Unknown keys are rejected.
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);

// key is section.key, e.g. "train.gamma".
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& cfg, const std::string& key);
std::vector<std::string> config_keys();

// Round-trips through parse_config.
void write_config(std::ostream& out, const RunConfig& cfg);

}  // namespace dfc
