#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "reposer/env.hpp"
#include "reposer/ppo.hpp"
#include "reposer/reach.hpp"

namespace reposer {

struct HarnessConfig {
  int eval_episodes = 1024;
  int eval_envs = 1024;
  std::uint64_t eval_seed = 20211;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  // Number of evaluation points along each ablation training curve.
  int curve_points = 10;
  bool ablation_dr = true;
  std::vector<double> scale_grid{0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5};
  std::vector<double> mass_grid{0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0};
  std::vector<double> pos_thresholds{0.01, 0.02, 0.03, 0.04, 0.05};
  std::vector<double> rot_thresholds_deg{5.73, 11.0, 22.0, 30.0, 45.0, 60.0};
  std::vector<std::string> objects{"cube_6.5cm",       "ball_r3.75cm",     "cuboid_2x8x2cm",  "cuboid_2x8x4cm",
                                   "cuboid_4x8x4cm",   "cuboid_2x6.5x2cm", "cuboid_2x6.5x4cm", "cuboid_4x6.5x4cm"};
  double ci_level = 0.8;

  void validate() const;
};

struct RunConfig {
  std::string task = "cube";  // cube | reach
  std::uint64_t seed = 0;
  std::uint64_t total_steps = 1'000'000'000;
  int num_envs = 16384;
  std::string output_dir = "run";
  // In PPO iterations; 0 writes only the final checkpoint.
  int checkpoint_interval = 50;
  int workers = 1;
  // Adds wall-clock fields to metrics.jsonl (off keeps it byte-reproducible).
  bool log_timing = false;

  void validate() const;
};

struct EngineConfig {
  std::string profile = "paper";
  PhysicsConfig physics;
  TaskConfig task;
  DRConfig dr;
  PPOConfig ppo;
  ReachConfig reach;
  HarnessConfig harness;
  RunConfig run;

  /// Throws ConfigError listing every problem found.
  void validate() const;
  EnvConfig env() const { return {physics, task, dr}; }
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

nlohmann::ordered_json to_json(const EngineConfig& config);

/// Applies `overlay` on top of `base`. Keys absent from the base tree and
/// values of the wrong type are rejected. The result is validated.
EngineConfig apply_overlay(const EngineConfig& base, const nlohmann::json& overlay);

/// Strict parse of a complete or partial tree. An optional top-level
/// "profile" key selects the base profile (default "paper").
EngineConfig from_json(const nlohmann::json& tree);

const std::vector<std::string>& profile_names();
EngineConfig make_profile(const std::string& name);

/// "section.key=value"; the value is parsed as JSON, falling back to a string.
void apply_set(nlohmann::json& overlay, const std::string& assignment);

/// Resolution order: profile, config file, --set overrides.
EngineConfig load_config(const std::optional<std::string>& path, const std::optional<std::string>& profile,
                         const std::vector<std::string>& sets);

/// Stable hash of the resolved config, ignoring run.output_dir,
/// run.checkpoint_interval, run.workers and run.log_timing.
std::string config_hash(const EngineConfig& config);

}  // namespace reposer
