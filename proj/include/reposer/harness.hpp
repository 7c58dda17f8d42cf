#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "reposer/config.hpp"
#include "reposer/train.hpp"

namespace reposer {

struct Trial {
  std::uint64_t episode = 0;
  int env_id = 0;
  bool success = false;
  bool success_any = false;
  double pos_err = 0.0;  // m
  double rot_err = 0.0;  // rad
  double episode_return = 0.0;
  bool fault = false;
};

/// Two-sided Wilson score interval for k successes out of n.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};
Interval wilson_interval(int successes, int n, double level);

struct EvalReport {
  std::string label;
  int n = 0;
  int successes = 0;
  double success_rate = 0.0;
  Interval ci;
  double ci_level = 0.8;
  double success_any_rate = 0.0;
  double position_rate = 0.0;
  double orientation_rate = 0.0;
  double mean_return = 0.0;
  std::vector<Trial> trials;
};

nlohmann::ordered_json summary_json(const EvalReport& r);

struct EvalOptions {
  int episodes = 1024;
  int envs = 1024;
  std::uint64_t seed = 0;
  // false disables every randomization (env factors, noise, external
  // forces); the camera rate is kept.
  bool dr = true;
  std::optional<EnvParams> fixed_params;
  std::optional<ObjectSpec> object;
  std::string label;
};

EvalOptions eval_options(const EngineConfig& config);

/// Deterministic rollouts of the policy mean. Trial k runs on env k mod envs,
/// so the same seed yields the same goals and resets for every policy.
EvalReport evaluate(const Policy& policy, const EngineConfig& config, const EvalOptions& options);

struct SuccessBreakdown {
  double position = 0.0;
  double orientation = 0.0;
  double combined = 0.0;
};

/// Scores final errors against the thresholds independently. Faulted trials
/// fail on both axes.
SuccessBreakdown success_breakdown(const std::vector<Trial>& trials, const SuccessThresholds& thresholds);

struct Heatmap {
  std::vector<double> pos_thresholds;      // m, ascending
  std::vector<double> rot_thresholds_deg;  // ascending
  std::vector<std::vector<double>> success;  // [pos][rot]
  int n = 0;
};

/// Re-scores the same trials for every threshold pair.
Heatmap threshold_heatmap(const std::vector<Trial>& trials, std::vector<double> pos_thresholds,
                          std::vector<double> rot_thresholds_deg);

enum class SweepParam { Scale, Mass };
SweepParam sweep_param_from_string(const std::string& s);
std::string to_string(SweepParam p);

struct SweepPoint {
  double value = 0.0;
  EvalReport report;
};

/// Pins one object factor at each grid value with every other randomization off.
std::vector<SweepPoint> robustness_sweep(const Policy& policy, const EngineConfig& config, SweepParam param,
                                         const std::vector<double>& grid, const EvalOptions& base);

class UnsupportedObject : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parses "cube_<side>cm", "ball_r<radius>cm" and "cuboid_<x>x<y>x<z>cm".
/// Mass follows the training cube's density.
ObjectSpec object_from_name(const std::string& name, const ObjectSpec& training);

/// Swaps in each object with environment and observation/action
/// randomization off. Keypoints stay on the training cube.
std::vector<EvalReport> zero_shot_objects(const Policy& policy, const EngineConfig& config,
                                          const std::vector<std::string>& objects, const EvalOptions& base);

struct Variant {
  PoseRepr observation = PoseRepr::Keypoints;
  PoseRepr reward = PoseRepr::Keypoints;
  std::string name() const;
};

std::vector<Variant> ablation_variants();

struct CurvePoint {
  std::uint64_t step = 0;
  double wall_seconds = 0.0;
  double success = 0.0;
  double position = 0.0;
  double orientation = 0.0;
};

struct AblationArm {
  Variant variant;
  std::uint64_t seed = 0;
  std::vector<CurvePoint> curve;
  EvalReport final_report;
  bool diverged = false;
  std::string error;
  // Logged weighted fingertip term per training iteration, with its step.
  std::vector<std::pair<std::uint64_t, double>> fingertip_term;
};

/// Trains every variant for every seed and evaluates `curve_points` times on
/// shared evaluation episodes. `on_arm` is called as each arm finishes.
std::vector<AblationArm> run_ablation(const EngineConfig& config, const std::vector<Variant>& variants,
                                      const std::vector<std::uint64_t>& seeds,
                                      const std::function<void(const AblationArm&)>& on_arm = {});

}  // namespace reposer
