#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numbers>

#include "reposer/config.hpp"

using namespace reposer;

TEST_CASE("config: every profile round-trips through its tree") {
  for (const auto& name : profile_names()) {
    const EngineConfig c = make_profile(name);
    c.validate();
    const auto tree = to_json(c);
    const EngineConfig back = from_json(nlohmann::json::parse(tree.dump()));
    CHECK(to_json(back) == tree);
    CHECK(config_hash(back) == config_hash(c));
  }
}

TEST_CASE("config: the paper profile carries the published numbers") {
  const EngineConfig c = make_profile("paper");
  CHECK(c.ppo.gamma == 0.99);
  CHECK(c.ppo.tau == 0.95);
  CHECK(c.ppo.lr_start == 5e-4);
  CHECK(c.ppo.lr_end == 1e-6);
  CHECK(c.ppo.batch_size == 65536);
  CHECK(c.ppo.minibatch_size == 16384);
  CHECK(c.ppo.epochs == 8);
  CHECK(c.ppo.clip == 0.2);
  CHECK(c.ppo.entropy_coef == 0.0);
  CHECK(c.ppo.actor_hidden == std::vector<int>{256, 256, 128, 128});
  CHECK(c.ppo.critic_hidden == std::vector<int>{512, 512, 256, 128});
  CHECK(c.task.w_fingertip_to_object == -750.0);
  CHECK(c.task.w_fingertip_velocity == -0.5);
  CHECK(c.task.w_object_goal == 40.0);
  CHECK(c.task.keypoint_kernel.a == 30.0);
  CHECK(c.task.posquat_kernel.a == 50.0);
  CHECK(c.task.curriculum_cutoff == 50'000'000);
  CHECK(c.task.success.position == 0.02);
  CHECK(c.task.success.rotation == 22.0 * std::numbers::pi / 180.0);
  CHECK(c.task.torque_limit == 0.36);
  CHECK(c.physics.dt == 0.02);
  CHECK(c.dr.cube_position.sigma == 0.002);
  CHECK(c.dr.cube_orientation.sigma == 0.020);
  CHECK(c.dr.joint_position.sigma == 0.003);
  CHECK(c.dr.joint_position.sigma_corr == 0.004);
  CHECK(c.dr.torque.sigma == 0.02);
  CHECK(c.dr.torque.sigma_corr == 0.01);
  CHECK(c.dr.object_scale.lo == 0.97);
  CHECK(c.dr.object_scale.hi == 1.03);
  CHECK(c.dr.object_mass.lo == 0.70);
  CHECK(c.dr.table_friction.hi == 1.50);
  CHECK(c.run.num_envs == 16384);
  CHECK(c.harness.eval_episodes == 1024);
  CHECK(c.harness.ci_level == 0.8);
}

TEST_CASE("config: unknown keys and bad types are reported with their path") {
  auto issues = [](const nlohmann::json& j) {
    try {
      from_json(j);
    } catch (const ConfigError& e) {
      return e.issues();
    }
    return std::vector<std::string>{};
  };
  auto one = issues({{"ppo", {{"gamma", 0.9}, {"gamme", 0.9}}}});
  REQUIRE(one.size() == 1);
  CHECK(one[0].find("ppo.gamme") != std::string::npos);
  CHECK(issues({{"nosuch", 1}}).size() == 1);
  CHECK(issues({{"ppo", 3}}).size() == 1);
  CHECK(issues({{"ppo", {{"epochs", 1.5}}}}).size() == 1);
  CHECK(issues({{"ppo", {{"epochs", "8"}}}}).size() == 1);
  CHECK(issues({{"run", {{"seed", -1}}}}).size() == 1);
  CHECK(issues({{"task", {{"observation", "euler"}}}}).size() == 1);
  CHECK(issues({{"ppo", {{"minibatch_size", 3000}}}}).size() >= 1);
  CHECK(issues({{"run", {{"task", "walk"}}}}).size() == 1);
  CHECK(issues({{"physics", {{"hand", {{"joint_inertia", {1.0, 2.0}}}}}}}).size() == 1);
  CHECK_THROWS_AS(make_profile("huge"), ConfigError);
}

TEST_CASE("config: integral floats are accepted for integer keys") {
  const EngineConfig c = from_json({{"run", {{"total_steps", 5e7}}}});
  CHECK(c.run.total_steps == 50'000'000);
}

TEST_CASE("config: --set overrides") {
  nlohmann::json o = nlohmann::json::object();
  apply_set(o, "ppo.lr_start=5e-3");
  apply_set(o, "task.observation=posquat");
  apply_set(o, "harness.seeds=[4,5]");
  apply_set(o, "run.output_dir=out/x");
  const EngineConfig c = from_json(o);
  CHECK(c.ppo.lr_start == 5e-3);
  CHECK(c.task.observation == PoseRepr::PosQuat);
  CHECK(c.harness.seeds == std::vector<std::uint64_t>{4, 5});
  CHECK(c.run.output_dir == "out/x");
  CHECK_THROWS_AS(apply_set(o, "novalue"), ConfigError);
}

TEST_CASE("config: file, profile and overrides compose") {
  const auto path = std::filesystem::temp_directory_path() / "reposer_cfg_test.json";
  std::ofstream(path) << R"({"profile": "desk", "run": {"seed": 7}})";
  const EngineConfig c = load_config(path.string(), std::nullopt, {"run.num_envs=2048"});
  CHECK(c.profile == "desk");
  CHECK(c.run.seed == 7);
  CHECK(c.run.num_envs == 2048);
  CHECK(c.run.total_steps == make_profile("desk").run.total_steps);
  CHECK_THROWS_AS(load_config(path.string(), std::string("smoke"), {}), ConfigError);
  CHECK_THROWS_AS(load_config(std::string("/nonexistent/cfg.json"), std::nullopt, {}), ConfigError);
  CHECK(config_hash(c) != config_hash(make_profile("desk")));
}
