#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "reposer/train.hpp"

using namespace reposer;
namespace fs = std::filesystem;

namespace {

EngineConfig small_reach() {
  EngineConfig c = make_profile("reach");
  c.run.num_envs = 16;
  c.run.total_steps = 16 * 50 * 4;
  c.ppo.batch_size = 16 * 50;
  c.ppo.minibatch_size = 200;
  c.ppo.epochs = 2;
  c.ppo.actor_hidden = {16};
  c.ppo.critic_hidden = {16};
  return c;
}

EngineConfig small_cube() {
  EngineConfig c = make_profile("smoke");
  c.run.num_envs = 8;
  c.task.episode_length = 10;
  c.ppo.batch_size = 8 * 12;
  c.ppo.minibatch_size = 48;
  c.ppo.actor_hidden = {16};
  c.ppo.critic_hidden = {16};
  return c;
}

std::string run_metrics(Trainer& t, int iterations) {
  std::string out;
  for (int i = 0; i < iterations; ++i) out += to_json(t.iterate(), false).dump() + "\n";
  return out;
}

}  // namespace

TEST_CASE("trainer: same seed, same metrics and parameters") {
  Trainer a(small_reach()), b(small_reach());
  CHECK(run_metrics(a, 3) == run_metrics(b, 3));
  const auto pa = a.policy().net.actor.params(), pb = b.policy().net.actor.params();
  CHECK(std::equal(pa.begin(), pa.end(), pb.begin(), pb.end()));
  EngineConfig other = small_reach();
  other.run.seed = 1;
  Trainer c(other);
  CHECK(run_metrics(c, 1) != run_metrics(a, 1));
}

TEST_CASE("trainer: resume from a checkpoint matches an uninterrupted run") {
  for (const EngineConfig& cfg : {small_reach(), small_cube()}) {
    Trainer full(cfg);
    const std::string reference = run_metrics(full, 4);

    Trainer first(cfg);
    std::string resumed = run_metrics(first, 2);
    const fs::path p = fs::temp_directory_path() / "reposer_resume.ckpt";
    write_checkpoint(p, first.checkpoint());
    Trainer second(cfg);
    second.restore(read_checkpoint(p));
    CHECK(second.global_step() == first.global_step());
    resumed += run_metrics(second, 2);
    CHECK(resumed == reference);
  }
}

TEST_CASE("trainer: checkpoint under another config is refused") {
  Trainer a(small_reach());
  EngineConfig other = small_reach();
  other.ppo.actor_hidden = {8};
  Trainer b(other);
  CHECK_THROWS_AS(b.restore(a.checkpoint()), IncompatibleCheckpoint);
  const Policy p = Policy::load(a.checkpoint());
  CHECK_THROWS_AS(p.check_compatible(4, 4, 2, other.ppo), IncompatibleCheckpoint);
  CHECK_NOTHROW(p.check_compatible(4, 4, 2, small_reach().ppo));
}

TEST_CASE("trainer: saved policy gives identical deterministic actions") {
  Trainer t(small_cube());
  run_metrics(t, 2);
  const fs::path p = fs::temp_directory_path() / "reposer_policy.ckpt";
  Checkpoint ck;
  t.policy().save(ck);
  write_checkpoint(p, ck);
  const Policy loaded = Policy::load(read_checkpoint(p));
  const auto& obs = t.env().actor_obs();
  const int n = t.env().num_envs();
  CHECK(loaded.actions(obs, n) == t.policy().actions(obs, n));
  for (float a : loaded.actions(obs, n)) CHECK(std::abs(a) <= 1.0f);
}

TEST_CASE("trainer: fingertip term vanishes once past the curriculum cutoff") {
  EngineConfig c = small_cube();
  // 96 env steps per iteration: the last step of iteration 1 happens at 184.
  c.task.curriculum_cutoff = 184;
  Trainer t(c);
  const auto s0 = t.iterate();
  CHECK(s0.reward_fingertip_to_object != 0.0);
  CHECK(t.iterate().reward_fingertip_to_object != 0.0);
  for (int i = 0; i < 3; ++i) {
    const auto s = t.iterate();
    CHECK(s.reward_fingertip_to_object == 0.0);
  }
  CHECK(s0.episodes > 0);
}

TEST_CASE("trainer: non-finite update aborts and dumps the batch") {
  Trainer t(small_reach());
  const fs::path p = fs::temp_directory_path() / "reposer_nonfinite.ckpt";
  fs::remove(p);
  t.set_dump_path(p);
  t.mutable_policy().net.critic.params()[0] = NAN;
  CHECK_THROWS_AS(t.iterate(), NonFiniteError);
  const Checkpoint dump = read_checkpoint(p);
  CHECK(dump.manifest["kind"] == "nonfinite-batch");
  CHECK(dump.tensor("rewards").numel() == static_cast<std::size_t>(t.last_batch().size()));
}
