#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <CLI11.hpp>

#include "reposer/harness.hpp"
#include "reposer/svg.hpp"

using namespace reposer;
namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kConfig = 2, kRuntime = 3, kIncompatible = 4 };

struct Common {
  std::optional<std::string> config_path;
  std::optional<std::string> profile;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> sets;
  std::optional<std::string> out;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "Config file (JSON tree)");
  app->add_option("--profile", c.profile, "Base profile: paper, desk, smoke, reach");
  app->add_option("--seed", c.seed, "Overrides run.seed");
  app->add_option("--set", c.sets, "section.key=value override (repeatable)");
  app->add_option("--out", c.out, "Output directory (overrides run.output_dir)");
}

EngineConfig resolve(const Common& c) {
  std::vector<std::string> sets = c.sets;
  if (c.seed) sets.push_back("run.seed=" + std::to_string(*c.seed));
  if (c.out) sets.push_back("run.output_dir=" + ojson(*c.out).dump());
  return load_config(c.config_path, c.profile, sets);
}

/// run.output_dir, placed under $REPOSER_OUTPUT_ROOT when that is set.
fs::path output_dir(const EngineConfig& config) {
  fs::path dir = config.run.output_dir;
  if (const char* root = std::getenv("REPOSER_OUTPUT_ROOT"); root && *root) {
    if (dir.is_absolute()) throw ConfigError({"run.output_dir must be relative when REPOSER_OUTPUT_ROOT is set"});
    dir = fs::path(root) / dir;
  }
  return dir;
}

/// Exclusive advisory lock on <dir>/.lock for the life of the process; the
/// kernel drops it if the process dies.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) {
    fs::create_directories(dir);
    path_ = dir / ".lock";
    fd_ = ::open(path_.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ < 0) throw std::runtime_error("cannot create lock file " + path_.string());
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw std::runtime_error("output directory " + dir.string() + " is in use by another reposer process");
    }
  }
  ~DirLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

void write_atomic(const fs::path& path, const std::string& data) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    f << data;
    f.flush();
    if (!f) throw std::runtime_error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string now_utc() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

ojson report_header(const std::string& kind, const EngineConfig& config, const std::string& checkpoint_hash,
                    const EvalOptions& o) {
  return {{"kind", kind},
          {"config_hash", config_hash(config)},
          {"checkpoint_hash", checkpoint_hash},
          {"profile", config.profile},
          {"eval_seed", o.seed},
          {"trials", o.episodes}};
}

std::string jsonl(const std::vector<ojson>& rows) {
  std::string s;
  for (const auto& r : rows) s += r.dump() + "\n";
  return s;
}

ojson trial_json(const Trial& t) {
  ojson j{{"episode", t.episode},  {"env_id", t.env_id},   {"success", t.success},
          {"success_any", t.success_any}, {"final_pos_err", t.pos_err}, {"final_rot_err", t.rot_err},
          {"return", t.episode_return}};
  if (t.fault) j["fault"] = true;
  return j;
}

std::string summary_table(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%-22s %6s %9s %17s %9s %9s\n", "label", "N", "success", "80% CI", "position",
                "rotation");
  os << buf;
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof(buf), "%-22s %6d %8.1f%% [%5.1f%%, %5.1f%%] %8.1f%% %8.1f%%\n", r.label.c_str(), r.n,
                  100 * r.success_rate, 100 * r.ci.lo, 100 * r.ci.hi, 100 * r.position_rate,
                  100 * r.orientation_rate);
    os << buf;
  }
  return os.str();
}

struct Loaded {
  Policy policy;
  std::string hash;
};

Loaded load_policy(const std::string& path, const EngineConfig& config) {
  if (!fs::exists(path)) throw CheckpointError("checkpoint not found: " + path);
  Loaded l{Policy::load(read_checkpoint(path)), file_hash(path)};
  auto env = make_env(config, 1, 0);
  l.policy.check_compatible(env->actor_dim(), env->critic_dim(), env->action_dim(), config.ppo);
  return l;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  Common common;
  bool dry_run = false;
  bool benchmark = false;
  int bench_envs = 4096;
  int bench_steps = 50;
  std::optional<std::string> resume;
  std::optional<std::uint64_t> stop_after;
};

int cmd_benchmark(const EngineConfig& config, const TrainArgs& a) {
  EngineConfig c = config;
  c.run.task = "cube";
  auto env = make_env(c, a.bench_envs, c.run.seed, c.run.workers);
  const int n = env->num_envs(), A = env->action_dim();
  std::vector<float> actions(static_cast<std::size_t>(n) * A);
  auto fill = [&](int t) {
    for (int i = 0; i < n; ++i) {
      CounterRng rng(c.run.seed, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(t), Stream::Policy);
      for (int k = 0; k < A; ++k) actions[static_cast<std::size_t>(i) * A + k] = static_cast<float>(rng.uniform(-1, 1));
    }
  };
  fill(0);
  env->step(actions, 0);
  const auto t0 = std::chrono::steady_clock::now();
  for (int t = 1; t <= a.bench_steps; ++t) {
    fill(t);
    env->step(actions, 0);
  }
  const double env_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double env_rate = static_cast<double>(n) * a.bench_steps / env_s;

  Policy p;
  p.net = ActorCritic(env->actor_dim(), env->critic_dim(), A, c.ppo, c.run.seed);
  p.actor_norm = RunningMeanStd(env->actor_dim());
  p.critic_norm = RunningMeanStd(env->critic_dim());
  const int steps = std::max(1, a.bench_steps / 5);
  const auto t1 = std::chrono::steady_clock::now();
  for (int t = 0; t < steps; ++t) env->step(p.actions(env->actor_obs(), n, true, c.run.seed, t), 0);
  const double loop_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
  const double loop_rate = static_cast<double>(n) * steps / loop_s;

  std::printf("benchmark: %d envs, %d workers\n", n, c.run.workers);
  std::printf("  env stepping only:          %.0f env-steps/sec\n", env_rate);
  std::printf("  env + policy inference:     %.0f env-steps/sec\n", loop_rate);
  std::printf("  reference: the original GPU system reported >50K samples/sec of policy inference\n");
  return kOk;
}

int cmd_train(const TrainArgs& a) {
  EngineConfig config = resolve(a.common);
  if (a.dry_run) {
    std::cout << to_json(config).dump(2) << "\n";
    return kOk;
  }
  if (a.benchmark) return cmd_benchmark(config, a);

  const fs::path dir = output_dir(config);
  DirLock lock(dir);
  const fs::path ckdir = dir / "checkpoints";
  fs::create_directories(ckdir);
  const fs::path metrics_path = dir / "metrics.jsonl", episodes_path = dir / "episodes.jsonl";

  Trainer trainer(config);
  trainer.set_dump_path(dir / "nonfinite_batch.ckpt");
  const std::string start = now_utc();
  if (a.resume) {
    const Checkpoint ck = read_checkpoint(*a.resume);
    trainer.restore(ck);
    // Drop anything logged after the checkpoint was taken.
    fs::resize_file(metrics_path, ck.manifest.at("log_sizes").at("metrics").get<std::uintmax_t>());
    fs::resize_file(episodes_path, ck.manifest.at("log_sizes").at("episodes").get<std::uintmax_t>());
    std::printf("resumed from %s at step %llu\n", a.resume->c_str(),
                static_cast<unsigned long long>(trainer.global_step()));
  } else {
    std::ofstream(metrics_path, std::ios::trunc);
    std::ofstream(episodes_path, std::ios::trunc);
  }
  write_atomic(dir / "config.json", to_json(config).dump(2) + "\n");

  std::ofstream metrics(metrics_path, std::ios::app), episodes(episodes_path, std::ios::app);
  auto save = [&](const fs::path& path) {
    metrics.flush();
    episodes.flush();
    Checkpoint ck = trainer.checkpoint();
    ck.manifest["log_sizes"] = {{"metrics", fs::file_size(metrics_path)}, {"episodes", fs::file_size(episodes_path)}};
    write_checkpoint(path, ck);
  };

  IterationStats last;
  double env_steps = 0, seconds = 0;
  while (!trainer.finished()) {
    if (a.stop_after && trainer.global_step() >= *a.stop_after) break;
    const auto t0 = std::chrono::steady_clock::now();
    last = trainer.iterate();
    seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    env_steps += trainer.last_batch().size();
    metrics << to_json(last, config.run.log_timing).dump() << "\n";
    for (const EpisodeRecord& e : trainer.last_episodes()) episodes << to_jsonl(e) << "\n";
    std::printf("iter %d step %llu reward %.4f success %.3f kl %.4f\n", last.iteration,
                static_cast<unsigned long long>(last.global_step), last.mean_reward, last.success_rate,
                last.update.approx_kl);
    std::fflush(stdout);
    if (config.run.checkpoint_interval > 0 && trainer.iteration() % config.run.checkpoint_interval == 0) {
      char name[64];
      std::snprintf(name, sizeof(name), "iter_%06d.ckpt", trainer.iteration());
      save(ckdir / name);
      save(dir / "latest.ckpt");
    }
  }
  save(dir / "latest.ckpt");
  if (trainer.finished()) save(dir / "final.ckpt");

  ojson manifest{{"code_version", REPOSER_VERSION},
                 {"config", to_json(config)},
                 {"config_hash", config_hash(config)},
                 {"seeds", {{"run", config.run.seed}, {"eval", config.harness.eval_seed}}},
                 {"start", start},
                 {"end", now_utc()},
                 {"resumed_from", a.resume ? ojson(*a.resume) : ojson(nullptr)},
                 {"global_step", trainer.global_step()},
                 {"completed", trainer.finished()},
                 {"throughput", {{"env_steps_per_sec", seconds > 0 ? env_steps / seconds : 0.0}}},
                 {"final_metrics", to_json(last, false)}};
  write_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  return kOk;
}

// ---------------------------------------------------------------- eval & co

struct EvalArgs {
  Common common;
  std::string checkpoint;
  std::optional<int> episodes;
  bool no_dr = false;
  std::string param = "scale";
  std::vector<double> grid;
  std::vector<std::string> objects;
};

EvalOptions options_from(const EngineConfig& config, const EvalArgs& a) {
  EvalOptions o = eval_options(config);
  if (a.episodes) o.episodes = *a.episodes;
  o.dr = !a.no_dr;
  return o;
}

int cmd_eval(const EvalArgs& a) {
  const EngineConfig config = resolve(a.common);
  const Loaded l = load_policy(a.checkpoint, config);
  const fs::path dir = output_dir(config);
  DirLock lock(dir);
  EvalOptions o = options_from(config, a);
  o.label = "eval";
  const EvalReport r = evaluate(l.policy, config, o);
  std::vector<ojson> rows{report_header("eval", config, l.hash, o)};
  rows.back()["summary"] = summary_json(r);
  for (const Trial& t : r.trials) rows.push_back(trial_json(t));
  write_atomic(dir / "eval.jsonl", jsonl(rows));
  const std::string table = summary_table({r});
  write_atomic(dir / "eval_summary.txt", table);
  std::cout << table;
  return kOk;
}

int cmd_sweep(const EvalArgs& a) {
  const EngineConfig config = resolve(a.common);
  const SweepParam param = sweep_param_from_string(a.param);
  const std::vector<double> grid =
      !a.grid.empty() ? a.grid : (param == SweepParam::Scale ? config.harness.scale_grid : config.harness.mass_grid);
  if (grid.empty()) throw ConfigError({"sweep grid is empty"});
  const Loaded l = load_policy(a.checkpoint, config);
  const fs::path dir = output_dir(config);
  DirLock lock(dir);
  const EvalOptions o = options_from(config, a);
  const auto points = robustness_sweep(l.policy, config, param, grid, o);
  std::vector<ojson> rows{report_header("sweep", config, l.hash, o)};
  rows.back()["param"] = to_string(param);
  std::vector<EvalReport> reps;
  for (const auto& p : points) {
    ojson row = summary_json(p.report);
    row["value"] = p.value;
    rows.push_back(row);
    reps.push_back(p.report);
  }
  const std::string name = "sweep_" + to_string(param);
  write_atomic(dir / (name + ".jsonl"), jsonl(rows));
  const std::string table = summary_table(reps);
  write_atomic(dir / (name + "_summary.txt"), table);
  std::cout << table;
  return kOk;
}

int cmd_heatmap(const EvalArgs& a) {
  const EngineConfig config = resolve(a.common);
  const Loaded l = load_policy(a.checkpoint, config);
  const fs::path dir = output_dir(config);
  DirLock lock(dir);
  EvalOptions o = options_from(config, a);
  o.label = "heatmap";
  const EvalReport r = evaluate(l.policy, config, o);
  const Heatmap h = threshold_heatmap(r.trials, config.harness.pos_thresholds, config.harness.rot_thresholds_deg);
  std::vector<ojson> rows{report_header("heatmap", config, l.hash, o)};
  rows.back()["pos_thresholds"] = h.pos_thresholds;
  rows.back()["rot_thresholds_deg"] = h.rot_thresholds_deg;
  for (std::size_t i = 0; i < h.pos_thresholds.size(); ++i)
    rows.push_back({{"pos_threshold", h.pos_thresholds[i]}, {"success", h.success[i]}});
  write_atomic(dir / "heatmap.jsonl", jsonl(rows));
  std::printf("%10s", "pos\\rot");
  for (double d : h.rot_thresholds_deg) std::printf(" %7.2f", d);
  std::printf("\n");
  for (std::size_t i = 0; i < h.pos_thresholds.size(); ++i) {
    std::printf("%10.3f", h.pos_thresholds[i]);
    for (double v : h.success[i]) std::printf(" %7.3f", v);
    std::printf("\n");
  }
  return kOk;
}

int cmd_objects(const EvalArgs& a) {
  const EngineConfig config = resolve(a.common);
  const std::vector<std::string> objects = !a.objects.empty() ? a.objects : config.harness.objects;
  for (const auto& name : objects) object_from_name(name, config.physics.object);
  const Loaded l = load_policy(a.checkpoint, config);
  const fs::path dir = output_dir(config);
  DirLock lock(dir);
  const EvalOptions o = options_from(config, a);
  const auto reps = zero_shot_objects(l.policy, config, objects, o);
  std::vector<ojson> rows{report_header("objects", config, l.hash, o)};
  for (const auto& r : reps) rows.push_back(summary_json(r));
  write_atomic(dir / "objects.jsonl", jsonl(rows));
  const std::string table = summary_table(reps);
  write_atomic(dir / "objects_summary.txt", table);
  std::cout << table;
  return kOk;
}

// ---------------------------------------------------------------- ablate

struct AblateArgs {
  Common common;
  std::vector<std::string> variants;
};

int cmd_ablate(const AblateArgs& a) {
  const EngineConfig config = resolve(a.common);
  std::vector<Variant> variants;
  for (const Variant& v : ablation_variants())
    if (a.variants.empty() || std::find(a.variants.begin(), a.variants.end(), v.name()) != a.variants.end())
      variants.push_back(v);
  if (variants.empty()) throw ConfigError({"--variant matched none of O-KP+R-KP, O-KP+R-PQ, O-PQ+R-KP, O-PQ+R-PQ"});
  const fs::path dir = output_dir(config);
  DirLock lock(dir);
  const EvalOptions o = eval_options(config);
  std::vector<ojson> rows{report_header("ablation", config, "", o)};
  rows.back()["total_steps"] = config.run.total_steps;
  std::vector<EvalReport> finals;
  run_ablation(config, variants, config.harness.seeds, [&](const AblationArm& arm) {
    for (const CurvePoint& p : arm.curve)
      rows.push_back({{"variant", arm.variant.name()},
                      {"seed", arm.seed},
                      {"step", p.step},
                      {"wall_seconds", p.wall_seconds},
                      {"success", p.success},
                      {"position", p.position},
                      {"orientation", p.orientation}});
    ojson fin = summary_json(arm.final_report);
    fin["variant"] = arm.variant.name();
    fin["seed"] = arm.seed;
    fin["final"] = true;
    fin["diverged"] = arm.diverged;
    if (arm.diverged) fin["error"] = arm.error;
    double late = 0.0;
    for (const auto& [step, term] : arm.fingertip_term)
      if (step - static_cast<std::uint64_t>(config.ppo.batch_size) > config.task.curriculum_cutoff)
        late = std::max(late, std::abs(term));
    fin["max_abs_fingertip_term_after_cutoff"] = late;
    rows.push_back(fin);
    finals.push_back(arm.final_report);
    write_atomic(dir / "ablation.jsonl", jsonl(rows));
    std::printf("%s seed %llu: success %.3f orientation %.3f%s\n", arm.variant.name().c_str(),
                static_cast<unsigned long long>(arm.seed), arm.final_report.success_rate,
                arm.final_report.orientation_rate, arm.diverged ? " (diverged)" : "");
    std::fflush(stdout);
  });
  const std::string table = summary_table(finals);
  write_atomic(dir / "ablation_summary.txt", table);
  std::cout << table;
  return kOk;
}

// ---------------------------------------------------------------- plot

struct PlotArgs {
  std::string input;
  std::optional<std::string> out;
};

std::vector<ojson> read_jsonl(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw std::runtime_error("cannot read input file " + p.string());
  std::vector<ojson> rows;
  std::string line;
  while (std::getline(f, line))
    if (!line.empty()) rows.push_back(ojson::parse(line));
  if (rows.empty()) throw std::runtime_error("input file " + p.string() + " is empty");
  return rows;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

int cmd_plot(const PlotArgs& a) {
  const fs::path in = a.input;
  if (!fs::exists(in)) throw std::runtime_error("missing input file: " + in.string());
  const std::vector<ojson> rows = read_jsonl(in);
  fs::path dir = a.out ? fs::path(*a.out) : in.parent_path();
  if (const char* root = std::getenv("REPOSER_OUTPUT_ROOT"); root && *root && a.out) dir = fs::path(root) / *a.out;
  fs::create_directories(dir);
  const std::string stem = in.stem().string();
  std::vector<fs::path> written;
  auto emit = [&](const std::string& name, const std::string& svg) {
    write_atomic(dir / name, svg);
    written.push_back(dir / name);
  };
  const ojson& head = rows.front();
  const std::string kind = head.contains("kind") ? head["kind"].get<std::string>() : "metrics";

  if (kind == "sweep") {
    Series s{"success", {}, {}, {}, {}};
    for (std::size_t i = 1; i < rows.size(); ++i) {
      s.x.push_back(rows[i]["value"].get<double>());
      s.y.push_back(rows[i]["success_rate"].get<double>());
      s.lo.push_back(rows[i]["ci_lo"].get<double>());
      s.hi.push_back(rows[i]["ci_hi"].get<double>());
    }
    const std::string param = head["param"].get<std::string>();
    emit(stem + ".svg", line_plot_svg({s}, {"Success vs object " + param, param + " (x nominal)",
                                            "success rate", false, 0.0, 1.0}));
  } else if (kind == "heatmap") {
    std::vector<std::string> rl, cl;
    for (const auto& v : head["pos_thresholds"]) rl.push_back(fmt(v.get<double>()) + " m");
    for (const auto& v : head["rot_thresholds_deg"]) cl.push_back(fmt(v.get<double>()) + " deg");
    std::vector<std::vector<double>> m;
    for (std::size_t i = 1; i < rows.size(); ++i) m.push_back(rows[i]["success"].get<std::vector<double>>());
    emit(stem + ".svg", heatmap_svg(m, rl, cl, {"Success by threshold", "rotation threshold", "position threshold"}));
  } else if (kind == "ablation") {
    std::map<std::string, Series> by_step, by_wall;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].contains("final")) continue;
      const std::string key = rows[i]["variant"].get<std::string>() + " s" + fmt(rows[i]["seed"].get<double>());
      by_step[key].name = by_wall[key].name = key;
      by_step[key].x.push_back(rows[i]["step"].get<double>());
      by_wall[key].x.push_back(rows[i]["wall_seconds"].get<double>());
      by_step[key].y.push_back(rows[i]["success"].get<double>());
      by_wall[key].y.push_back(rows[i]["success"].get<double>());
    }
    std::vector<Series> s1, s2;
    for (auto& [k, v] : by_step) s1.push_back(v);
    for (auto& [k, v] : by_wall) s2.push_back(v);
    emit(stem + "_steps.svg", line_plot_svg(s1, {"Success vs environment steps", "env steps", "success rate", false, 0.0, 1.0}));
    emit(stem + "_wallclock.svg", line_plot_svg(s2, {"Success vs wall-clock", "seconds", "success rate", false, 0.0, 1.0}));
  } else if (kind == "objects") {
    Series s{"success", {}, {}, {}, {}};
    std::string labels;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      s.x.push_back(static_cast<double>(i));
      s.y.push_back(rows[i]["success_rate"].get<double>());
      s.lo.push_back(rows[i]["ci_lo"].get<double>());
      s.hi.push_back(rows[i]["ci_hi"].get<double>());
      labels += (i > 1 ? ", " : "") + std::to_string(i) + "=" + rows[i]["label"].get<std::string>();
    }
    emit(stem + ".svg", line_plot_svg({s}, {"Zero-shot objects", labels, "success rate", false, 0.0, 1.0}));
  } else if (kind == "metrics") {
    Series succ{"success_rate", {}, {}, {}, {}}, any{"success_any_rate", {}, {}, {}, {}};
    for (const auto& r : rows) {
      if (!r.contains("global_step")) throw std::runtime_error(in.string() + " is not a report or metrics file");
      succ.x.push_back(r["global_step"].get<double>());
      any.x.push_back(r["global_step"].get<double>());
      succ.y.push_back(r["success_rate"].get<double>());
      any.y.push_back(r["success_any_rate"].get<double>());
    }
    emit(stem + ".svg", line_plot_svg({succ, any}, {"Training success", "env steps", "rate", false, 0.0, 1.0}));
  } else {
    throw std::runtime_error("cannot plot report kind '" + kind + "' from " + in.string());
  }
  for (const auto& p : written) std::cout << p.string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reposer: in-hand cube reposing simulation, training and evaluation"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train a policy");
  add_common(train, ta.common);
  train->add_flag("--dry-run", ta.dry_run, "Validate and print the resolved config");
  train->add_flag("--benchmark", ta.benchmark, "Measure env-steps/sec and exit");
  train->add_option("--bench-envs", ta.bench_envs, "Envs for --benchmark")->check(CLI::PositiveNumber);
  train->add_option("--bench-steps", ta.bench_steps, "Steps for --benchmark")->check(CLI::PositiveNumber);
  train->add_option("--resume", ta.resume, "Resume from a training checkpoint");
  train->add_option("--stop-after-steps", ta.stop_after, "Stop (with a checkpoint) once this many steps are done");

  EvalArgs ea, sa, ha, oa;
  auto eval_cmd = [&](const char* name, const char* help, EvalArgs& args) {
    auto* c = app.add_subcommand(name, help);
    add_common(c, args.common);
    c->add_option("--checkpoint", args.checkpoint, "Policy checkpoint")->required();
    c->add_option("--episodes", args.episodes, "Overrides harness.eval_episodes");
    c->add_flag("--no-dr", args.no_dr, "Disable all randomization");
    return c;
  };
  eval_cmd("eval", "Evaluate a checkpoint", ea);
  auto* sweep = eval_cmd("sweep", "Robustness sweep over object scale or mass", sa);
  sweep->add_option("--param", sa.param, "scale or mass");
  sweep->add_option("--grid", sa.grid, "Grid values (defaults to the harness grid)")->delimiter(',');
  eval_cmd("heatmap", "Success-threshold heatmap", ha);
  auto* objects = eval_cmd("objects", "Zero-shot object transfer", oa);
  objects->add_option("--objects", oa.objects, "Object names")->delimiter(',');

  AblateArgs aa;
  auto* ablate = app.add_subcommand("ablate", "Keypoint observation/reward ablation");
  add_common(ablate, aa.common);
  ablate->add_option("--variant", aa.variants, "Restrict to these variants (e.g. O-KP+R-KP)");

  PlotArgs pa;
  auto* plot = app.add_subcommand("plot", "Render SVG figures from a report or metrics file");
  plot->add_option("input", pa.input, "Report JSONL")->required();
  plot->add_option("--out", pa.out, "Output directory (default: next to the input)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (train->parsed()) return cmd_train(ta);
    if (app.got_subcommand("eval")) return cmd_eval(ea);
    if (sweep->parsed()) return cmd_sweep(sa);
    if (app.got_subcommand("heatmap")) return cmd_heatmap(ha);
    if (objects->parsed()) return cmd_objects(oa);
    if (ablate->parsed()) return cmd_ablate(aa);
    if (plot->parsed()) return cmd_plot(pa);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const IncompatibleCheckpoint& e) {
    std::cerr << "error: incompatible checkpoint: " << e.what() << "\n";
    return kIncompatible;
  } catch (const UnsupportedObject& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kRuntime;
}
