#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "reposer/harness.hpp"

namespace py = pybind11;
using namespace reposer;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::object to_py(const nlohmann::ordered_json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

py::array_t<float> matrix(const std::vector<float>& v, int rows) {
  const py::ssize_t cols = rows > 0 ? static_cast<py::ssize_t>(v.size()) / rows : 0;
  py::array_t<float> out({static_cast<py::ssize_t>(rows), cols});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

Quaternion quat(const std::array<double, 4>& q) { return {q[0], q[1], q[2], q[3]}; }

Pose pose(const std::array<double, 3>& t, const std::array<double, 4>& q) {
  return {{t[0], t[1], t[2]}, quat(q)};
}

py::dict episode_dict(const EpisodeRecord& e) {
  py::dict d;
  d["episode"] = e.episode;
  d["env_id"] = e.env_id;
  d["success"] = e.success;
  d["success_any"] = e.success_any;
  d["final_pos_err"] = e.final_pos_err;
  d["final_rot_err"] = e.final_rot_err;
  d["return"] = e.episode_return;
  d["fault"] = e.fault;
  return d;
}

py::dict report_dict(const EvalReport& r) {
  py::dict d = to_py(summary_json(r));
  py::list trials;
  for (const Trial& t : r.trials) {
    py::dict x;
    x["episode"] = t.episode;
    x["env_id"] = t.env_id;
    x["success"] = t.success;
    x["success_any"] = t.success_any;
    x["final_pos_err"] = t.pos_err;
    x["final_rot_err"] = t.rot_err;
    x["return"] = t.episode_return;
    x["fault"] = t.fault;
    trials.append(x);
  }
  d["trials"] = trials;
  return d;
}

std::vector<float> flat_actions(const FloatArray& a, const VecEnv& env) {
  if (a.ndim() != 2 || a.shape(0) != env.num_envs() || a.shape(1) != env.action_dim())
    throw std::invalid_argument("actions must have shape (num_envs, action_dim)");
  return {a.data(), a.data() + a.size()};
}

}  // namespace

PYBIND11_MODULE(_reposer, m) {
  m.doc() = "In-hand cube reposing: simulation, PPO training and evaluation";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IncompatibleCheckpoint>(m, "IncompatibleCheckpoint", PyExc_RuntimeError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_RuntimeError);
  py::register_exception<UnsupportedObject>(m, "UnsupportedObject", PyExc_ValueError);
  py::register_exception<NonFiniteError>(m, "NonFiniteError", PyExc_FloatingPointError);

  py::class_<EngineConfig>(m, "Config")
      .def("to_json", [](const EngineConfig& c) { return to_json(c).dump(); })
      .def_static("from_json", [](const std::string& s) { return from_json(nlohmann::json::parse(s)); })
      .def("hash", [](const EngineConfig& c) { return config_hash(c); })
      .def_property_readonly("profile", [](const EngineConfig& c) { return c.profile; });

  m.def("profile_names", &profile_names);
  m.def("load_config", &load_config, py::arg("path") = std::nullopt, py::arg("profile") = std::nullopt,
        py::arg("sets") = std::vector<std::string>{});

  m.def("rot_dist", [](std::array<double, 4> a, std::array<double, 4> b) { return rot_dist(quat(a), quat(b)); },
        "Rotation angle between two (x, y, z, w) quaternions");
  m.def("logistic_kernel", [](double x, double a, double b) { return logistic_kernel(x, {a, b}); }, py::arg("x"),
        py::arg("a") = 30.0, py::arg("b") = 2.0);
  m.def(
      "keypoints",
      [](std::array<double, 3> t, std::array<double, 4> q, double half_extent) {
        const KeypointSet k = pose_to_keypoints(pose(t, q), cube_local_keypoints(half_extent));
        py::array_t<double> out({kNumKeypoints, 3});
        double* p = out.mutable_data();
        for (const Vec3& v : k.points) *p++ = v.x, *p++ = v.y, *p++ = v.z;
        return out;
      },
      py::arg("translation"), py::arg("rotation"), py::arg("half_extent") = 0.0325,
      "World-frame cube corners, shape (8, 3)");
  m.def("wilson_interval", [](int k, int n, double level) {
    const Interval i = wilson_interval(k, n, level);
    return std::make_pair(i.lo, i.hi);
  }, py::arg("successes"), py::arg("n"), py::arg("level") = 0.8);

  py::class_<VecEnv>(m, "Env")
      .def_property_readonly("num_envs", &VecEnv::num_envs)
      .def_property_readonly("actor_dim", &VecEnv::actor_dim)
      .def_property_readonly("critic_dim", &VecEnv::critic_dim)
      .def_property_readonly("action_dim", &VecEnv::action_dim)
      .def("reset_all", &VecEnv::reset_all)
      .def("step", [](VecEnv& e, const FloatArray& a, std::uint64_t global_step) {
        e.step(flat_actions(a, e), global_step);
      }, py::arg("actions"), py::arg("global_step") = 0)
      .def("actor_obs", [](const VecEnv& e) { return matrix(e.actor_obs(), e.num_envs()); })
      .def("critic_obs", [](const VecEnv& e) { return matrix(e.critic_obs(), e.num_envs()); })
      .def("rewards", [](const VecEnv& e) { return py::array_t<float>(e.rewards().size(), e.rewards().data()); })
      .def("dones", [](const VecEnv& e) {
        return py::array_t<std::uint8_t>(e.dones().size(), e.dones().data()).attr("astype")("bool");
      })
      .def("finished", [](const VecEnv& e) {
        py::list l;
        for (const auto& r : e.finished()) l.append(episode_dict(r));
        return l;
      });
  m.def("make_env", [](const EngineConfig& c, int n, std::uint64_t seed) { return make_env(c, n, seed); },
        py::arg("config"), py::arg("num_envs"), py::arg("seed") = 0);

  py::class_<Policy>(m, "Policy")
      .def_static("load", [](const std::filesystem::path& p) { return Policy::load(read_checkpoint(p)); })
      .def("save", [](const Policy& p, const std::filesystem::path& path) {
        Checkpoint c;
        c.manifest["kind"] = "policy";
        p.save(c);
        write_checkpoint(path, c);
      })
      .def("actions", [](const Policy& p, const FloatArray& obs, bool stochastic, std::uint64_t seed,
                         std::uint64_t draw) {
        if (obs.ndim() != 2) throw std::invalid_argument("obs must be 2-D");
        const int n = static_cast<int>(obs.shape(0));
        return matrix(p.actions({obs.data(), static_cast<std::size_t>(obs.size())}, n, stochastic, seed, draw), n);
      }, py::arg("obs"), py::arg("stochastic") = false, py::arg("seed") = 0, py::arg("draw_index") = 0);

  py::class_<Trainer>(m, "Trainer")
      .def(py::init<EngineConfig>())
      .def("iterate", [](Trainer& t) { return to_py(to_json(t.iterate(), false)); })
      .def_property_readonly("finished", &Trainer::finished)
      .def_property_readonly("global_step", &Trainer::global_step)
      .def_property_readonly("iteration", &Trainer::iteration)
      .def_property_readonly("horizon", &Trainer::horizon)
      .def_property_readonly("policy", &Trainer::policy, py::return_value_policy::copy)
      .def("last_episodes", [](const Trainer& t) {
        py::list l;
        for (const auto& r : t.last_episodes()) l.append(episode_dict(r));
        return l;
      })
      .def("save", [](const Trainer& t, const std::filesystem::path& p) { write_checkpoint(p, t.checkpoint()); })
      .def("restore", [](Trainer& t, const std::filesystem::path& p) { t.restore(read_checkpoint(p)); });

  m.def(
      "evaluate",
      [](const Policy& p, const EngineConfig& c, std::optional<int> episodes, bool dr, std::string label) {
        EvalOptions o = eval_options(c);
        if (episodes) o.episodes = *episodes;
        o.dr = dr;
        o.label = std::move(label);
        py::gil_scoped_release release;
        EvalReport r = evaluate(p, c, o);
        py::gil_scoped_acquire acquire;
        return report_dict(r);
      },
      py::arg("policy"), py::arg("config"), py::arg("episodes") = std::nullopt, py::arg("dr") = true,
      py::arg("label") = "eval");

  m.def(
      "robustness_sweep",
      [](const Policy& p, const EngineConfig& c, const std::string& param, const std::vector<double>& grid,
         std::optional<int> episodes) {
        EvalOptions o = eval_options(c);
        if (episodes) o.episodes = *episodes;
        py::list out;
        for (const SweepPoint& s : robustness_sweep(p, c, sweep_param_from_string(param), grid, o)) {
          py::dict d = report_dict(s.report);
          d["value"] = s.value;
          out.append(d);
        }
        return out;
      },
      py::arg("policy"), py::arg("config"), py::arg("param"), py::arg("grid"), py::arg("episodes") = std::nullopt);

  m.def("threshold_heatmap", [](const py::list& trials, std::vector<double> pos, std::vector<double> rot) {
    std::vector<Trial> ts;
    for (const auto& item : trials) {
      const py::dict d = item.cast<py::dict>();
      Trial t;
      t.success = d["success"].cast<bool>();
      t.pos_err = d["final_pos_err"].cast<double>();
      t.rot_err = d["final_rot_err"].cast<double>();
      t.fault = d.contains("fault") && d["fault"].cast<bool>();
      ts.push_back(t);
    }
    return threshold_heatmap(ts, std::move(pos), std::move(rot)).success;
  }, py::arg("trials"), py::arg("pos_thresholds"), py::arg("rot_thresholds_deg"));

  m.def("zero_shot_objects", [](const Policy& p, const EngineConfig& c, const std::vector<std::string>& names,
                                std::optional<int> episodes) {
    EvalOptions o = eval_options(c);
    if (episodes) o.episodes = *episodes;
    py::list out;
    for (const EvalReport& r : zero_shot_objects(p, c, names, o)) out.append(report_dict(r));
    return out;
  }, py::arg("policy"), py::arg("config"), py::arg("objects"), py::arg("episodes") = std::nullopt);
}
