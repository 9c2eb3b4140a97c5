// Thin Python surface over the core library: tracks, the steering law, the
// QP solver, the training environment and lap evaluation.
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <vector>

#include "rlpp/config.hpp"
#include "rlpp/env.hpp"
#include "rlpp/harness.hpp"
#include "rlpp/ppo.hpp"
#include "rlpp/pure_pursuit.hpp"
#include "rlpp/qp.hpp"
#include "rlpp/raceline.hpp"

namespace py = pybind11;
using namespace rlpp;

namespace {

py::dict report_dict(const LapReport& r) {
  py::dict d;
  d["laps"] = r.laps;
  d["completed"] = r.completed;
  d["lap_times"] = r.lap_times;
  d["mean"] = r.mean;
  d["std"] = r.std;
  d["min"] = r.min;
  d["max"] = r.max;
  d["teacher_steps"] = r.teacher_steps;
  d["total_steps"] = r.total_steps;
  d["mean_abs_lateral"] = r.mean_abs_lateral;
  return d;
}

Eigen::VectorXd obs_vector(const Observation& o) {
  const auto a = o.to_array();
  return Eigen::Map<const Eigen::VectorXd>(a.data(), static_cast<Eigen::Index>(a.size()));
}

// Shared ownership so environments can outlive the Python-side track object.
using TrackPtr = std::shared_ptr<const Raceline>;

}  // namespace

PYBIND11_MODULE(_rlpp, m) {
  m.doc() = "Pure Pursuit racing controllers, PPO training and MPC baseline";

  py::class_<Raceline, std::shared_ptr<Raceline>>(m, "Raceline")
      .def_property_readonly("size", &Raceline::size)
      .def_property_readonly("lap_length", &Raceline::lap_length)
      .def_property_readonly("half_width", &Raceline::half_width)
      .def_property_readonly("x", [](const Raceline& r) {
        std::vector<double> v;
        for (const auto& w : r.waypoints()) v.push_back(w.x);
        return v;
      })
      .def_property_readonly("y", [](const Raceline& r) {
        std::vector<double> v;
        for (const auto& w : r.waypoints()) v.push_back(w.y);
        return v;
      })
      .def_property_readonly("kappa", [](const Raceline& r) {
        std::vector<double> v;
        for (const auto& w : r.waypoints()) v.push_back(w.kappa);
        return v;
      })
      .def_property_readonly("v_max", [](const Raceline& r) {
        std::vector<double> v;
        for (const auto& w : r.waypoints()) v.push_back(w.v_max);
        return v;
      })
      .def("scale_speeds", [](const Raceline& r, double m) { return std::make_shared<Raceline>(r.scale_speeds(m)); })
      .def("lateral_error", [](const Raceline& r, double x, double y) { return r.lateral_error({x, y}); })
      .def("nearest_index", [](const Raceline& r, double x, double y) { return r.nearest_index({x, y}); })
      .def("to_csv", [](const Raceline& r) { return to_csv(r); });

  m.def(
      "synthesize_track",
      [](const std::string& kind, double length, double width, double radius, double spacing, double half_width,
         double v_cap, double a_lat_max, double a_long_max) {
        TrackSpec s;
        s.kind = parse_track_kind(kind);
        s.length = length;
        s.width = width;
        s.radius = radius;
        s.spacing = spacing;
        s.half_width = half_width;
        s.speed = {v_cap, a_lat_max, a_long_max};
        return std::make_shared<Raceline>(synthesize_track(s));
      },
      py::arg("kind") = "oval", py::arg("length") = 10.0, py::arg("width") = 6.0, py::arg("radius") = 3.0,
      py::arg("spacing") = 0.25, py::arg("half_width") = kDefaultHalfWidth, py::arg("v_cap") = 8.0,
      py::arg("a_lat_max") = 3.0, py::arg("a_long_max") = 0.0);
  m.def(
      "load_raceline",
      [](const std::string& path, double half_width) {
        return std::make_shared<Raceline>(load_raceline_file(path, half_width));
      },
      py::arg("path"), py::arg("half_width") = kDefaultHalfWidth);

  m.def("pp_steering", &pp_steering, py::arg("y_prime"), py::arg("lookahead"), py::arg("gain"));
  m.def("teacher_lookahead", &teacher_lookahead, py::arg("v"), py::arg("kappa_max"));
  m.def("teacher_gain", &teacher_gain, py::arg("v"));

  m.def(
      "admm_solve",
      [](Eigen::MatrixXd P, Eigen::VectorXd q, Eigen::MatrixXd A, Eigen::VectorXd l, Eigen::VectorXd u,
         int max_iter) {
        AdmmSettings s;
        s.max_iter = max_iter;
        const auto sol = admm_solve(QPProblem{std::move(P), std::move(q), std::move(A), std::move(l), std::move(u)}, s);
        py::dict d;
        d["x"] = sol.x;
        d["y"] = sol.y;
        d["converged"] = sol.converged;
        d["iterations"] = sol.iterations;
        d["primal_residual"] = sol.primal_residual;
        d["dual_residual"] = sol.dual_residual;
        return d;
      },
      py::arg("P"), py::arg("q"), py::arg("A"), py::arg("l"), py::arg("u"), py::arg("max_iter") = 4000);

  m.def(
      "compute_gae",
      [](const std::vector<double>& rewards, const std::vector<double>& values, const std::vector<unsigned char>& starts,
         double last_value, bool last_done, double gamma, double lam) {
        std::vector<double> adv(rewards.size()), ret(rewards.size());
        compute_gae(rewards, values, starts, last_value, last_done, gamma, lam, adv, ret);
        return py::make_tuple(adv, ret);
      },
      py::arg("rewards"), py::arg("values"), py::arg("episode_starts"), py::arg("last_value"), py::arg("last_done"),
      py::arg("gamma") = 0.99, py::arg("lam") = 0.95);

  py::class_<RacingEnv>(m, "RacingEnv")
      .def(py::init([](const std::shared_ptr<Raceline>& track, const std::string& mode, double fixed_gain, bool jitter,
                       int laps) {
             if (mode != "joint" && mode != "ld-only") throw py::value_error("mode must be 'joint' or 'ld-only'");
             EnvConfig c;
             c.mode = mode == "joint" ? ActionMode::kJoint : ActionMode::kLookaheadOnly;
             c.fixed_gain = fixed_gain;
             c.jitter = jitter;
             c.laps = laps;
             return std::make_unique<RacingEnv>(TrackPtr(track), c);
           }),
           py::arg("track"), py::arg("mode") = "joint", py::arg("fixed_gain") = 0.9, py::arg("jitter") = true,
           py::arg("laps") = 2)
      .def_property_readonly("action_dim", &RacingEnv::action_dim)
      .def(
          "reset", [](RacingEnv& e, std::uint64_t seed) { return obs_vector(e.reset(seed)); }, py::arg("seed") = 0)
      .def(
          "step",
          [](RacingEnv& e, double lookahead, double gain) {
            const auto r = e.step({lookahead, gain});
            py::dict info;
            info["lookahead"] = r.info.applied.lookahead;
            info["gain"] = r.info.applied.gain;
            info["teacher_lookahead"] = r.info.teacher.lookahead;
            info["lateral_error"] = r.info.lateral_error;
            info["progress"] = r.info.progress;
            info["collision"] = r.done.collision;
            info["timeout"] = r.done.timeout;
            info["laps_complete"] = r.done.laps_complete;
            return py::make_tuple(obs_vector(r.observation), r.reward, r.done.any(), info);
          },
          py::arg("lookahead"), py::arg("gain") = 0.9);

  m.def(
      "evaluate",
      [](const std::shared_ptr<Raceline>& track, const std::string& kind, double lookahead, py::object gain,
         const std::string& checkpoint, int laps, double fixed_gain) {
        ControllerSpec spec;
        spec.kind = parse_controller_kind(kind);
        spec.lookahead = lookahead;
        if (!gain.is_none()) spec.gain = gain.cast<double>();
        spec.checkpoint = checkpoint;
        HarnessContext ctx;
        ctx.fixed_gain = fixed_gain;
        EvalConfig ec;
        ec.laps = laps;
        ec.record_trace = false;
        auto driver = make_driver(spec, *track, ctx);
        EvalResult res;
        {
          py::gil_scoped_release release;
          res = run_laps(*track, *driver, ec);
        }
        return report_dict(res.report);
      },
      py::arg("track"), py::arg("kind"), py::arg("lookahead") = 1.5, py::arg("gain") = py::none(),
      py::arg("checkpoint") = "", py::arg("laps") = 10, py::arg("fixed_gain") = 0.9);

  m.def(
      "validate_config", [](const std::string& text) { return config_to_json(parse_config(text)); }, py::arg("json"),
      "Parse and validate a run configuration; returns it with defaults filled in.");

  py::register_exception<RacelineError>(m, "RacelineError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
}
