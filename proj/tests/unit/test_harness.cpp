#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "rlpp/config.hpp"
#include "rlpp/harness.hpp"
#include "rlpp/io.hpp"

using namespace rlpp;

namespace {

Raceline oval() {
  TrackSpec s;
  s.length = 8.0;
  s.radius = 3.0;
  s.spacing = 0.25;
  s.speed = {5.0, 3.0, 3.0};
  return synthesize_track(s);
}

LapReport stub_report(double m, double limit, int laps = 10) {
  std::vector<LapRecord> recs;
  for (int i = 1; i <= laps; ++i) recs.push_back({i, m <= limit + 1e-12, 10.0 / m, m <= limit + 1e-12 ? "" : "collision"});
  return report_from_laps(recs);
}

EvalConfig short_eval(int laps = 2) {
  EvalConfig ec;
  ec.laps = laps;
  return ec;
}

}  // namespace

TEST_CASE("controller kind names") {
  for (auto k : {ControllerKind::kFixed, ControllerKind::kAdaptive, ControllerKind::kTeacher, ControllerKind::kRlJoint,
                 ControllerKind::kRlLookaheadOnly, ControllerKind::kMpc}) {
    CHECK(parse_controller_kind(controller_kind_name(k)) == k);
  }
  CHECK_THROWS_AS(parse_controller_kind("lqr"), std::invalid_argument);
}

TEST_CASE("report_from_laps") {
  const std::vector<LapRecord> laps{{1, true, 10.0, ""}, {2, true, 12.0, ""}, {3, false, 3.0, "collision"},
                                    {4, true, 11.0, ""}};
  const auto r = report_from_laps(laps);
  CHECK(r.laps == 4);
  CHECK(r.completed == 3);
  CHECK_FALSE(r.full_completion());
  CHECK(r.mean == doctest::Approx(11.0));
  CHECK(r.std == doctest::Approx(1.0));  // sample std of {10, 12, 11}
  CHECK(r.min == 10.0);
  CHECK(r.max == 12.0);
  CHECK(report_from_laps({}).laps == 0);
  CHECK_FALSE(report_from_laps({}).full_completion());
}

TEST_CASE("lap csv round trip") {
  std::vector<LapRecord> laps{{1, true, 10.123456789012345, ""}, {2, false, 0.1 + 0.2, "timeout"}};
  const auto back = parse_laps_csv(laps_csv(laps));
  REQUIRE(back.size() == 2);
  CHECK(back[0].time == laps[0].time);
  CHECK(back[1].reason == "timeout");
  CHECK_FALSE(back[1].completed);
  CHECK_THROWS(parse_laps_csv("lap,completed,time,reason\n1,yes,3,\n"));
}

TEST_CASE("sweep with stub evaluations") {
  const auto grid = default_multiplier_grid();
  REQUIRE(grid.size() == 11);
  CHECK(grid.front() == doctest::Approx(0.8));
  CHECK(grid.back() == doctest::Approx(1.3));

  SUBCASE("coarse only") {
    const auto s = sweep_multipliers(grid, [](double m) { return stub_report(m, 1.12); });
    CHECK(s.full_completion);
    CHECK(s.best_multiplier == doctest::Approx(1.10));
  }
  SUBCASE("refined") {
    const auto s = sweep_multipliers(grid, [](double m) { return stub_report(m, 1.12); }, 0.01);
    CHECK(s.best_multiplier == doctest::Approx(1.12));
    for (std::size_t i = 1; i < s.entries.size(); ++i) CHECK(s.entries[i].multiplier > s.entries[i - 1].multiplier);
  }
  SUBCASE("largest success wins even above a failure") {
    const auto s = sweep_multipliers(grid, [](double m) {
      return stub_report(m, std::abs(m - 1.0) < 1e-9 ? 0.0 : 10.0);
    });
    CHECK(s.best_multiplier == doctest::Approx(1.3));
  }
  SUBCASE("nothing completes") {
    const auto s = sweep_multipliers(grid, [](double m) {
      std::vector<LapRecord> recs{{1, m < 0.9, 5.0, ""}, {2, false, 1.0, "collision"}};
      return report_from_laps(recs);
    });
    CHECK_FALSE(s.full_completion);
    CHECK(s.best_multiplier == doctest::Approx(0.8));
  }
  SUBCASE("csv has one row per entry") {
    const auto s = sweep_multipliers(grid, [](double m) { return stub_report(m, 1.0); }, 0.01);
    const auto csv = sweep_csv(s);
    CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == s.entries.size() + 1);
  }
}

TEST_CASE("run_laps bookkeeping") {
  const auto rl = oval();
  ControllerSpec spec;
  spec.kind = ControllerKind::kTeacher;
  auto driver = make_driver(spec, rl, {});
  const auto r = run_laps(rl, *driver, short_eval(3));
  CHECK(r.report.laps == 3);
  CHECK(r.report.full_completion());
  CHECK(static_cast<long>(r.trace.size()) == r.report.total_steps);
  CHECK(r.report.teacher_steps == r.report.total_steps);
  double sum = 0.0;
  for (const auto& l : r.laps) sum += l.time;
  CHECK(sum <= r.trace.back().t + 1e-9);
  CHECK(sum > r.trace.back().t - 0.05 - 1e-9);
  // Lap time is close to the profile's lap time.
  CHECK(r.report.mean > rl.lap_length() / rl.max_speed());

  const auto again = run_laps(rl, *driver, short_eval(3));
  CHECK(again.report.mean == r.report.mean);
  CHECK(trace_csv(again.trace) == trace_csv(r.trace));

  const auto from_csv = report_from_laps(parse_laps_csv(laps_csv(r.laps)));
  CHECK(std::abs(from_csv.mean - r.report.mean) <= 1e-9);
  CHECK(std::abs(from_csv.std - r.report.std) <= 1e-9);
  CHECK(std::abs(from_csv.min - r.report.min) <= 1e-9);
  CHECK(std::abs(from_csv.max - r.report.max) <= 1e-9);

  const auto header = trace_csv(r.trace).substr(0, trace_csv(r.trace).find('\n'));
  CHECK(header == "t,lap,s_index,x,y,v,L_d,g,kappa_max,gamma,lateral_error,v_cmd,mode,collision");
}

TEST_CASE("collisions and timeouts are incomplete laps") {
  TrackSpec s;
  s.length = 8.0;
  s.radius = 1.0;
  s.half_width = 0.1;
  s.speed = {6.0, 30.0, 0.0};
  const auto rl = synthesize_track(s);
  ControllerSpec spec;
  spec.kind = ControllerKind::kFixed;
  spec.lookahead = 3.0;
  auto driver = make_driver(spec, rl, {});
  const auto r = run_laps(rl, *driver, short_eval(2));
  CHECK(r.report.completed == 0);
  CHECK(r.laps[0].reason == "collision");
  CHECK(r.report.laps == 2);

  // A standstill profile never finishes a lap.
  EvalConfig slow = short_eval(1);
  slow.max_lap_time = 1.0;
  slow.spawn_speed_fraction = 0.0;
  const auto still = oval().scale_speeds(0.01);
  auto d2 = make_driver(ControllerSpec{}, still, {});
  const auto t = run_laps(still, *d2, slow);
  CHECK(t.laps[0].reason == "timeout");
}

TEST_CASE("teacher fallback protocol") {
  const auto rl = oval();
  std::mt19937_64 rng(1);
  auto bundle = PolicyBundle::create(ActionMode::kJoint, 0.9, PPOConfig{}, rng);
  SUBCASE("fresh actions every step: no teacher steps") {
    PolicyDriver d(bundle);
    const auto r = run_laps(rl, d, short_eval(2));
    CHECK(r.report.total_steps > 0);
    CHECK(r.report.teacher_steps == 0);
  }
  SUBCASE("withheld actions hand over within one control step") {
    PolicyDriver d(bundle);
    const double cutoff = 1.0;
    d.set_delivery([&](double now) { return now < cutoff - 1e-9; });
    const auto r = run_laps(rl, d, short_eval(1));
    const double dt = SimConfig{}.dt_control;
    // Last post at t = cutoff - dt; stale once now - t_post > 0.2.
    double first_teacher = -1.0;
    for (const auto& row : r.trace) {
      const double now = row.t - dt;
      if (row.mode == "teacher") {
        first_teacher = now;
        break;
      }
      CHECK(row.mode == "rl");
    }
    const double last_post = cutoff - dt;
    CHECK(first_teacher > last_post + 0.2 - 1e-9);
    CHECK(first_teacher <= last_post + 0.2 + dt + 1e-9);
  }
}

TEST_CASE("make_driver") {
  const auto rl = oval();
  ControllerSpec rl_spec;
  rl_spec.kind = ControllerKind::kRlJoint;
  CHECK_THROWS_AS(make_driver(rl_spec, rl, {}), std::invalid_argument);

  const auto dir = std::filesystem::temp_directory_path() / "rlpp_harness_test";
  std::mt19937_64 rng(2);
  save_checkpoint((dir / "ld.json").string(), PolicyBundle::create(ActionMode::kLookaheadOnly, 0.7, PPOConfig{}, rng));
  rl_spec.checkpoint = (dir / "ld.json").string();
  CHECK_THROWS_AS(make_driver(rl_spec, rl, {}), std::invalid_argument);
  rl_spec.kind = ControllerKind::kRlLookaheadOnly;
  auto d = make_driver(rl_spec, rl, {});
  const auto out = d->act({rl[0].x, rl[0].y, rl.tangent_heading(0), 2.0}, rl, 0.0);
  CHECK(out.mode == "rl");
  CHECK(out.params.gain == 0.7);
  std::filesystem::remove_all(dir);

  ControllerSpec mpc;
  mpc.kind = ControllerKind::kMpc;
  auto m = make_driver(mpc, rl, {});
  const auto mo = m->act({rl[0].x, rl[0].y, rl.tangent_heading(0), 2.0}, rl, 0.0);
  CHECK(mo.mode == "mpc");
}

TEST_CASE("identical controllers tabulate identically") {
  const auto rl = oval();
  std::vector<CompareRow> rows;
  for (int i = 0; i < 2; ++i) {
    ControllerSpec spec;
    spec.kind = ControllerKind::kAdaptive;
    auto d = make_driver(spec, rl, {});
    rows.push_back({"adaptive", 1.0, run_laps(rl, *d, short_eval(2)).report});
  }
  const auto csv = compare_csv(rows);
  const auto first = csv.find('\n');
  const auto second = csv.find('\n', first + 1);
  const auto third = csv.find('\n', second + 1);
  CHECK(csv.substr(first + 1, second - first) == csv.substr(second + 1, third - second));
  const auto table = compare_table(rows);
  CHECK(table.find("Mean") != std::string::npos);
}

TEST_CASE("fixed-gain selection breaks ties by lap time") {
  const auto rl = oval();
  EvalConfig ec = short_eval(2);
  ec.record_trace = false;
  const auto sel = select_fixed_gain(rl, {0.6, 0.9}, {0.8, 1.0}, ec);
  CHECK(sel.sweeps.size() == 2);
  CHECK((sel.gain == 0.6 || sel.gain == 0.9));
}

TEST_CASE("config parsing") {
  SUBCASE("defaults survive an empty document") {
    const auto c = parse_config("{}");
    CHECK(c.multiplier == 1.0);
    CHECK(c.train_multiplier == 1.3);
    CHECK(c.eval.laps == 10);
    CHECK(c.ppo.n_steps == 4096);
  }
  SUBCASE("overrides, comments and controllers") {
    const auto c = parse_config(R"({
      // comment
      "seed": 5,
      "ppo": {"lr_schedule": "cosine"},
      "train": {"mode": "ld-only"},
      "track": {"kind": "rounded_rectangle", "length": 12, "speed": {"v_cap": 9}},
      "controllers": [{"kind": "fixed", "lookahead": 2.0, "gain": 0.7}, {"kind": "mpc"}]
    })");
    CHECK(c.seed == 5);
    CHECK(c.ppo.schedule == LrSchedule::kCosine);
    CHECK(c.train.mode == ActionMode::kLookaheadOnly);
    CHECK(c.track.synth.kind == TrackKind::kRoundedRectangle);
    CHECK(c.track.synth.speed.v_cap == 9.0);
    REQUIRE(c.controllers.size() == 2);
    CHECK(c.controllers[0].gain == 0.7);
    CHECK_FALSE(c.controllers[1].gain.has_value());
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(parse_config(R"({"mulitplier": 1.1})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"multiplier": -1})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"eval": {"laps": 0}})"), ConfigError);
    CHECK_THROWS_AS(parse_config("{"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"controllers": [{"kind": "lqr"}]})"), ConfigError);
  }
  SUBCASE("round trip") {
    RunConfig c;
    c.seed = 9;
    c.sweep_grid = {1.0, 1.1};
    ControllerSpec s;
    s.kind = ControllerKind::kAdaptive;
    s.v_lo = 2.0;
    c.controllers.push_back(s);
    const auto back = parse_config(config_to_json(c));
    CHECK(config_to_json(back) == config_to_json(c));
    CHECK(back.controllers[0].v_lo == 2.0);
  }
}
