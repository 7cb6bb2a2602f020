#include "tlr/scenario.hpp"

#include "tlr/errors.hpp"
#include "support/fixtures.hpp"

#include <doctest.h>

#include <set>

using namespace tlr;
using namespace tlr::testing;

TEST_CASE("generate_scenario: templates, determinism, validity sweep") {
  // following: one lead agent ahead of the ego on a straight road
  ScenarioSpec spec;
  spec.kind = ScenarioKind::Following;
  spec.seed = 3;
  Scenario sc = generate_scenario(spec);
  REQUIRE(sc.agents.size() == 1);
  CHECK(sc.agents[0].path[0].x > route_point(sc, sc.ego_s0, 0, 0).x);
  CHECK(sc.map->drivable_signed_distance(route_point(sc, sc.ego_s0, sc.ego_d0, 0).pos()) > 0.0);

  // stationary: ego stopped
  ScenarioSpec stat;
  stat.kind = ScenarioKind::Stationary;
  Scenario sc2 = generate_scenario(stat);
  CHECK(sc2.ego_v0 == 0.0);

  // determinism
  Scenario sc3 = generate_scenario(spec);
  CHECK(sc3.ego_s0 == sc.ego_s0);
  CHECK(sc3.agents[0].path[7].x == sc.agents[0].path[7].x);

  // sweep: every kind, many seeds, distinct and valid as traces
  int checked = 0;
  for (auto kind : all_scenario_kinds()) {
    std::set<double> starts;
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
      ScenarioSpec s;
      s.kind = kind;
      s.seed = seed;
      s.rate_hz = 5.0;
      s.episode_steps = 4;
      Scenario sx = generate_scenario(s);
      starts.insert(sx.ego_s0 + sx.ego_v0 * 1000.0);
      // ego inside drivable area
      CHECK(sx.map->drivable_signed_distance(route_point(sx, sx.ego_s0, sx.ego_d0, 0).pos()) >= 0.0);
      // agents pairwise non-overlapping at t = 0
      for (std::size_t i = 0; i < sx.agents.size(); ++i)
        for (std::size_t j = i + 1; j < sx.agents.size(); ++j)
          CHECK((sx.agents[i].path[0].pos() - sx.agents[j].path[0].pos()).norm() > 2.0);
      ++checked;
    }
    if (kind != ScenarioKind::Stationary && kind != ScenarioKind::Starting)
      CHECK(starts.size() > 1); // seeds move the scene
  }
  CHECK(checked == 9 * 12);

  // generated windows validate as traces
  Trace t = random_trace(5, 4);
  CHECK(validate_trace(t).empty());
}

TEST_CASE("at_sampler: zero-action first, distinct horizon-length candidates") {
  Trace t = straight_trace(1, 5.0, 8.0);
  const Frame& env = t.frames[0];

  auto one = at_sampler(env, 1, 9);
  REQUIRE(one.size() == 1);
  CHECK(one[0].size() == env.ego_plan.size());
  // zero-action: speed held
  for (const auto& p : one[0]) CHECK(p.v == doctest::Approx(8.0).epsilon(1e-6));

  auto many = at_sampler(env, 15, 9);
  REQUIRE(many.size() == 15);
  std::set<std::string> distinct;
  for (const auto& plan : many) {
    CHECK(plan.size() == env.ego_plan.size());
    distinct.insert(std::to_string(plan.back().x) + "/" + std::to_string(plan.back().y));
  }
  CHECK(distinct.size() == 15);
}

TEST_CASE("at_sampler: rollouts reproduce their commanded profiles") {
  Trace t = straight_trace(1, 5.0, 8.0);
  const Frame& env = t.frames[0];
  const double dt = t.dt();

  auto cands = at_sampler_detailed(env, 10, 4);
  int checked_candidates = 0;
  for (const auto& c : cands) {
    if (c.lat_target != 0.0) continue; // straight rollouts: exact lane-frame check
    double v_min = 1e18;
    for (const auto& p : c.plan) v_min = std::min(v_min, p.v);
    if (v_min < 0.05) continue; // profile clamped at standstill: command no longer applies
    Kinematics kin = derive_kinematics(c.plan, dt);
    for (std::size_t k = 1; k + 1 < c.plan.size(); ++k)
      CHECK(kin.a_long[k] == doctest::Approx(c.acc).epsilon(1e-6));
    ++checked_candidates;
  }
  CHECK(checked_candidates >= 4);
}

TEST_CASE("demonstrations: every demo satisfies the teacher with margin") {
  PredicateRegistry reg = builtin_registry();
  RuleSet teacher = teacher_comfort(reg);

  std::vector<ScenarioSpec> specs;
  for (auto kind : {ScenarioKind::Following, ScenarioKind::Starting}) {
    ScenarioSpec s;
    s.kind = kind;
    s.rate_hz = 5.0;
    s.episode_steps = 10;
    specs.push_back(s);
  }
  DemoStats stats;
  DemoConfig cfg;
  cfg.threads = 2;
  Dataset ds = generate_demonstrations(teacher, reg, specs, 24, 7, cfg, &stats);
  REQUIRE(ds.traces.size() == 24);
  CHECK(stats.acceptance_rate() > 0.01);

  // re-verify independently through the scoring runtime
  for (const auto& trace : ds.traces) {
    CHECK(validate_trace(trace).empty());
    CandidateSet cs;
    cs.env = trace.frames[0];
    cs.rate_hz = trace.rate_hz;
    cs.candidates.push_back(trace.frames[0].ego_plan);
    auto bd = score_candidates(teacher, cs, reg);
    CHECK(bd[0].total > 0.0);
    // and the trace-level windows all clear the teacher threshold
    for (std::size_t f = 0; f < trace.frames.size(); ++f) {
      const Predicate& p = reg.at("Comfortable");
      CHECK(evaluate(p, trace, f, teacher.theta.at("Comfortable")) > 0.0);
    }
  }

  // empty teacher accepts everything
  RuleSet empty;
  DemoStats stats2;
  Dataset ds2 = generate_demonstrations(empty, reg, specs, 8, 3, cfg, &stats2);
  CHECK(ds2.traces.size() == 8);
  CHECK(stats2.attempts == 8);
}

TEST_CASE("demonstrations: infeasible teacher raises") {
  PredicateRegistry reg = builtin_registry();
  RuleSet impossible;
  {
    RulePair p;
    p.action = make_atom("Stopped");
    impossible.pairs.push_back(p);
    impossible.theta["Stopped"] = {0.05};
  }
  {
    RulePair p;
    p.action = make_atom("ProgressMade");
    impossible.pairs.push_back(p);
    impossible.theta["ProgressMade"] = {30.0};
  }
  std::vector<ScenarioSpec> specs(1);
  specs[0].kind = ScenarioKind::Following;
  specs[0].rate_hz = 5.0;
  specs[0].episode_steps = 6;
  DemoConfig cfg;
  cfg.attempts_per_demo = 40;
  CHECK_THROWS_AS(generate_demonstrations(impossible, reg, specs, 4, 1, cfg), InfeasibleError);
}

TEST_CASE("closed loop: stationary scene is benign; records are complete") {
  PredicateRegistry reg = builtin_registry();
  RuleSet rules = teacher_city3(reg);
  ScenarioSpec spec;
  spec.kind = ScenarioKind::Stationary;
  spec.rate_hz = 5.0;

  Monitor::Proposer proposer = [](const Frame& env) { return at_sampler(env, 5, 3); };
  RunMetrics m = run_closed_loop(spec, proposer, rules, reg, 30, 11, nullptr, 2);
  CHECK(m.cycles == 30);
  CHECK(m.cycle_ms.size() == 30);
  CHECK(!m.collision);
  CHECK(!m.drivable_exit);
  CHECK(m.proposer_errors == 0);
}

TEST_CASE("closed loop: deterministic per (spec, seed)") {
  PredicateRegistry reg = builtin_registry();
  RuleSet rules = teacher_city3(reg);
  ScenarioSpec spec;
  spec.kind = ScenarioKind::Following;
  spec.rate_hz = 5.0;
  Monitor::Proposer proposer = [](const Frame& env) {
    return at_sampler(env, 7, 11 ^ static_cast<std::uint64_t>(env.t_index));
  };
  RunMetrics a = run_closed_loop(spec, proposer, rules, reg, 20, 5);
  RunMetrics b = run_closed_loop(spec, proposer, rules, reg, 20, 5);
  CHECK(a.progress_m == b.progress_m);
  CHECK(a.executed_score == b.executed_score);
  CHECK(a.comfort_violations == b.comfort_violations);
}

TEST_CASE("closed loop: rule scorer beats a degenerate proposer-first selector on executed score") {
  PredicateRegistry reg = builtin_registry();
  RuleSet teacher = teacher_city3(reg);

  // "random" selector: a rule set with no pairs ranks everything equally, so
  // select() always takes candidate 0 (an arbitrary fixed choice)
  RuleSet vacuous;

  ScenarioSpec spec;
  spec.kind = ScenarioKind::Following;
  spec.rate_hz = 5.0;

  double scored = 0.0, unscored = 0.0;
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    Monitor::Proposer proposer = [seed](const Frame& env) {
      return at_sampler(env, 9, seed * 131 + static_cast<std::uint64_t>(env.t_index));
    };
    RunMetrics with_rules = run_closed_loop(spec, proposer, teacher, reg, 25, seed, &teacher, 2);
    RunMetrics without = run_closed_loop(spec, proposer, vacuous, reg, 25, seed, &teacher, 2);
    scored += with_rules.executed_score;
    unscored += without.executed_score;
    if (with_rules.executed_score >= without.executed_score) ++wins;
  }
  CHECK(scored / 8.0 > unscored / 8.0);
  CHECK(wins >= 6);
}

TEST_CASE("teacher rule sets render as documented") {
  PredicateRegistry reg = builtin_registry();
  CHECK(render_rules_text(teacher_city3(reg)) ==
        "T -> G InDrivable\n"
        "G SafeTTC -> G Comfortable\n"
        "!SpeedLimitCompliant -> F OvertakingContext\n");
  CHECK(render_rules_text(teacher_comfort(reg)) == "T -> G Comfortable\n");
}
