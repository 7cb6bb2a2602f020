#include "tlr/predicates.hpp"

#include "tlr/errors.hpp"
#include "support/fixtures.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace tlr;
using namespace tlr::testing;

namespace {

std::vector<double> default_theta(const Predicate& p) {
  std::vector<double> th;
  for (const auto& ps : p.params) th.push_back(ps.def);
  return th;
}

std::vector<double> random_theta(const Predicate& p, std::mt19937_64& rng) {
  std::vector<double> th;
  for (const auto& ps : p.params) {
    std::uniform_real_distribution<double> dist(ps.lo, ps.hi);
    th.push_back(dist(rng));
  }
  return th;
}

// fixture pair per builtin: (satisfying trace, violating trace)
struct SignFixture {
  Trace pos;
  Trace neg;
  std::vector<double> theta;
};

Trace with_lead(double gap, double lead_v, double ego_v) {
  Trace t = straight_trace(4, 5.0, ego_v);
  const double dt = t.dt();
  for (auto& fr : t.frames) {
    AgentTrack a;
    a.id = "lead";
    a.length = 4.5;
    a.width = 2.0;
    double x0 = fr.ego_plan[0].x + gap;
    for (std::size_t k = 0; k < fr.ego_plan.size(); ++k)
      a.points.push_back({x0 + lead_v * static_cast<double>(k) * dt, 0.0, lead_v, 0.0});
    fr.agents.push_back(a);
  }
  return t;
}

Trace braking_plan_trace(double accel) {
  // constant longitudinal acceleration plan in an open map
  Trace t = straight_trace(3, 5.0, 8.0);
  const double dt = t.dt();
  for (auto& fr : t.frames) {
    double v = 8.0, x = fr.ego_plan[0].x;
    for (std::size_t k = 0; k < fr.ego_plan.size(); ++k) {
      fr.ego_plan[k] = {x, 0.0, std::max(0.0, v), 0.0};
      x += v * dt + 0.5 * accel * dt * dt;
      v = std::max(0.0, v + accel * dt);
    }
  }
  return t;
}

} // namespace

TEST_CASE("registry: builtin catalog is complete and guarded") {
  PredicateRegistry reg = builtin_registry();
  for (const char* id : {"SafeTTC", "LeadVehicleAhead", "ApproachingStop", "TrafficLightRed",
                         "HighLaneCurvature", "AgentNearby", "InIntersection", "OvertakingContext",
                         "SlowLeadVehicle", "NearVRU"}) {
    CHECK(reg.contains(id));
    CHECK(reg.at(id).kind == PredicateKind::Condition);
  }
  for (const char* id :
       {"Comfortable", "InDrivable", "SpeedLimitCompliant", "Stopped", "InLane", "ProgressMade"}) {
    CHECK(reg.contains(id));
    CHECK(reg.at(id).kind == PredicateKind::Action);
  }
  CHECK(reg.at("Comfortable").params.size() == 4);
  for (const auto& id : reg.ids()) {
    const Predicate& p = reg.at(id);
    CHECK(!p.doc.empty());
    for (const auto& ps : p.params) {
      CHECK(!ps.unit.empty());
      CHECK(ps.lo < ps.hi);
      CHECK(ps.def >= ps.lo);
      CHECK(ps.def <= ps.hi);
    }
  }

  PredicateRegistry dup;
  dup.add(reg.at("Comfortable"));
  CHECK_THROWS_AS(dup.add(reg.at("Comfortable")), ConfigError);
}

TEST_CASE("evaluate: range and index guards") {
  PredicateRegistry reg = builtin_registry();
  Trace t = straight_trace(3, 5.0);
  const Predicate& p = reg.at("Comfortable");
  CHECK_THROWS_AS(evaluate(p, t, 99, default_theta(p)), std::out_of_range);
}

TEST_CASE("comfortable: boundary, saturation, table values") {
  Trace t = straight_trace(3, 5.0, 8.0); // constant velocity: zero accelerations
  std::vector<double> std_theta{1.23, 1.13, 0.98, 0.98};
  // zero accel: margin = min(theta) = 0.98
  CHECK(comfortable(t, 0, std_theta) == doctest::Approx(std::tanh(0.98)).epsilon(1e-9));

  // framewise margins exactly at the threshold: value 0
  Trace ramp = braking_plan_trace(1.0); // forward acc 1.0
  std::vector<double> tight{1.0, 1.0, 1.0, 1.0};
  double v = comfortable(ramp, 0, tight);
  CHECK(std::abs(v) < 1e-6);

  // forward acceleration of 2.0 against theta_f = 1.23
  Trace hard_acc = braking_plan_trace(2.0);
  CHECK(comfortable(hard_acc, 0, std_theta) == doctest::Approx(std::tanh(-0.77)).epsilon(1e-6));

  // huge thresholds saturate toward 1
  std::vector<double> loose{8.0, 8.0, 8.0, 8.0};
  CHECK(comfortable(t, 0, loose) == doctest::Approx(1.0).epsilon(1e-6));

  CHECK_THROWS_AS(comfortable(t, 0, std::vector<double>{-1.0, 1, 1, 1}), std::invalid_argument);
}

TEST_CASE("comfortable: non-decreasing in every threshold") {
  Trace t = random_trace(11, 4);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> dist(0.3, 3.0);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> th{dist(rng), dist(rng), dist(rng), dist(rng)};
    double base = comfortable(t, 0, th);
    for (int i = 0; i < 4; ++i) {
      auto up = th;
      up[i] += 0.25;
      CHECK(comfortable(t, 0, up) >= base - 1e-12);
    }
  }
}

TEST_CASE("in-drivable margin matches the boundary distance") {
  // plan 2 m inside the polygon edge everywhere
  auto map = std::make_shared<MapContext>();
  map->drivable_polygons.push_back(Polygon{{{-10, -2}, {200, -2}, {200, 2}, {-10, 2}}});
  Trace t = straight_trace(3, 5.0, 2.0, map);
  // brute-force min distance over plan points
  double brute = 1e18;
  for (const auto& p : t.frames[0].ego_plan)
    brute = std::min(brute, map->drivable_polygons[0].signed_distance(p.pos()));
  CHECK(brute == doctest::Approx(2.0));
  PredicateRegistry reg = builtin_registry();
  const Predicate& p = reg.at("InDrivable");
  CHECK(evaluate(p, t, 0, default_theta(p)) == doctest::Approx(std::tanh(2.0)).epsilon(1e-9));
}

TEST_CASE("speed limit margin is limit minus max speed") {
  Trace t = straight_trace(3, 5.0, 15.0); // limit 13.9 in the fixture map
  PredicateRegistry reg = builtin_registry();
  const Predicate& p = reg.at("SpeedLimitCompliant");
  CHECK(evaluate(p, t, 0, default_theta(p)) == doctest::Approx(std::tanh(13.9 - 15.0)).epsilon(1e-9));
}

TEST_CASE("sign semantics: one satisfying and one violating fixture per builtin") {
  PredicateRegistry reg = builtin_registry();
  auto map_stop = simple_map();
  {
    auto m = std::make_shared<MapContext>(*map_stop);
    m->stop_points.push_back({8.0, 0.0});
    m->traffic_lights.push_back({{8.0, 0.0}, LightState::Red});
    map_stop = m;
  }
  auto curvy = std::make_shared<MapContext>(*simple_map());
  curvy->lanes[0].curvature.assign(curvy->lanes[0].centerline.points.size(), 0.08);

  auto vru_trace = [&](double dist) {
    Trace t = straight_trace(3, 5.0, 5.0);
    for (auto& fr : t.frames) {
      AgentTrack a;
      a.id = "ped";
      a.length = 0.6;
      a.width = 0.6;
      for (const auto& p : fr.ego_plan) a.points.push_back({p.x + dist, 3.0, 0.0, 0.0});
      fr.agents.push_back(a);
    }
    return t;
  };

  std::map<std::string, SignFixture> fixtures;
  fixtures["SafeTTC"] = {straight_trace(3, 5.0, 8.0), with_lead(6.0, 0.0, 8.0), {2.0}};
  fixtures["LeadVehicleAhead"] = {with_lead(15.0, 8.0, 8.0), straight_trace(3, 5.0), {30.0}};
  {
    Trace pos = straight_trace(3, 5.0, 5.0, map_stop);
    Trace neg = straight_trace(3, 5.0, 5.0);
    fixtures["ApproachingStop"] = {pos, neg, {15.0}};
    fixtures["TrafficLightRed"] = {pos, neg, {40.0}};
    fixtures["InIntersection"] = {pos, neg, {20.0}};
  }
  fixtures["HighLaneCurvature"] = {straight_trace(3, 5.0, 5.0, curvy), straight_trace(3, 5.0), {0.03}};
  fixtures["AgentNearby"] = {with_lead(6.0, 8.0, 8.0), straight_trace(3, 5.0), {10.0}};
  fixtures["OvertakingContext"] = {with_lead(12.0, 3.0, 10.0), with_lead(12.0, 9.5, 10.0), {2.0}};
  fixtures["SlowLeadVehicle"] = {with_lead(12.0, 2.0, 8.0), with_lead(12.0, 9.0, 8.0), {5.0}};
  fixtures["NearVRU"] = {vru_trace(8.0), straight_trace(3, 5.0), {15.0}};
  fixtures["Comfortable"] = {straight_trace(3, 5.0, 8.0), braking_plan_trace(-3.5), {1.23, 1.13, 0.98, 0.98}};
  {
    auto tiny = std::make_shared<MapContext>();
    tiny->drivable_polygons.push_back(Polygon{{{-5, -2}, {15, -2}, {15, 2}, {-5, 2}}});
    fixtures["InDrivable"] = {straight_trace(3, 5.0, 2.0), straight_trace(3, 5.0, 8.0, tiny), {0.0}};
  }
  fixtures["SpeedLimitCompliant"] = {straight_trace(3, 5.0, 10.0), straight_trace(3, 5.0, 16.0), {0.0}};
  fixtures["Stopped"] = {straight_trace(3, 5.0, 0.0), straight_trace(3, 5.0, 5.0), {1.0}};
  {
    Trace offlane = straight_trace(3, 5.0, 5.0);
    for (auto& fr : offlane.frames)
      for (auto& p : fr.ego_plan) p.y = 2.5;
    fixtures["InLane"] = {straight_trace(3, 5.0, 5.0), offlane, {1.5}};
  }
  fixtures["ProgressMade"] = {straight_trace(3, 5.0, 8.0), straight_trace(3, 5.0, 0.0), {1.0}};

  for (const auto& id : reg.ids()) {
    REQUIRE_MESSAGE(fixtures.count(id), "missing sign fixture for " << id);
    const auto& fx = fixtures[id];
    const Predicate& p = reg.at(id);
    CHECK_MESSAGE(evaluate(p, fx.pos, 0, fx.theta) > 0.0, id << " satisfying fixture");
    CHECK_MESSAGE(evaluate(p, fx.neg, 0, fx.theta) < 0.0, id << " violating fixture");
  }
}

TEST_CASE("evaluate_signal equals the frame-by-frame loop and stays in range") {
  PredicateRegistry reg = builtin_registry();
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    Trace t = random_trace(trial, 5);
    for (const auto& id : reg.ids()) {
      const Predicate& p = reg.at(id);
      auto th = random_theta(p, rng);
      auto sig = evaluate_signal(p, t, th);
      REQUIRE(sig.size() == t.frames.size());
      for (std::size_t k = 0; k < sig.size(); ++k) {
        CHECK(sig[k] == evaluate(p, t, k, th));
        CHECK(sig[k] >= -1.0);
        CHECK(sig[k] <= 1.0);
      }
    }
  }
}

TEST_CASE("param_gradient matches central finite differences away from ties") {
  PredicateRegistry reg = builtin_registry();
  std::mt19937_64 rng(123);
  int checked = 0;
  for (int trial = 0; trial < 10; ++trial) {
    Trace t = random_trace(100 + trial, 4);
    FrameFeatures ff = extract_features(t.frames[trial % t.frames.size()], t.dt());
    for (const auto& id : reg.ids()) {
      const Predicate& p = reg.at(id);
      for (int rep = 0; rep < 10; ++rep) {
        auto th = random_theta(p, rng);
        double tie = 0.0;
        auto grad = param_gradient(p, ff, th, &tie);
        if (tie < 1e-3) continue; // exclude near-ties of internal min compositions
        for (std::size_t k = 0; k < th.size(); ++k) {
          const double h = 1e-5;
          auto up = th, dn = th;
          up[k] += h;
          dn[k] -= h;
          double fd = (evaluate(p, ff, up) - evaluate(p, ff, dn)) / (2 * h);
          if (std::abs(fd) < 1e-9) {
            CHECK(std::abs(grad[k]) < 1e-7);
          } else {
            CHECK(grad[k] == doctest::Approx(fd).epsilon(1e-4));
          }
          ++checked;
        }
      }
    }
  }
  CHECK(checked > 1000);
}

TEST_CASE("saturated predicates have vanishing gradients") {
  PredicateRegistry reg = builtin_registry();
  Trace t = straight_trace(3, 5.0, 8.0);
  const Predicate& p = reg.at("Comfortable");
  std::vector<double> loose{8.0, 8.0, 8.0, 8.0};
  auto g = param_gradient(p, t, 0, loose);
  for (double gi : g) CHECK(std::abs(gi) < 1e-6);
}

TEST_CASE("theta map: defaults, bounds, round trip") {
  PredicateRegistry reg = builtin_registry();
  ThetaMap theta(reg, {"SafeTTC", "Comfortable"});
  CHECK(theta.size() == 5);
  CHECK(theta.values_for(1).size() == 4);
  theta.values_for(0)[0] = 99.0;
  theta.clip_to_bounds(reg);
  CHECK(theta.values_for(0)[0] == 8.0);

  auto m = theta.to_map();
  ThetaMap other(reg, {"SafeTTC", "Comfortable"});
  other.load_map(m);
  CHECK(other.values_for(0)[0] == 8.0);
}
