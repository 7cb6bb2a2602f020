#include "tlr/trace.hpp"

#include "tlr/errors.hpp"
#include "support/fixtures.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace tlr;
using namespace tlr::testing;

TEST_CASE("parse: empty stream yields an empty dataset") {
  std::istringstream in("");
  Dataset ds = parse_trace_file(in);
  CHECK(ds.traces.empty());
}

TEST_CASE("parse: single record round-trips and forces T = rate * horizon") {
  Trace t = straight_trace(80, 20.0);
  CHECK(t.horizon_steps() == 80);
  std::string line = serialize_trace(t);

  std::istringstream in(line);
  Dataset ds = parse_trace_file(in);
  REQUIRE(ds.traces.size() == 1);
  CHECK(ds.traces[0].frames.size() == 80);
  CHECK(ds.traces[0].horizon_steps() == 80);
  CHECK(ds.traces[0].frames[0].ego_plan.size() == 81);

  // canonical-form byte round-trip
  CHECK(serialize_trace(ds.traces[0]) == line);
}

TEST_CASE("parse: missing ego_plan names the field and line") {
  Trace t = straight_trace(3, 5.0);
  std::string good = serialize_trace(t);
  std::string bad = good;
  auto pos = bad.find("\"ego_plan\"");
  REQUIRE(pos != std::string::npos);
  bad.replace(pos, 10, "\"ego_xxxx\"");

  std::istringstream in(good + "\n" + bad);
  try {
    parse_trace_file(in);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("ego_plan") != std::string::npos);
  }
}

TEST_CASE("parse: inconsistent horizon within a trace is a structural error") {
  Trace t = straight_trace(3, 5.0);
  t.frames[2].ego_plan.pop_back();
  std::istringstream in(serialize_trace(t));
  CHECK_THROWS_AS(parse_trace_file(in), ParseError);
}

TEST_CASE("validate: well-formed trace has no violations") {
  CHECK(validate_trace(straight_trace(10, 5.0)).empty());
}

TEST_CASE("validate: negative speed names frame and field") {
  Trace t = straight_trace(6, 5.0);
  t.frames[3].ego_plan[2].v = -0.5;
  auto v = validate_trace(t);
  REQUIRE(v.size() == 1);
  CHECK(v[0].frame == 3);
  CHECK(v[0].field.find(".v") != std::string::npos);
}

TEST_CASE("validate: mixed map contexts flagged") {
  Trace t = straight_trace(4, 5.0);
  t.frames[2].map = simple_map(); // distinct context object
  auto v = validate_trace(t);
  REQUIRE(v.size() == 1);
  CHECK(v[0].field == "map");
}

TEST_CASE("validate: bad rate and heading range") {
  Trace t = straight_trace(4, 5.0);
  t.rate_hz = 7.0;
  CHECK(!validate_trace(t).empty());

  Trace t2 = straight_trace(4, 5.0);
  t2.frames[0].ego_plan[0].heading = -M_PI; // excluded endpoint
  CHECK(!validate_trace(t2).empty());
}

TEST_CASE("resample: decimation by 2 halves frames and plan samples") {
  Trace t = straight_trace(40, 20.0);
  Trace r = resample(t, 10.0);
  CHECK(r.rate_hz == 10.0);
  CHECK(r.frames.size() == 20);
  CHECK(r.horizon_s == t.horizon_s);
  CHECK(r.frames[0].ego_plan.size() == 41);
  CHECK(validate_trace(r).empty());
}

TEST_CASE("resample: identity and error cases") {
  Trace t = straight_trace(8, 20.0);
  Trace same = resample(t, 20.0);
  CHECK(same.frames.size() == t.frames.size());
  CHECK_THROWS_AS(resample(t, 7.0), std::invalid_argument);
}

TEST_CASE("resample composes: 20->10->5 equals 20->5") {
  Trace t = straight_trace(40, 20.0);
  Trace a = resample(resample(t, 10.0), 5.0);
  Trace b = resample(t, 5.0);
  CHECK(serialize_trace(a) == serialize_trace(b));
}

TEST_CASE("kinematics: constant velocity has zero acceleration") {
  std::vector<EgoPlanPoint> plan;
  for (int k = 0; k <= 20; ++k) plan.push_back({k * 0.5, 0.0, 10.0, 0.0});
  Kinematics kin = derive_kinematics(plan, 0.05);
  for (double a : kin.a_long) CHECK(std::abs(a) < 1e-9);
  for (double a : kin.a_lat) CHECK(std::abs(a) < 1e-9);
}

TEST_CASE("kinematics: linear speed ramp recovers the commanded acceleration") {
  const double dt = 0.05, a = 1.0, v0 = 5.0;
  std::vector<EgoPlanPoint> plan;
  double x = 0.0;
  for (int k = 0; k <= 40; ++k) {
    double v = v0 + a * k * dt;
    plan.push_back({x, 0.0, v, 0.0});
    x += v * dt + 0.5 * a * dt * dt;
  }
  Kinematics kin = derive_kinematics(plan, dt);
  for (double al : kin.a_long) CHECK(al == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("kinematics: circular arc at constant speed gives v^2/r lateral") {
  const double r = 50.0, v = 10.0, dt = 0.05;
  const double omega = v / r;
  std::vector<EgoPlanPoint> plan;
  for (int k = 0; k <= 60; ++k) {
    double ang = omega * k * dt;
    plan.push_back({r * std::sin(ang), r * (1.0 - std::cos(ang)), v, wrap_angle(ang)});
  }
  Kinematics kin = derive_kinematics(plan, dt);
  // interior points: compare against the closed form
  for (std::size_t i = 2; i + 2 < plan.size(); ++i) {
    CHECK(kin.a_lat[i] == doctest::Approx(v * v / r).epsilon(1e-3));
    CHECK(std::abs(kin.a_long[i]) < 0.01);
  }
}

TEST_CASE("kinematics: linearity under uniform spatial scaling") {
  Trace t = random_trace(3, 4);
  auto plan = t.frames[0].ego_plan;
  auto scaled = plan;
  for (auto& p : scaled) {
    p.x *= 2.5;
    p.y *= 2.5;
  }
  Kinematics k1 = derive_kinematics(plan, t.dt());
  Kinematics k2 = derive_kinematics(scaled, t.dt());
  for (std::size_t i = 0; i < plan.size(); ++i) {
    CHECK(k2.a_long[i] == doctest::Approx(2.5 * k1.a_long[i]).epsilon(1e-9));
    CHECK(k2.a_lat[i] == doctest::Approx(2.5 * k1.a_lat[i]).epsilon(1e-9));
  }
}

TEST_CASE("kinematics: short plan rejected") {
  std::vector<EgoPlanPoint> plan{{0, 0, 1, 0}, {1, 0, 1, 0}};
  CHECK_THROWS_AS(derive_kinematics(plan, 0.1), std::invalid_argument);
}

TEST_CASE("dataset split: default 0.9/0.1") {
  Dataset ds;
  ds.traces.resize(20);
  CHECK(ds.train_indices().size() == 18);
  CHECK(ds.val_indices().size() == 2);
}
