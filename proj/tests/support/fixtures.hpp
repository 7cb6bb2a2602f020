#pragma once

// Shared synthetic fixtures for the unit and acceptance suites.

#include "tlr/predicates.hpp"
#include "tlr/scenario.hpp"
#include "tlr/semantics.hpp"
#include "tlr/trace.hpp"

#include <memory>
#include <random>
#include <vector>

namespace tlr::testing {

inline std::shared_ptr<MapContext> simple_map() {
  auto map = std::make_shared<MapContext>();
  map->drivable_polygons.push_back(
      Polygon{{{-50.0, -2.75}, {600.0, -2.75}, {600.0, 6.25}, {-50.0, 6.25}}});
  Lane lane;
  for (double x = -50.0; x <= 600.0; x += 10.0) lane.centerline.points.push_back({x, 0.0});
  lane.speed_limit = 13.9;
  lane.curvature.assign(lane.centerline.points.size(), 0.0);
  map->lanes.push_back(lane);
  return map;
}

/// Straight constant-speed trace: `frames` frames, horizon given by rate*4s.
inline Trace straight_trace(std::size_t frames, double rate_hz = 5.0, double v = 8.0,
                            std::shared_ptr<MapContext> map = nullptr) {
  if (!map) map = simple_map();
  Trace trace;
  trace.rate_hz = rate_hz;
  trace.horizon_s = 4.0;
  const int T = trace.horizon_steps();
  const double dt = trace.dt();
  for (std::size_t f = 0; f < frames; ++f) {
    Frame fr;
    fr.t_index = static_cast<int>(f);
    fr.map = map;
    for (int k = 0; k <= T; ++k) {
      double x = (static_cast<double>(f) + k) * v * dt;
      fr.ego_plan.push_back({x, 0.0, v, 0.0});
    }
    trace.frames.push_back(std::move(fr));
  }
  return trace;
}

/// Randomized scenario-backed trace for property sweeps.
inline Trace random_trace(std::uint64_t seed, std::size_t frames = 8, double rate_hz = 5.0) {
  ScenarioSpec spec;
  auto kinds = all_scenario_kinds();
  spec.kind = kinds[seed % kinds.size()];
  spec.seed = seed;
  spec.rate_hz = rate_hz;
  spec.episode_steps = static_cast<int>(frames);
  Scenario sc = generate_scenario(spec);

  const int horizon = static_cast<int>(rate_hz * spec.horizon_s + 0.5);
  const std::size_t total = frames + static_cast<std::size_t>(horizon);
  std::mt19937_64 rng(seed ^ 0xabcdef12ull);
  std::uniform_real_distribution<double> acc_dist(-2.5, 2.0);
  std::vector<double> acc(total);
  double a1 = acc_dist(rng), a2 = acc_dist(rng);
  for (std::size_t k = 0; k < total; ++k) acc[k] = k < total / 2 ? a1 : a2;
  std::vector<double> lat(total + 1, 0.0);

  auto path = rollout_profile(sc, sc.ego_s0, sc.ego_v0, acc, lat, 1.0 / rate_hz);
  Trace trace;
  trace.rate_hz = rate_hz;
  trace.horizon_s = spec.horizon_s;
  for (std::size_t t = 0; t < frames; ++t) {
    Frame fr;
    fr.t_index = static_cast<int>(t);
    fr.map = sc.map;
    fr.ego_plan.assign(path.begin() + static_cast<long>(t),
                       path.begin() + static_cast<long>(t + horizon + 1));
    for (const auto& agent : sc.agents) {
      AgentTrack track;
      track.id = agent.id;
      track.length = agent.length;
      track.width = agent.width;
      track.points.assign(agent.path.begin() + static_cast<long>(t),
                          agent.path.begin() + static_cast<long>(t + horizon + 1));
      fr.agents.push_back(std::move(track));
    }
    trace.frames.push_back(std::move(fr));
  }
  return trace;
}

/// Random signals in [-1, 1] for semantics tests.
inline SignalMap random_signals(std::uint64_t seed, std::size_t n_signals, std::size_t len) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  SignalMap m;
  for (std::size_t i = 0; i < n_signals; ++i) {
    std::vector<double> v(len);
    for (auto& x : v) x = dist(rng);
    m["s" + std::to_string(i)] = std::move(v);
  }
  return m;
}

/// Random formula over the given atom names.
inline FormulaPtr random_formula(std::mt19937_64& rng, const std::vector<std::string>& atoms,
                                 int depth) {
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 0 : 5);
  switch (pick(rng)) {
    case 1:
      return make_g(random_formula(rng, atoms, depth - 1));
    case 2:
      return make_f(random_formula(rng, atoms, depth - 1));
    case 3:
      return make_not(random_formula(rng, atoms, depth - 1));
    case 4:
      return make_and(random_formula(rng, atoms, depth - 1), random_formula(rng, atoms, depth - 1));
    case 5:
      return make_or(random_formula(rng, atoms, depth - 1), random_formula(rng, atoms, depth - 1));
    default: {
      std::uniform_int_distribution<std::size_t> a(0, atoms.size() - 1);
      return make_atom(atoms[a(rng)]);
    }
  }
}

} // namespace tlr::testing
