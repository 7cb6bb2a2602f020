#pragma once

#include "tlr/extraction.hpp"
#include "tlr/predicates.hpp"
#include "tlr/scoring.hpp"
#include "tlr/trace.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tlr {

enum class ScenarioKind {
  Following,
  Stopping,
  Turn,
  ChangeLane,
  NearStatic,
  Stationary,
  Starting,
  Traversing,
  NearVru
};

const std::vector<ScenarioKind>& all_scenario_kinds();
std::string to_string(ScenarioKind k);
ScenarioKind scenario_kind_from_string(const std::string& s);

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::Following;
  std::uint64_t seed = 0;
  double rate_hz = 20.0;
  double horizon_s = 4.0;
  int episode_steps = 100; // sizes the scripted agent paths
};

struct ScriptedAgent {
  std::string id;
  double length = 4.5;
  double width = 2.0;
  std::vector<EgoPlanPoint> path; // episode + horizon samples
};

/// A generated scene: map, the ego's reference route (a lane centerline with
/// arclength addressing), the ego start, and scripted agents.
struct Scenario {
  ScenarioKind kind = ScenarioKind::Following;
  std::shared_ptr<const MapContext> map;
  Polyline route;
  std::vector<double> route_cumlen;
  double ego_s0 = 0.0;  // start arclength along the route
  double ego_d0 = 0.0;  // start lateral offset
  double ego_v0 = 0.0;
  std::vector<ScriptedAgent> agents;
};

/// Deterministic per (kind, seed); ego starts inside the drivable area and
/// agents do not overlap.
Scenario generate_scenario(const ScenarioSpec& spec);

/// Point/heading on a route at arclength s with lateral offset d.
EgoPlanPoint route_point(const Scenario& sc, double s, double d, double v);

/// Rolls a longitudinal acceleration profile and lateral offset sequence out
/// along the route. acc has one entry per step, lat one per sample point.
std::vector<EgoPlanPoint> rollout_profile(const Scenario& sc, double s0, double v0,
                                          std::span<const double> acc, std::span<const double> lat,
                                          double dt);

struct ATCandidate {
  double acc = 0.0;        // commanded constant longitudinal acceleration
  double lat_target = 0.0; // lateral offset target at the horizon end
  std::vector<EgoPlanPoint> plan;
};

/// Acceleration x lateral-offset lattice rolled out along the nearest lane.
/// Candidate 0 is always the zero-action (hold speed, keep offset) rollout.
std::vector<ATCandidate> at_sampler_detailed(const Frame& state, std::size_t n, std::uint64_t seed);
std::vector<std::vector<EgoPlanPoint>> at_sampler(const Frame& state, std::size_t n,
                                                  std::uint64_t seed);

struct DemoConfig {
  double margin_delta = 0.05;       // required teacher robustness on every pair
  std::size_t attempts_per_demo = 400;
  unsigned threads = 0;
};

struct DemoStats {
  std::size_t generated = 0;
  std::size_t attempts = 0;
  double acceptance_rate() const {
    return attempts ? static_cast<double>(generated) / static_cast<double>(attempts) : 0.0;
  }
};

/// Positive-only demonstrations: profile rollouts rejection-sampled until the
/// teacher accepts every pair with margin > delta. Throws InfeasibleError when
/// a spec's acceptance rate collapses below 1%.
Dataset generate_demonstrations(const RuleSet& teacher, const PredicateRegistry& reg,
                                const std::vector<ScenarioSpec>& specs, std::size_t count,
                                std::uint64_t seed, const DemoConfig& cfg = {},
                                DemoStats* stats = nullptr);

struct RunMetrics {
  bool collision = false;
  bool drivable_exit = false;
  int comfort_violations = 0;
  double progress_m = 0.0;
  double executed_score = 0.0; // grader robustness of the executed trajectory
  int cycles = 0;
  int proposer_errors = 0;
  std::vector<double> cycle_ms;
};

/// Non-reactive closed loop: propose -> score -> select -> execute one step,
/// agents replay their scripts. Deterministic per (spec, seed).
RunMetrics run_closed_loop(const ScenarioSpec& spec, const Monitor::Proposer& proposer,
                           const RuleSet& rules, const PredicateRegistry& reg, int steps,
                           std::uint64_t seed, const RuleSet* grader = nullptr,
                           unsigned threads = 1);

/// Teacher rule sets used by the synthetic harness and the CLI.
RuleSet teacher_comfort(const PredicateRegistry& reg);  // T -> G Comfortable (published bounds)
RuleSet teacher_city3(const PredicateRegistry& reg);    // the three-rule teacher

} // namespace tlr
