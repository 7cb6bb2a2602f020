// Criteria 9-10: monitoring throughput and the documented out-of-scope line.

#include "acceptance.hpp"

#include "tlr/predicates.hpp"
#include "tlr/scenario.hpp"
#include "tlr/scoring.hpp"
#include "support/fixtures.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

using namespace tlr;
using namespace tlr::testing;

namespace acceptance {

// 9. Scoring 15 candidates x 80-step horizon with the full builtin rule set
//    completes in < 50 ms per cycle over 200 cycles.
Result criterion_throughput() {
  PredicateRegistry reg = builtin_registry();

  // full-catalog rule set: one unconditional pair per action predicate plus
  // the conditioned pairs of the three-rule teacher
  RuleSet rules = teacher_city3(reg);
  for (const char* action : {"SpeedLimitCompliant", "InLane", "ProgressMade"}) {
    RulePair p;
    p.action = make_g(make_atom(action));
    rules.pairs.push_back(p);
  }
  for (const char* cond : {"LeadVehicleAhead", "ApproachingStop", "TrafficLightRed",
                           "HighLaneCurvature", "AgentNearby", "InIntersection",
                           "SlowLeadVehicle", "NearVRU"}) {
    RulePair p;
    p.conditions.push_back(make_atom(cond));
    p.action = make_f(make_atom("Comfortable"));
    rules.pairs.push_back(p);
  }

  ScenarioSpec spec;
  spec.kind = ScenarioKind::Following;
  spec.rate_hz = 20.0; // 80-step horizon
  spec.episode_steps = 200;
  Monitor::Proposer proposer = [](const Frame& env) { return at_sampler(env, 15, 5); };
  RunMetrics m = run_closed_loop(spec, proposer, rules, reg, 200, 17, nullptr, 2);

  double mean = std::accumulate(m.cycle_ms.begin(), m.cycle_ms.end(), 0.0) /
                static_cast<double>(m.cycle_ms.size());
  double worst = *std::max_element(m.cycle_ms.begin(), m.cycle_ms.end());
  std::ostringstream os;
  os << "200 cycles, mean " << mean << " ms, max " << worst << " ms (budget 50 ms)";
  return {m.cycles == 200 && worst < 50.0, os.str()};
}

// 10. External closed-loop benchmark scores are not reproducible at desk
//     scale; criteria 5-8 substitute for them. This entry documents the scope
//     decision so the suite stays honest about what it measures.
Result criterion_out_of_scope() {
  return {true,
          "external dataset/simulator scores are out of scope by design; "
          "criteria 5-8 are the desk-scale substitute"};
}

} // namespace acceptance
