#pragma once

#include "tlr/extraction.hpp"
#include "tlr/predicates.hpp"
#include "tlr/trace.hpp"

#include <functional>
#include <string>
#include <vector>

namespace tlr {

/// Candidate plans to rank against one environment frame. The frame supplies
/// agent futures and the map; its own ego_plan is ignored.
struct CandidateSet {
  Frame env;
  std::vector<std::vector<EgoPlanPoint>> candidates;
  double rate_hz = 20.0;
};

struct PairScore {
  double robustness = 0.0;
  bool violated = false;
};

struct ScoreBreakdown {
  double total = 0.0;
  std::vector<PairScore> pair_scores;
  std::vector<std::size_t> violated; // indices of violated pairs
};

/// The clause a pair contributes: !c1 | !c2 | ... | action. Null for the
/// degenerate unconditional-false pair.
FormulaPtr pair_clause(const RulePair& pair);

/// Builds the rolling-window trace scoring evaluates: frame t holds the plan
/// suffix [t..T] and the agents' matching suffixes.
Trace scoring_trace(const Frame& env, const std::vector<EgoPlanPoint>& plan, double rate_hz);

/// Hard-semantics robustness of every pair for every candidate. Order-preserving.
std::vector<ScoreBreakdown> score_candidates(const RuleSet& rules, const CandidateSet& cs,
                                             const PredicateRegistry& reg, unsigned threads = 1);

/// Argmax of total score; ties break to the lowest index.
std::size_t select(const std::vector<ScoreBreakdown>& breakdowns);

struct CycleResult {
  std::size_t selected = 0;
  std::vector<EgoPlanPoint> plan;
  std::vector<ScoreBreakdown> breakdowns;
  double elapsed_ms = 0.0;
  bool over_budget = false;
  bool proposer_failed = false;
  std::string error;
};

/// Propose -> score -> select, one cycle at a time. A failing proposer leaves
/// the previous selection in place and records the error.
class Monitor {
public:
  using Proposer = std::function<std::vector<std::vector<EgoPlanPoint>>(const Frame&)>;

  Monitor(RuleSet rules, const PredicateRegistry& reg, double budget_ms = 50.0,
          double rate_hz = 20.0, unsigned threads = 1);

  CycleResult step(const Frame& env, const Proposer& proposer);
  const std::vector<EgoPlanPoint>& held_plan() const { return held_plan_; }

private:
  RuleSet rules_;
  const PredicateRegistry& reg_;
  double budget_ms_;
  double rate_hz_;
  unsigned threads_;
  std::vector<EgoPlanPoint> held_plan_;
};

} // namespace tlr
