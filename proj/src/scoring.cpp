#include "tlr/scoring.hpp"

#include "tlr/errors.hpp"
#include "tlr/semantics.hpp"
#include "tlr/threading.hpp"

#include <chrono>
#include <set>
#include <stdexcept>

namespace tlr {

FormulaPtr pair_clause(const RulePair& pair) {
  FormulaPtr clause;
  for (const auto& c : pair.conditions) {
    FormulaPtr lit = c->kind == Formula::Kind::Not ? c->left : make_not(c);
    clause = clause ? make_or(clause, lit) : lit;
  }
  if (pair.action) clause = clause ? make_or(clause, pair.action) : pair.action;
  return clause;
}

Trace scoring_trace(const Frame& env, const std::vector<EgoPlanPoint>& plan, double rate_hz) {
  if (plan.size() < 3) throw std::invalid_argument("candidate plan needs >= 3 points");
  Trace trace;
  trace.rate_hz = rate_hz;
  trace.horizon_s = static_cast<double>(plan.size() - 1) / rate_hz;
  const std::size_t frames = plan.size() - 2; // window [t..T] keeps >= 3 points
  trace.frames.reserve(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    Frame fr;
    fr.t_index = static_cast<int>(t);
    fr.map = env.map;
    fr.ego_plan.assign(plan.begin() + static_cast<long>(t), plan.end());
    fr.agents.reserve(env.agents.size());
    for (const auto& a : env.agents) {
      AgentTrack cut = a;
      if (t < a.points.size())
        cut.points.assign(a.points.begin() + static_cast<long>(t), a.points.end());
      else
        cut.points.assign(1, a.points.empty() ? EgoPlanPoint{} : a.points.back());
      fr.agents.push_back(std::move(cut));
    }
    trace.frames.push_back(std::move(fr));
  }
  return trace;
}

namespace {

std::vector<std::string> rule_atoms(const RuleSet& rules, const PredicateRegistry& reg) {
  std::set<std::string> ids;
  for (const auto& pair : rules.pairs) {
    for (const auto& c : pair.conditions)
      for (const auto& a : collect_atoms(c)) ids.insert(a);
    if (pair.action)
      for (const auto& a : collect_atoms(pair.action)) ids.insert(a);
  }
  for (const auto& id : ids)
    if (!reg.contains(id)) throw ConfigError("rule set references unknown predicate '" + id + "'");
  return {ids.begin(), ids.end()};
}

SignalMap rule_signals(const RuleSet& rules, const PredicateRegistry& reg,
                       const FeatureTable& feats, const std::vector<std::string>& ids) {
  SignalMap signals;
  for (const auto& id : ids) {
    const Predicate& p = reg.at(id);
    std::vector<double> theta(p.params.size());
    for (std::size_t k = 0; k < theta.size(); ++k) theta[k] = p.params[k].def;
    if (auto it = rules.theta.find(id); it != rules.theta.end()) {
      if (it->second.size() != theta.size())
        throw ConfigError("theta size mismatch for '" + id + "' in rule set");
      theta = it->second;
    }
    std::vector<double> sig(feats.size());
    for (std::size_t t = 0; t < feats.size(); ++t) sig[t] = evaluate(p, feats[t], theta);
    signals[id] = std::move(sig);
  }
  return signals;
}

} // namespace

std::vector<ScoreBreakdown> score_candidates(const RuleSet& rules, const CandidateSet& cs,
                                             const PredicateRegistry& reg, unsigned threads) {
  if (cs.candidates.empty()) throw std::invalid_argument("candidate set is empty");
  auto ids = rule_atoms(rules, reg);

  std::vector<FormulaPtr> clauses;
  clauses.reserve(rules.pairs.size());
  for (const auto& pair : rules.pairs) clauses.push_back(pair_clause(pair));

  std::vector<ScoreBreakdown> out(cs.candidates.size());
  parallel_for(cs.candidates.size(), threads, [&](std::size_t c) {
    FeatureTable feats = suffix_window_features(cs.env, cs.candidates[c], 1.0 / cs.rate_hz);
    SignalMap signals = rule_signals(rules, reg, feats, ids);
    ScoreBreakdown bd;
    bd.pair_scores.reserve(clauses.size());
    bool first = true;
    for (std::size_t p = 0; p < clauses.size(); ++p) {
      double rob = clauses[p] ? eval_hard(clauses[p], signals, 0) : -1.0;
      bd.pair_scores.push_back({rob, rob < 0.0});
      if (rob < 0.0) bd.violated.push_back(p);
      if (first) {
        bd.total = rob;
        first = false;
      } else {
        bd.total = rules.connective == '&' ? std::min(bd.total, rob) : std::max(bd.total, rob);
      }
    }
    if (first) bd.total = 1.0; // no pairs: vacuous acceptance
    out[c] = std::move(bd);
  });
  return out;
}

std::size_t select(const std::vector<ScoreBreakdown>& breakdowns) {
  if (breakdowns.empty()) throw std::invalid_argument("select over empty breakdown list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < breakdowns.size(); ++i)
    if (breakdowns[i].total > breakdowns[best].total) best = i;
  return best;
}

Monitor::Monitor(RuleSet rules, const PredicateRegistry& reg, double budget_ms, double rate_hz,
                 unsigned threads)
    : rules_(std::move(rules)), reg_(reg), budget_ms_(budget_ms), rate_hz_(rate_hz),
      threads_(threads) {}

CycleResult Monitor::step(const Frame& env, const Proposer& proposer) {
  auto t0 = std::chrono::steady_clock::now();
  CycleResult res;
  std::vector<std::vector<EgoPlanPoint>> candidates;
  try {
    candidates = proposer(env);
  } catch (const std::exception& e) {
    res.proposer_failed = true;
    res.error = e.what();
  }
  if (!res.proposer_failed && candidates.empty()) {
    res.proposer_failed = true;
    res.error = "proposer returned no candidates";
  }
  if (res.proposer_failed) {
    res.plan = held_plan_;
  } else {
    CandidateSet cs{env, std::move(candidates), rate_hz_};
    res.breakdowns = score_candidates(rules_, cs, reg_, threads_);
    res.selected = select(res.breakdowns);
    res.plan = cs.candidates[res.selected];
    held_plan_ = res.plan;
  }
  auto t1 = std::chrono::steady_clock::now();
  res.elapsed_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  res.over_budget = res.elapsed_ms > budget_ms_;
  return res;
}

} // namespace tlr
