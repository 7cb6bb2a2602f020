#pragma once

#include "tlr/formula.hpp"
#include "tlr/logic_network.hpp"
#include "tlr/predicates.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tlr {

/// One condition-action pair: (/\ conditions) -> action.
/// Empty conditions mean an unconditional requirement; a null action encodes
/// a pure environment constraint ((/\ conditions) -> false).
struct RulePair {
  std::vector<FormulaPtr> conditions;
  FormulaPtr action;
};

struct RuleSet {
  std::vector<RulePair> pairs;
  char connective = '&'; // linking the pairs: '&' or '|'
  std::map<std::string, std::vector<double>> theta;
  std::string registry_hash;
  std::string provenance;
};

struct ConcretizeResult {
  FormulaPtr formula;
  int ties = 0; // gates decided by operator priority instead of a strict argmax
};

/// Replaces every selection gate by its argmax operator and every negation
/// gate by the sign of its weight. Nested G G / F F chains are collapsed.
ConcretizeResult concretize(const LogicStructure& s);
ConcretizeResult concretize(const EnsembleStructure& ens);

/// Truth-table minimal sum-of-products over the temporal abstraction (each
/// maximal G/F-rooted subtree is one opaque variable). Deterministic and
/// idempotent. Throws CapacityError above 16 distinct variables.
FormulaPtr simplify(const FormulaPtr& f);

/// Minimal CNF, each clause rewritten as a condition-action pair.
RuleSet to_condition_action_pairs(const FormulaPtr& f, const PredicateRegistry& reg);

/// ((/\ conds) -> action) folded over pairs with the set's connective.
FormulaPtr reconstruct_formula(const RuleSet& rs, const PredicateRegistry& reg);

/// True iff the reconstructed formula accepts every behavior (a tautology
/// over the abstraction), i.e. the rule set constrains nothing.
bool is_trivial(const RuleSet& rs, const PredicateRegistry& reg);

/// Propositional equivalence over the shared temporal abstraction.
bool truth_equivalent(const FormulaPtr& a, const FormulaPtr& b);

std::string render_rules_text(const RuleSet& rs);
std::string ruleset_to_json(const RuleSet& rs);
RuleSet ruleset_from_json(const std::string& text, const PredicateRegistry& reg);
void save_ruleset(const RuleSet& rs, const std::string& path);
RuleSet load_ruleset(const std::string& path, const PredicateRegistry& reg);

/// Builds a structure with saturated gate weights whose extraction is
/// truth-table-equal to (+)_i ((/\_j cond_j) -> action_i). Conditions and
/// actions are temporal literals: an optionally negated G/F chain over one
/// predicate, all predicates distinct. Throws CapacityError when the target
/// does not fit the structure grid.
LogicStructure theorem1_construct(const PredicateRegistry& reg,
                                  const std::vector<FormulaPtr>& conditions,
                                  const std::vector<FormulaPtr>& actions, char connective);

/// The target formula the construction encodes (for equivalence checks).
FormulaPtr condition_action_formula(const std::vector<FormulaPtr>& conditions,
                                    const std::vector<FormulaPtr>& actions, char connective);

} // namespace tlr
