#include "tlr/extraction.hpp"

#include "tlr/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <fstream>
#include <set>
#include <unordered_map>

namespace tlr {

using nlohmann::json;

// --- temporal abstraction ----------------------------------------------------

namespace {

constexpr std::size_t kMaxVars = 16;

bool is_abstraction_point(const Formula& f) {
  return f.kind == Formula::Kind::Atom || f.kind == Formula::Kind::G || f.kind == Formula::Kind::F;
}

void collect_points(const FormulaPtr& f, std::map<std::string, FormulaPtr>& points) {
  if (!f) return;
  if (is_abstraction_point(*f)) {
    points.emplace(format_formula(f), f);
    return;
  }
  collect_points(f->left, points);
  collect_points(f->right, points);
}

struct PropAbstraction {
  std::vector<FormulaPtr> vars;       // sorted by formatted text
  std::vector<std::string> names;

  int var_of(const std::string& name) const {
    auto it = std::lower_bound(names.begin(), names.end(), name);
    return static_cast<int>(it - names.begin());
  }

  bool eval(const FormulaPtr& f, std::uint32_t assign) const {
    if (is_abstraction_point(*f)) return (assign >> var_of(format_formula(f))) & 1u;
    switch (f->kind) {
      case Formula::Kind::Not:
        return !eval(f->left, assign);
      case Formula::Kind::And:
        return eval(f->left, assign) && eval(f->right, assign);
      case Formula::Kind::Or:
        return eval(f->left, assign) || eval(f->right, assign);
      default:
        throw std::logic_error("unreachable");
    }
  }
};

PropAbstraction abstract_over(std::initializer_list<FormulaPtr> formulas) {
  std::map<std::string, FormulaPtr> points;
  for (const auto& f : formulas) collect_points(f, points);
  if (points.size() > kMaxVars)
    throw CapacityError("formula has " + std::to_string(points.size()) +
                        " abstract atoms; the truth-table limit is " + std::to_string(kMaxVars));
  PropAbstraction ab;
  for (auto& [name, f] : points) {
    ab.names.push_back(name);
    ab.vars.push_back(f);
  }
  return ab;
}

std::vector<bool> truth_table(const PropAbstraction& ab, const FormulaPtr& f) {
  std::size_t rows = std::size_t{1} << ab.vars.size();
  std::vector<bool> table(rows);
  for (std::size_t a = 0; a < rows; ++a) table[a] = ab.eval(f, static_cast<std::uint32_t>(a));
  return table;
}

// --- Quine-McCluskey ---------------------------------------------------------

struct Implicant {
  std::uint32_t value = 0;
  std::uint32_t mask = 0; // 1 bits are dashes
  int literals(int nvars) const { return nvars - std::popcount(mask); }
  bool covers(std::uint32_t minterm) const { return (minterm & ~mask) == (value & ~mask); }
  bool operator<(const Implicant& o) const {
    return std::tie(mask, value) < std::tie(o.mask, o.value);
  }
  bool operator==(const Implicant& o) const { return mask == o.mask && value == o.value; }
};

std::vector<Implicant> prime_implicants(const std::vector<std::uint32_t>& minterms, int nvars) {
  std::set<Implicant> current;
  for (auto m : minterms) current.insert({m, 0});
  std::set<Implicant> primes;
  while (!current.empty()) {
    std::set<Implicant> next;
    std::set<Implicant> combined;
    std::vector<Implicant> list(current.begin(), current.end());
    for (std::size_t i = 0; i < list.size(); ++i) {
      for (std::size_t j = i + 1; j < list.size(); ++j) {
        if (list[i].mask != list[j].mask) continue;
        std::uint32_t diff = list[i].value ^ list[j].value;
        if (std::popcount(diff) != 1) continue;
        next.insert({list[i].value & ~diff, list[i].mask | diff});
        combined.insert(list[i]);
        combined.insert(list[j]);
      }
    }
    for (const auto& im : list)
      if (!combined.count(im)) primes.insert(im);
    current = std::move(next);
  }
  std::vector<Implicant> out(primes.begin(), primes.end());
  // mask out dashed value bits for canonical form
  for (auto& im : out) im.value &= ~im.mask;
  std::sort(out.begin(), out.end());
  return out;
}

// Deterministic minimal cover: essential primes, then Petrick's method with a
// greedy fallback if the product blows up. Ties: fewer literals, then order.
std::vector<Implicant> minimal_cover(const std::vector<std::uint32_t>& minterms,
                                     const std::vector<Implicant>& primes, int nvars) {
  if (minterms.empty()) return {};
  std::vector<Implicant> sorted(primes);
  std::sort(sorted.begin(), sorted.end(), [&](const Implicant& a, const Implicant& b) {
    int la = a.literals(nvars), lb = b.literals(nvars);
    return std::tie(la, a.mask, a.value) < std::tie(lb, b.mask, b.value);
  });

  std::vector<Implicant> chosen;
  std::set<std::uint32_t> uncovered(minterms.begin(), minterms.end());

  // essential primes
  for (auto m : minterms) {
    int count = 0;
    std::size_t last = 0;
    for (std::size_t p = 0; p < sorted.size(); ++p) {
      if (sorted[p].covers(m)) {
        ++count;
        last = p;
        if (count > 1) break;
      }
    }
    if (count == 1) {
      const Implicant& e = sorted[last];
      if (std::find(chosen.begin(), chosen.end(), e) == chosen.end()) {
        chosen.push_back(e);
        for (auto it = uncovered.begin(); it != uncovered.end();)
          it = e.covers(*it) ? uncovered.erase(it) : std::next(it);
      }
    }
  }

  if (!uncovered.empty()) {
    // Petrick: product of sums of candidate prime indices
    using Term = std::vector<std::size_t>; // sorted prime indices
    std::vector<Term> products{{}};
    constexpr std::size_t kCap = 20000;
    bool overflow = false;
    for (auto m : uncovered) {
      std::vector<std::size_t> sum;
      for (std::size_t p = 0; p < sorted.size(); ++p)
        if (sorted[p].covers(m)) sum.push_back(p);
      std::vector<Term> next;
      for (const auto& t : products) {
        for (auto p : sum) {
          Term nt = t;
          if (std::find(nt.begin(), nt.end(), p) == nt.end()) {
            nt.insert(std::lower_bound(nt.begin(), nt.end(), p), p);
          }
          next.push_back(std::move(nt));
        }
        if (next.size() > kCap) {
          overflow = true;
          break;
        }
      }
      if (overflow) break;
      // absorption: drop supersets
      std::sort(next.begin(), next.end(), [](const Term& a, const Term& b) {
        return a.size() != b.size() ? a.size() < b.size() : a < b;
      });
      next.erase(std::unique(next.begin(), next.end()), next.end());
      std::vector<Term> kept;
      for (const auto& t : next) {
        bool absorbed = false;
        for (const auto& k : kept) {
          if (std::includes(t.begin(), t.end(), k.begin(), k.end())) {
            absorbed = true;
            break;
          }
        }
        if (!absorbed) kept.push_back(t);
      }
      products = std::move(kept);
    }

    if (!overflow && !products.empty()) {
      auto cost = [&](const Term& t) {
        int lits = 0;
        for (auto p : t) lits += sorted[p].literals(nvars);
        return lits;
      };
      const Term* best = &products[0];
      for (const auto& t : products) {
        int ct = cost(t), cb = cost(*best);
        if (std::tie(ct, t) < std::tie(cb, *best)) best = &t;
      }
      for (auto p : *best)
        if (std::find(chosen.begin(), chosen.end(), sorted[p]) == chosen.end())
          chosen.push_back(sorted[p]);
    } else {
      // greedy: cover the most uncovered minterms, prefer fewer literals
      while (!uncovered.empty()) {
        std::size_t best_p = 0;
        std::size_t best_cover = 0;
        for (std::size_t p = 0; p < sorted.size(); ++p) {
          std::size_t cov = 0;
          for (auto m : uncovered)
            if (sorted[p].covers(m)) ++cov;
          if (cov > best_cover) {
            best_cover = cov;
            best_p = p;
          }
        }
        chosen.push_back(sorted[best_p]);
        for (auto it = uncovered.begin(); it != uncovered.end();)
          it = sorted[best_p].covers(*it) ? uncovered.erase(it) : std::next(it);
      }
    }
  }

  std::sort(chosen.begin(), chosen.end(), [&](const Implicant& a, const Implicant& b) {
    int la = a.literals(nvars), lb = b.literals(nvars);
    return std::tie(la, a.value, a.mask) < std::tie(lb, b.value, b.mask);
  });
  return chosen;
}

std::vector<Implicant> qm_minimize(const std::vector<bool>& table, int nvars) {
  std::vector<std::uint32_t> minterms;
  for (std::uint32_t m = 0; m < table.size(); ++m)
    if (table[m]) minterms.push_back(m);
  if (minterms.empty()) return {};
  auto primes = prime_implicants(minterms, nvars);
  return minimal_cover(minterms, primes, nvars);
}

FormulaPtr literal_formula(const PropAbstraction& ab, int var, bool positive) {
  FormulaPtr v = ab.vars[static_cast<std::size_t>(var)];
  return positive ? v : make_not(v);
}

FormulaPtr implicant_formula(const PropAbstraction& ab, const Implicant& im, int nvars) {
  FormulaPtr f;
  for (int k = 0; k < nvars; ++k) {
    if ((im.mask >> k) & 1u) continue;
    FormulaPtr lit = literal_formula(ab, k, (im.value >> k) & 1u);
    f = f ? make_and(f, lit) : lit;
  }
  return f; // null for the all-dash implicant (tautology)
}

FormulaPtr sop_formula(const PropAbstraction& ab, const std::vector<Implicant>& cover, int nvars) {
  if (cover.empty()) // contradiction
    return make_and(ab.vars[0], make_not(ab.vars[0]));
  FormulaPtr f;
  for (const auto& im : cover) {
    FormulaPtr term = implicant_formula(ab, im, nvars);
    if (!term) // tautology
      return make_or(ab.vars[0], make_not(ab.vars[0]));
    f = f ? make_or(f, term) : term;
  }
  return f;
}

} // namespace

// --- concretize --------------------------------------------------------------

namespace {

int argmax_with_ties(const double* w, int k, int* ties) {
  int best = 0;
  bool tie = false;
  for (int i = 1; i < k; ++i) {
    if (w[i] > w[best]) {
      best = i;
      tie = false;
    } else if (w[i] == w[best]) {
      tie = true;
    }
  }
  if (tie && ties) ++*ties;
  return best;
}

FormulaPtr apply_temporal(FormulaPtr f, int slot) {
  switch (slot) {
    case 0: // collapse G G -> G
      return f->kind == Formula::Kind::G ? f : make_g(std::move(f));
    case 1:
      return f->kind == Formula::Kind::F ? f : make_f(std::move(f));
    default:
      return f;
  }
}

FormulaPtr concretize_member(const LogicStructure& s, int* ties) {
  const std::size_t n = s.n();
  std::vector<FormulaPtr> chain(n);
  for (std::size_t i = 0; i < n; ++i) chain[i] = make_atom(s.predicate_ids[i]);
  for (int l = 0; l < s.depth; ++l) {
    for (std::size_t i = 0; i < n; ++i) {
      int slot = argmax_with_ties(&s.temporal[(static_cast<std::size_t>(l) * n + i) * 3], 3, ties);
      chain[i] = apply_temporal(chain[i], slot);
    }
  }
  auto pairs = cluster_pairs(n);
  std::vector<FormulaPtr> vals;
  vals.reserve(pairs.size());
  for (std::size_t c = 0; c < pairs.size(); ++c) {
    FormulaPtr a = chain[static_cast<std::size_t>(pairs[c].i)];
    FormulaPtr b = chain[static_cast<std::size_t>(pairs[c].j)];
    if (s.neg_w(c, 0) < 0.0) a = make_not(a);
    if (s.neg_w(c, 1) < 0.0) b = make_not(b);
    int op = argmax_with_ties(&s.cluster_op[c * 2], 2, ties);
    vals.push_back(op == 0 ? make_and(a, b) : make_or(a, b));
  }
  FormulaPtr acc = vals[0];
  for (std::size_t g = 0; g + 1 < vals.size(); ++g) {
    int op = argmax_with_ties(&s.agg_op[g * 2], 2, ties);
    acc = op == 0 ? make_and(acc, vals[g + 1]) : make_or(acc, vals[g + 1]);
  }
  return acc;
}

} // namespace

ConcretizeResult concretize(const LogicStructure& s) {
  ConcretizeResult r;
  r.formula = concretize_member(s, &r.ties);
  return r;
}

ConcretizeResult concretize(const EnsembleStructure& ens) {
  ConcretizeResult r;
  std::vector<FormulaPtr> members;
  members.reserve(ens.k());
  for (const auto& m : ens.members) members.push_back(concretize_member(m, &r.ties));
  FormulaPtr acc = members[0];
  for (std::size_t g = 0; g + 1 < members.size(); ++g) {
    int op = argmax_with_ties(&ens.outer_op[g * 2], 2, &r.ties);
    acc = op == 0 ? make_and(acc, members[g + 1]) : make_or(acc, members[g + 1]);
  }
  r.formula = acc;
  return r;
}

// --- simplify / pairs ----------------------------------------------------------

FormulaPtr simplify(const FormulaPtr& f) {
  if (!f) throw std::invalid_argument("simplify: null formula");
  PropAbstraction ab = abstract_over({f});
  int nvars = static_cast<int>(ab.vars.size());
  auto table = truth_table(ab, f);
  auto cover = qm_minimize(table, nvars);
  return sop_formula(ab, cover, nvars);
}

namespace {

PredicateKind classify_var(const FormulaPtr& var, const PredicateRegistry& reg) {
  auto atoms = collect_atoms(var);
  if (atoms.empty()) throw ConfigError("abstract atom without predicates");
  PredicateKind kind = reg.at(atoms[0]).kind;
  for (const auto& id : atoms)
    if (reg.at(id).kind != kind)
      throw ConfigError("temporal atom '" + format_formula(var) + "' mixes condition and action predicates");
  return kind;
}

} // namespace

RuleSet to_condition_action_pairs(const FormulaPtr& f, const PredicateRegistry& reg) {
  if (!f) throw std::invalid_argument("to_condition_action_pairs: null formula");
  PropAbstraction ab = abstract_over({f});
  int nvars = static_cast<int>(ab.vars.size());
  auto table = truth_table(ab, f);

  // minimal CNF = complement of the minimal SOP of the complement
  std::vector<bool> complement(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) complement[i] = !table[i];
  auto cover = qm_minimize(complement, nvars);

  std::vector<PredicateKind> kinds;
  kinds.reserve(ab.vars.size());
  for (const auto& v : ab.vars) kinds.push_back(classify_var(v, reg));

  RuleSet rs;
  rs.connective = '&';
  rs.registry_hash = reg.hash();
  // tautology: complement cover is empty -> no constraints at all
  for (const auto& im : cover) {
    RulePair pair;
    FormulaPtr action;
    for (int k = 0; k < nvars; ++k) {
      if ((im.mask >> k) & 1u) continue;
      bool product_positive = (im.value >> k) & 1u;
      // clause literal is the complement of the product literal
      bool clause_positive = !product_positive;
      if (kinds[static_cast<std::size_t>(k)] == PredicateKind::Condition) {
        // clause: cond_lit \/ ... == (!cond_lit) -> ...; double negation removed
        pair.conditions.push_back(literal_formula(ab, k, !clause_positive));
      } else {
        FormulaPtr lit = literal_formula(ab, k, clause_positive);
        action = action ? make_or(action, lit) : lit;
      }
    }
    pair.action = action;
    rs.pairs.push_back(std::move(pair));
  }
  return rs;
}

FormulaPtr reconstruct_formula(const RuleSet& rs, const PredicateRegistry& reg) {
  FormulaPtr acc;
  for (const auto& pair : rs.pairs) {
    FormulaPtr clause;
    for (const auto& c : pair.conditions) {
      FormulaPtr lit = c->kind == Formula::Kind::Not ? c->left : make_not(c);
      clause = clause ? make_or(clause, lit) : lit;
    }
    if (pair.action) clause = clause ? make_or(clause, pair.action) : pair.action;
    if (!clause) {
      // unconditional "false": contradiction over any atom
      FormulaPtr a = make_atom(reg.at(std::size_t{0}).id);
      clause = make_and(a, make_not(a));
    }
    if (!acc)
      acc = clause;
    else
      acc = rs.connective == '&' ? make_and(acc, clause) : make_or(acc, clause);
  }
  return acc; // null when there are no pairs (tautology)
}

bool is_trivial(const RuleSet& rs, const PredicateRegistry& reg) {
  FormulaPtr f = reconstruct_formula(rs, reg);
  if (!f) return true;
  PropAbstraction ab = abstract_over({f});
  auto table = truth_table(ab, f);
  return std::all_of(table.begin(), table.end(), [](bool b) { return b; });
}

bool truth_equivalent(const FormulaPtr& a, const FormulaPtr& b) {
  if (!a || !b) return !a == !b;
  PropAbstraction ab = abstract_over({a, b});
  std::size_t rows = std::size_t{1} << ab.vars.size();
  for (std::size_t x = 0; x < rows; ++x) {
    auto assign = static_cast<std::uint32_t>(x);
    if (ab.eval(a, assign) != ab.eval(b, assign)) return false;
  }
  return true;
}

// --- rendering / io ----------------------------------------------------------

namespace {
std::string pair_condition_text(const RulePair& pair) {
  if (pair.conditions.empty()) return "T";
  std::string out;
  for (std::size_t i = 0; i < pair.conditions.size(); ++i) {
    if (i) out += " & ";
    out += format_formula(pair.conditions[i]);
  }
  return out;
}
} // namespace

std::string render_rules_text(const RuleSet& rs) {
  std::string out;
  for (const auto& pair : rs.pairs) {
    out += pair_condition_text(pair);
    out += " -> ";
    out += pair.action ? format_formula(pair.action) : "false";
    out += "\n";
  }
  return out;
}

std::string ruleset_to_json(const RuleSet& rs) {
  json j;
  j["format"] = "tlr-rules";
  j["version"] = 1;
  j["registry_hash"] = rs.registry_hash;
  j["connective"] = std::string(1, rs.connective);
  j["provenance"] = rs.provenance;
  j["theta"] = rs.theta;
  json pairs = json::array();
  for (const auto& pair : rs.pairs) {
    json pj;
    json conds = json::array();
    for (const auto& c : pair.conditions) conds.push_back(format_formula(c));
    pj["conditions"] = conds;
    pj["action"] = pair.action ? json(format_formula(pair.action)) : json(nullptr);
    pairs.push_back(pj);
  }
  j["pairs"] = pairs;
  return j.dump(2);
}

RuleSet ruleset_from_json(const std::string& text, const PredicateRegistry& reg) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("rule file: ") + e.what());
  }
  if (j.value("format", "") != "tlr-rules") throw ParseError("rule file: unknown format header");
  RuleSet rs;
  std::string conn = j.value("connective", "&");
  rs.connective = conn.empty() ? '&' : conn[0];
  rs.registry_hash = j.value("registry_hash", "");
  rs.provenance = j.value("provenance", "");
  if (j.contains("theta")) rs.theta = j["theta"].get<std::map<std::string, std::vector<double>>>();
  auto validate = [&reg](const std::string& id) { return reg.contains(id); };
  for (const auto& pj : j.at("pairs")) {
    RulePair pair;
    for (const auto& c : pj.at("conditions")) pair.conditions.push_back(parse_formula(c, validate));
    if (!pj.at("action").is_null()) pair.action = parse_formula(pj.at("action"), validate);
    rs.pairs.push_back(std::move(pair));
  }
  return rs;
}

void save_ruleset(const RuleSet& rs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  out << ruleset_to_json(rs) << "\n";
}

RuleSet load_ruleset(const std::string& path, const PredicateRegistry& reg) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return ruleset_from_json(text, reg);
}

// --- constructive encoding -----------------------------------------------------

namespace {

struct TemporalLiteral {
  std::string pred;
  std::vector<int> ops; // temporal slots innermost-first: 0 = G, 1 = F
  bool negated = false;
};

TemporalLiteral parse_literal(const FormulaPtr& f) {
  TemporalLiteral lit;
  const Formula* cur = f.get();
  if (cur->kind == Formula::Kind::Not) {
    lit.negated = true;
    cur = cur->left.get();
  }
  std::vector<int> outer_first;
  while (cur->kind == Formula::Kind::G || cur->kind == Formula::Kind::F) {
    outer_first.push_back(cur->kind == Formula::Kind::G ? 0 : 1);
    cur = cur->left.get();
  }
  if (cur->kind != Formula::Kind::Atom)
    throw std::invalid_argument("expected a (possibly negated) temporal chain over one predicate: " +
                                format_formula(f));
  lit.pred = cur->atom;
  lit.ops.assign(outer_first.rbegin(), outer_first.rend());
  return lit;
}

constexpr double kSelSat = 25.0;
constexpr double kNegSat = 12.0;

void saturate_gate(double* w, int k, int slot) {
  for (int i = 0; i < k; ++i) w[i] = i == slot ? kSelSat : -kSelSat;
}

// boolean value of the constructed fold under an assignment of chain truths
struct ClusterCfg {
  int sa = 1, sb = 1; // +1 keep, -1 negate
  bool op_and = false;
  bool link_and = true; // link joining this cluster into the fold (ignored for cluster 0)
};

bool eval_fold(const std::vector<ClusterPair>& pairs, const std::vector<ClusterCfg>& cfg,
               std::uint32_t assign, std::size_t nbits) {
  (void)nbits;
  bool acc = false;
  for (std::size_t c = 0; c < pairs.size(); ++c) {
    bool a = (assign >> pairs[c].i) & 1u;
    bool b = (assign >> pairs[c].j) & 1u;
    if (cfg[c].sa < 0) a = !a;
    if (cfg[c].sb < 0) b = !b;
    bool val = cfg[c].op_and ? (a && b) : (a || b);
    acc = c == 0 ? val : (cfg[c].link_and ? (acc && val) : (acc || val));
  }
  return acc;
}

} // namespace

FormulaPtr condition_action_formula(const std::vector<FormulaPtr>& conditions,
                                    const std::vector<FormulaPtr>& actions, char connective) {
  FormulaPtr acc;
  for (const auto& a : actions) {
    FormulaPtr clause;
    for (const auto& c : conditions) {
      FormulaPtr lit = c->kind == Formula::Kind::Not ? c->left : make_not(c);
      clause = clause ? make_or(clause, lit) : lit;
    }
    clause = clause ? make_or(clause, a) : a;
    if (!acc)
      acc = clause;
    else
      acc = connective == '&' ? make_and(acc, clause) : make_or(acc, clause);
  }
  return acc;
}

LogicStructure theorem1_construct(const PredicateRegistry& reg,
                                  const std::vector<FormulaPtr>& conditions,
                                  const std::vector<FormulaPtr>& actions, char connective) {
  if (conditions.empty() || actions.empty())
    throw std::invalid_argument("theorem1_construct: need at least one condition and one action");
  const std::size_t n = conditions.size(), m = actions.size();
  const std::size_t N = n + m;
  if (connective == '&' && m > 2)
    throw CapacityError("theorem1_construct: the AND connective supports at most 2 actions");

  std::vector<TemporalLiteral> all_lits;
  all_lits.reserve(N);
  for (const auto& c : conditions) all_lits.push_back(parse_literal(c));
  for (const auto& a : actions) all_lits.push_back(parse_literal(a));

  std::set<std::string> distinct;
  for (const auto& l : all_lits) {
    if (!reg.contains(l.pred)) throw ConfigError("unknown predicate '" + l.pred + "'");
    if (!distinct.insert(l.pred).second)
      throw CapacityError("theorem1_construct: predicates must be distinct across inputs");
  }

  // slot order: the AND connective with several conditions needs the action
  // conjunction assembled first, so actions lead; otherwise conditions lead
  const bool acts_first = connective == '&' && m >= 2 && n >= 2;
  std::vector<TemporalLiteral> lits;
  std::vector<bool> is_cond_slot;
  auto push = [&](const TemporalLiteral& l, bool is_cond) {
    lits.push_back(l);
    is_cond_slot.push_back(is_cond);
  };
  if (acts_first) {
    for (std::size_t i = 0; i < m; ++i) push(all_lits[n + i], false);
    for (std::size_t j = 0; j < n; ++j) push(all_lits[j], true);
  } else {
    for (std::size_t j = 0; j < n; ++j) push(all_lits[j], true);
    for (std::size_t i = 0; i < m; ++i) push(all_lits[n + i], false);
  }

  std::vector<std::string> ids;
  int depth = 1;
  for (const auto& l : lits) {
    ids.push_back(l.pred);
    depth = std::max(depth, static_cast<int>(l.ops.size()));
  }

  LogicStructure s = build_structure(ids, depth, /*seed=*/0);
  const std::size_t C = s.cluster_count();
  auto pairs = cluster_pairs(N);

  for (std::size_t i = 0; i < N; ++i) {
    for (int l = 0; l < depth; ++l) {
      int slot = l < static_cast<int>(lits[i].ops.size()) ? lits[i].ops[static_cast<std::size_t>(l)] : 2;
      saturate_gate(&s.temporal[(static_cast<std::size_t>(l) * N + i) * 3], 3, slot);
    }
  }

  auto is_condition = [&](int slot) { return is_cond_slot[static_cast<std::size_t>(slot)]; };
  // sign (relative to the raw chain) of the input formula and of its negation
  auto self_sign = [&](int slot) { return lits[static_cast<std::size_t>(slot)].negated ? -1 : +1; };
  auto neg_sign = [&](int slot) { return -self_sign(slot); };
  // how the literal enters a clause: conditions negated, actions as-is
  auto clause_sign = [&](int slot) { return is_condition(slot) ? neg_sign(slot) : self_sign(slot); };

  // Target shapes over the fold:
  //   '|' or m == 1:  flat disjunction  \/_j !c_j \/ \/_i a_i
  //   '&', n == 1:    (!c | a_1) & (!c | a_2), the shared-condition product
  //   '&', n, m >= 2: (a_1 & a_2) \/ \/_{i,j}(a_i & !c_j) \/ \/_{j<k}(!c_j | !c_k)
  //                   == (/\ a_i) \/ (\/_j !c_j); the mixed terms are absorbed
  const bool flat = connective == '|' || m == 1;
  std::vector<ClusterCfg> cfg(C);
  std::vector<bool> junk(C);
  for (std::size_t c = 0; c < C; ++c) {
    int i = pairs[c].i, j = pairs[c].j;
    bool ci = is_condition(i), cj = is_condition(j);
    bool useful = ci != cj;
    junk[c] = !useful;
    if (flat) {
      cfg[c] = {clause_sign(i), clause_sign(j), false, false};
    } else if (n == 1) {
      if (useful) {
        cfg[c] = {clause_sign(i), clause_sign(j), false, true};
      } else { // action-action: conjoin, fold in with OR (absorbed)
        cfg[c] = {self_sign(i), self_sign(j), true, false};
      }
    } else { // acts_first layout
      if (!ci && !cj) { // action pair: the conjunction head
        cfg[c] = {self_sign(i), self_sign(j), true, false};
      } else if (useful) { // mixed: a & !c, absorbed into the disjunction
        int sa = is_condition(i) ? neg_sign(i) : self_sign(i);
        int sb = is_condition(j) ? neg_sign(j) : self_sign(j);
        cfg[c] = {sa, sb, true, false};
      } else { // condition pair: !c | !c
        cfg[c] = {neg_sign(i), neg_sign(j), false, false};
      }
    }
  }

  // verify against the target over chain-truth assignments; repair by a small
  // search over junk-cluster configurations when the default scheme misses
  std::vector<std::uint32_t> target_ok;
  {
    std::size_t rows = std::size_t{1} << N;
    target_ok.resize(rows);
    for (std::size_t a = 0; a < rows; ++a) {
      auto truth = [&](std::size_t slot) {
        bool b = (a >> slot) & 1u;
        return lits[slot].negated ? !b : b;
      };
      bool conds_hold = true;
      for (std::size_t slot = 0; slot < N; ++slot)
        if (is_cond_slot[slot]) conds_hold = conds_hold && truth(slot);
      bool val = connective == '&';
      for (std::size_t slot = 0; slot < N; ++slot) {
        if (is_cond_slot[slot]) continue;
        bool pair_val = !conds_hold || truth(slot);
        val = connective == '&' ? (val && pair_val) : (val || pair_val);
      }
      target_ok[a] = val;
    }
  }
  auto matches = [&](const std::vector<ClusterCfg>& candidate) {
    std::size_t rows = std::size_t{1} << N;
    for (std::size_t a = 0; a < rows; ++a)
      if (eval_fold(pairs, candidate, static_cast<std::uint32_t>(a), N) != (target_ok[a] != 0))
        return false;
    return true;
  };

  if (!matches(cfg)) {
    // bounded repair: vary junk-cluster contents and links plus the link of
    // the cluster following each junk run
    std::vector<std::size_t> junk_idx;
    std::vector<std::size_t> link_idx;
    for (std::size_t c = 0; c < C; ++c) {
      if (junk[c]) {
        junk_idx.push_back(c);
        if (c + 1 < C && !junk[c + 1]) link_idx.push_back(c + 1);
      }
    }
    bool found = false;
    std::size_t combos = 1;
    for (std::size_t i = 0; i < junk_idx.size(); ++i) combos *= 16;
    std::size_t link_combos = std::size_t{1} << link_idx.size();
    for (std::size_t lc = 0; lc < link_combos && !found; ++lc) {
      for (std::size_t code = 0; code < combos && !found; ++code) {
        std::vector<ClusterCfg> cand = cfg;
        for (std::size_t li = 0; li < link_idx.size(); ++li)
          cand[link_idx[li]].link_and = ((lc >> li) & 1u) == 0;
        std::size_t rem = code;
        for (auto c : junk_idx) {
          std::size_t bits = rem & 15;
          rem >>= 4;
          cand[c].sa = (bits & 1) ? -1 : 1;
          cand[c].sb = (bits & 2) ? -1 : 1;
          cand[c].op_and = (bits & 4) != 0;
          cand[c].link_and = (bits & 8) != 0;
        }
        if (matches(cand)) {
          cfg = std::move(cand);
          found = true;
        }
      }
    }
    if (!found)
      throw CapacityError("theorem1_construct: no gate assignment reproduces the target on this grid");
  }

  for (std::size_t c = 0; c < C; ++c) {
    s.neg_w(c, 0) = cfg[c].sa * kNegSat;
    s.neg_w(c, 1) = cfg[c].sb * kNegSat;
    saturate_gate(&s.cluster_op[c * 2], 2, cfg[c].op_and ? 0 : 1);
    if (c > 0) saturate_gate(&s.agg_op[(c - 1) * 2], 2, cfg[c].link_and ? 0 : 1);
  }
  return s;
}

} // namespace tlr
