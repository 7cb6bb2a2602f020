#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace tlr {

/// Immutable formula tree over named atoms: G/F temporal operators plus
/// negation, conjunction, disjunction.
struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

struct Formula {
  enum class Kind { Atom, G, F, Not, And, Or };

  Kind kind = Kind::Atom;
  std::string atom;   // Kind::Atom only
  FormulaPtr left;    // unary child / binary lhs
  FormulaPtr right;   // binary rhs
};

FormulaPtr make_atom(std::string id);
FormulaPtr make_g(FormulaPtr f);
FormulaPtr make_f(FormulaPtr f);
FormulaPtr make_not(FormulaPtr f);
FormulaPtr make_and(FormulaPtr a, FormulaPtr b);
FormulaPtr make_or(FormulaPtr a, FormulaPtr b);

bool structurally_equal(const FormulaPtr& a, const FormulaPtr& b);

/// Atom ids referenced by the formula, deduplicated, in first-occurrence order.
std::vector<std::string> collect_atoms(const FormulaPtr& f);

/// Canonical text: `!` `&` `|` with G/F prefixes; binary nodes parenthesized.
std::string format_formula(const FormulaPtr& f);

/// Inverse of format_formula. Grammar precedence: unary (!, G, F) over & over |.
/// `validate` (when set) must accept every atom id; unknown atoms raise ParseError.
FormulaPtr parse_formula(const std::string& text,
                         const std::function<bool(const std::string&)>& validate = nullptr);

} // namespace tlr
