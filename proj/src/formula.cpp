#include "tlr/formula.hpp"

#include "tlr/errors.hpp"

#include <cctype>
#include <unordered_set>

namespace tlr {

namespace {
FormulaPtr node(Formula::Kind k, std::string atom, FormulaPtr l, FormulaPtr r) {
  auto f = std::make_shared<Formula>();
  f->kind = k;
  f->atom = std::move(atom);
  f->left = std::move(l);
  f->right = std::move(r);
  return f;
}
} // namespace

FormulaPtr make_atom(std::string id) { return node(Formula::Kind::Atom, std::move(id), nullptr, nullptr); }
FormulaPtr make_g(FormulaPtr f) { return node(Formula::Kind::G, {}, std::move(f), nullptr); }
FormulaPtr make_f(FormulaPtr f) { return node(Formula::Kind::F, {}, std::move(f), nullptr); }
FormulaPtr make_not(FormulaPtr f) { return node(Formula::Kind::Not, {}, std::move(f), nullptr); }
FormulaPtr make_and(FormulaPtr a, FormulaPtr b) { return node(Formula::Kind::And, {}, std::move(a), std::move(b)); }
FormulaPtr make_or(FormulaPtr a, FormulaPtr b) { return node(Formula::Kind::Or, {}, std::move(a), std::move(b)); }

bool structurally_equal(const FormulaPtr& a, const FormulaPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind || a->atom != b->atom) return false;
  return structurally_equal(a->left, b->left) && structurally_equal(a->right, b->right);
}

namespace {
void collect(const FormulaPtr& f, std::vector<std::string>& out, std::unordered_set<std::string>& seen) {
  if (!f) return;
  if (f->kind == Formula::Kind::Atom) {
    if (seen.insert(f->atom).second) out.push_back(f->atom);
    return;
  }
  collect(f->left, out, seen);
  collect(f->right, out, seen);
}
} // namespace

std::vector<std::string> collect_atoms(const FormulaPtr& f) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  collect(f, out, seen);
  return out;
}

std::string format_formula(const FormulaPtr& f) {
  if (!f) return "";
  switch (f->kind) {
    case Formula::Kind::Atom:
      return f->atom;
    case Formula::Kind::G:
      return "G " + format_formula(f->left);
    case Formula::Kind::F:
      return "F " + format_formula(f->left);
    case Formula::Kind::Not:
      return "!" + format_formula(f->left);
    case Formula::Kind::And:
      return "(" + format_formula(f->left) + " & " + format_formula(f->right) + ")";
    case Formula::Kind::Or:
      return "(" + format_formula(f->left) + " | " + format_formula(f->right) + ")";
  }
  return "";
}

namespace {

struct Lexer {
  const std::string& s;
  std::size_t pos = 0;

  void skip_ws() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }
  char peek() {
    skip_ws();
    return pos < s.size() ? s[pos] : '\0';
  }
  bool eat(char c) {
    skip_ws();
    if (pos < s.size() && s[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  std::string ident() {
    skip_ws();
    std::size_t start = pos;
    while (pos < s.size() &&
           (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_'))
      ++pos;
    return s.substr(start, pos - start);
  }
};

struct Parser {
  Lexer lex;
  const std::function<bool(const std::string&)>& validate;

  [[noreturn]] void fail(const std::string& msg) {
    throw ParseError("formula: " + msg + " at position " + std::to_string(lex.pos));
  }

  FormulaPtr parse_or() {
    FormulaPtr f = parse_and();
    while (lex.peek() == '|') {
      lex.eat('|');
      f = make_or(f, parse_and());
    }
    return f;
  }

  FormulaPtr parse_and() {
    FormulaPtr f = parse_unary();
    while (lex.peek() == '&') {
      lex.eat('&');
      f = make_and(f, parse_unary());
    }
    return f;
  }

  FormulaPtr parse_unary() {
    char c = lex.peek();
    if (c == '!') {
      lex.eat('!');
      return make_not(parse_unary());
    }
    if (c == '(') {
      lex.eat('(');
      FormulaPtr f = parse_or();
      if (!lex.eat(')')) fail("expected ')'");
      return f;
    }
    std::string id = lex.ident();
    if (id.empty()) fail("expected atom or '('");
    if (id == "G") return make_g(parse_unary());
    if (id == "F") return make_f(parse_unary());
    if (validate && !validate(id)) fail("unknown predicate '" + id + "'");
    return make_atom(std::move(id));
  }
};

} // namespace

FormulaPtr parse_formula(const std::string& text,
                         const std::function<bool(const std::string&)>& validate) {
  Parser p{Lexer{text}, validate};
  FormulaPtr f = p.parse_or();
  p.lex.skip_ws();
  if (p.lex.pos != text.size()) p.fail("trailing input");
  return f;
}

} // namespace tlr
