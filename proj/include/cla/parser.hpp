#pragma once

#include <cctype>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cla/aggregator.hpp"
#include "cla/connective.hpp"
#include "cla/error.hpp"
#include "cla/formula.hpp"
#include "cla/normalize.hpp"
#include "cla/signature.hpp"

namespace cla {

// Result of parsing: the formula with every aggregation bound to a fresh
// variable, the declared free-variable tuple, and the signature used (the
// given one, or one inferred from the atoms when none was given).
struct ParsedFormula {
  Formula formula = Formula::constant(0.0);
  std::vector<Variable> vars;
  Signature signature;
};

namespace detail {

struct Token {
  enum Kind { Ident, Number, Punct, End } kind = End;
  std::string text;
  std::size_t offset = 0;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    std::size_t i = 0;
    while (true) {
      while (i < src_.size() && std::isspace(static_cast<unsigned char>(src_[i]))) ++i;
      if (i >= src_.size()) break;
      const char c = src_[i];
      const bool digit_next = i + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i + 1]));
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t j = i;
        while (j < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[j])) || src_[j] == '_')) ++j;
        out.push_back({Token::Ident, std::string(src_.substr(i, j - i)), i});
        i = j;
      } else if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && digit_next)) {
        std::size_t j = i;
        while (j < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[j])) || src_[j] == '.')) ++j;
        if (j < src_.size() && (src_[j] == 'e' || src_[j] == 'E')) {
          std::size_t k = j + 1;
          if (k < src_.size() && (src_[k] == '-' || src_[k] == '+')) ++k;
          if (k < src_.size() && std::isdigit(static_cast<unsigned char>(src_[k]))) {
            j = k;
            while (j < src_.size() && std::isdigit(static_cast<unsigned char>(src_[j]))) ++j;
          }
        }
        out.push_back({Token::Number, std::string(src_.substr(i, j - i)), i});
        i = j;
      } else if (std::string_view("(){},=.").find(c) != std::string_view::npos) {
        out.push_back({Token::Punct, std::string(1, c), i});
        ++i;
      } else {
        throw ValidationError("formula: unexpected character '" + std::string(1, c) + "' at offset " +
                              std::to_string(i));
      }
    }
    out.push_back({Token::End, "", src_.size()});
    return out;
  }

 private:
  std::string_view src_;
};

// Syntax tree before name resolution.
struct Raw {
  enum Kind { Number, Equality, Apply, Aggregate, Quantified, Var } kind = Number;
  double value = 0.0;
  std::string name;                 // head of Apply / Aggregate, variable for Var, quantifier keyword
  std::string bound;                // Aggregate and Quantified
  std::vector<std::string> vars;    // Equality sides
  std::vector<Raw> kids;
  std::size_t offset = 0;
};

class RawParser {
 public:
  explicit RawParser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  Raw parse_all() {
    Raw r = formula();
    if (peek().kind != Token::End) fail("unexpected '" + peek().text + "'");
    return r;
  }

 private:
  const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  Token next() { return toks_[std::min(pos_++, toks_.size() - 1)]; }
  bool is_punct(const Token& t, char c) const { return t.kind == Token::Punct && t.text[0] == c; }
  [[noreturn]] void fail(const std::string& msg) const {
    throw ValidationError("formula: " + msg + " at offset " + std::to_string(peek().offset));
  }
  void expect(char c) {
    if (!is_punct(peek(), c)) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  std::string ident() {
    if (peek().kind != Token::Ident) fail("expected identifier");
    return next().text;
  }

  Raw formula() {
    const Token& t = peek();
    Raw r;
    r.offset = t.offset;
    if (t.kind == Token::Number) {
      r.kind = Raw::Number;
      char* end = nullptr;
      r.value = std::strtod(t.text.c_str(), &end);
      if (end != t.text.c_str() + t.text.size()) fail("malformed number '" + t.text + "'");
      if (!(r.value >= 0.0 && r.value <= 1.0)) fail("constant " + t.text + " outside [0,1]");
      ++pos_;
      return r;
    }
    if (is_punct(t, '(')) {
      ++pos_;
      Raw inner = formula();
      expect(')');
      return inner;
    }
    if (t.kind != Token::Ident) fail("expected a formula");
    if ((t.text == "exists" || t.text == "forall") && peek(1).kind == Token::Ident && is_punct(peek(2), '.')) {
      r.kind = Raw::Quantified;
      r.name = next().text;
      r.bound = ident();
      expect('.');
      r.kids.push_back(formula());
      return r;
    }
    const std::string head = next().text;
    if (is_punct(peek(), '=')) {
      ++pos_;
      r.kind = Raw::Equality;
      r.vars = {head, ident()};
      return r;
    }
    if (is_punct(peek(), '{')) {
      ++pos_;
      r.kind = Raw::Aggregate;
      r.name = head;
      r.bound = ident();
      expect('}');
      expect('(');
      r.kids.push_back(formula());
      expect(')');
      return r;
    }
    if (is_punct(peek(), '(')) {
      ++pos_;
      r.kind = Raw::Apply;
      r.name = head;
      if (!is_punct(peek(), ')')) {
        while (true) {
          r.kids.push_back(item());
          if (is_punct(peek(), ',')) {
            ++pos_;
            continue;
          }
          break;
        }
      }
      expect(')');
      return r;
    }
    fail("identifier '" + head + "' must be followed by '=', '(' or '{'");
  }

  // An argument: a bare variable or a formula.
  Raw item() {
    if (peek().kind == Token::Ident && (is_punct(peek(1), ',') || is_punct(peek(1), ')'))) {
      Raw v;
      v.kind = Raw::Var;
      v.offset = peek().offset;
      v.name = next().text;
      return v;
    }
    return formula();
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

inline std::optional<Connective> resolve_connective(const std::string& name, std::size_t argc) {
  if (auto c = find_builtin(name)) return c;
  if (name == "min" || name == "max" || name == "avg") return find_builtin(name + std::to_string(argc));
  return std::nullopt;
}

class Elaborator {
 public:
  Elaborator(const Signature* given) : given_(given) {}

  Signature inferred;

  void scan_atoms(const Raw& r) {
    if (r.kind == Raw::Apply && is_atom(r)) {
      if (!given_) inferred.add({r.name, r.kids.size()});
    }
    for (const auto& k : r.kids) scan_atoms(k);
  }

  bool is_atom(const Raw& r) const {
    if (given_) {
      if (given_->find(r.name)) return true;
      return false;
    }
    if (r.name == "const" || resolve_connective(r.name, r.kids.size())) return false;
    return std::all_of(r.kids.begin(), r.kids.end(), [](const Raw& k) { return k.kind == Raw::Var; });
  }

  // Free variables in order of first occurrence.
  void free_vars(const Raw& r, std::vector<std::string>& bound, std::vector<std::string>& out) const {
    auto add = [&](const std::string& v) {
      if (std::find(bound.begin(), bound.end(), v) != bound.end()) return;
      if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    };
    switch (r.kind) {
      case Raw::Var: add(r.name); break;
      case Raw::Equality:
        add(r.vars[0]);
        add(r.vars[1]);
        break;
      case Raw::Aggregate:
      case Raw::Quantified:
        bound.push_back(r.bound);
        free_vars(r.kids[0], bound, out);
        bound.pop_back();
        break;
      default:
        for (const auto& k : r.kids) free_vars(k, bound, out);
    }
  }

  void collect_identifiers(const Raw& r, std::set<std::string>& out) const {
    if (r.kind == Raw::Var) out.insert(r.name);
    for (const auto& v : r.vars) out.insert(v);
    if (!r.bound.empty()) out.insert(r.bound);
    for (const auto& k : r.kids) collect_identifiers(k, out);
  }

  Formula elaborate(const Raw& r, std::map<std::string, std::string>& rename, std::vector<Variable>& ambient,
                    NameSupply& names) {
    auto var = [&](const std::string& v) {
      auto it = rename.find(v);
      return it == rename.end() ? v : it->second;
    };
    switch (r.kind) {
      case Raw::Number: return Formula::constant(r.value);
      case Raw::Equality: return Formula::eq(var(r.vars[0]), var(r.vars[1]));
      case Raw::Var:
        throw ValidationError("formula: bare variable '" + r.name + "' at offset " + std::to_string(r.offset) +
                              " is not a formula");
      case Raw::Apply: {
        if (r.name == "const" && !is_atom(r)) {
          if (r.kids.size() != 1 || r.kids[0].kind != Raw::Number)
            throw ValidationError("formula: const(...) takes one number");
          return Formula::constant(r.kids[0].value);
        }
        if (is_atom(r)) {
          std::vector<Variable> args;
          for (const auto& k : r.kids) {
            if (k.kind != Raw::Var)
              throw ValidationError("formula: arguments of relation " + r.name + " must be variables");
            args.push_back(var(k.name));
          }
          if (given_ && given_->arity(r.name) != args.size())
            throw ValidationError("formula: relation " + r.name + " has arity " +
                                  std::to_string(given_->arity(r.name)) + " but is applied to " +
                                  std::to_string(args.size()) + " arguments");
          return Formula::atom(r.name, std::move(args));
        }
        auto c = resolve_connective(r.name, r.kids.size());
        if (!c) throw ValidationError("formula: unknown relation or connective '" + r.name + "'");
        std::vector<Formula> args;
        for (const auto& k : r.kids) args.push_back(elaborate(k, rename, ambient, names));
        return Formula::conn(*c, std::move(args));
      }
      case Raw::Aggregate: {
        auto a = find_aggregator(r.name);
        if (!a) throw ValidationError("formula: unknown aggregator '" + r.name + "'");
        const Variable fresh = names.fresh(r.bound);
        Formula body = scoped(r, fresh, rename, ambient, names);
        return Formula::agg(*a, fresh, std::move(body));
      }
      case Raw::Quantified: {
        const Variable fresh = names.fresh(r.bound);
        const std::vector<Variable> outer = ambient;
        Formula body = scoped(r, fresh, rename, ambient, names);
        const auto kind = r.name == "exists" ? Quantifier::Exists : Quantifier::Forall;
        return expand_fo_quantifier(kind, fresh, body, outer, names);
      }
    }
    throw ValidationError("formula: internal error");
  }

 private:
  Formula scoped(const Raw& r, const Variable& fresh, std::map<std::string, std::string>& rename,
                 std::vector<Variable>& ambient, NameSupply& names) {
    std::optional<std::string> saved;
    if (auto it = rename.find(r.bound); it != rename.end()) saved = it->second;
    rename[r.bound] = fresh;
    ambient.push_back(fresh);
    Formula body = elaborate(r.kids[0], rename, ambient, names);
    ambient.pop_back();
    if (saved) rename[r.bound] = *saved;
    else rename.erase(r.bound);
    return body;
  }

  const Signature* given_;
};

}  // namespace detail

// Parses the formula DSL:
//   formula := NUMBER | VAR "=" VAR | REL "(" vars ")" | CONN "(" formulas ")"
//            | AGG "{" VAR "}" "(" formula ")" | ("exists"|"forall") VAR "." formula
//            | "const" "(" NUMBER ")" | "(" formula ")"
// Bound variables are renamed apart. `declared` fixes the free-variable
// tuple; otherwise free variables are taken in order of first occurrence.
inline ParsedFormula parse_formula(std::string_view text, const Signature* signature = nullptr,
                                   const std::optional<std::vector<Variable>>& declared = std::nullopt) {
  detail::RawParser rp(detail::Lexer(text).run());
  const detail::Raw raw = rp.parse_all();
  detail::Elaborator el(signature);

  std::vector<std::string> bound;
  std::vector<Variable> free;
  el.free_vars(raw, bound, free);
  std::vector<Variable> vars = declared ? *declared : free;
  for (const auto& v : free)
    if (std::find(vars.begin(), vars.end(), v) == vars.end())
      throw ValidationError("formula: free variable '" + v + "' is not in the declared tuple");
  for (std::size_t i = 0; i < vars.size(); ++i)
    for (std::size_t j = i + 1; j < vars.size(); ++j)
      if (vars[i] == vars[j]) throw ValidationError("formula: variable '" + vars[i] + "' declared twice");

  std::set<std::string> identifiers;
  el.collect_identifiers(raw, identifiers);
  std::set<std::string> reserved(vars.begin(), vars.end());
  for (const auto& id : identifiers)
    if (std::find(vars.begin(), vars.end(), id) != vars.end()) reserved.insert(id);
  // Names that occur free are reserved; binders take fresh names around them.
  NameSupply names(reserved);

  el.scan_atoms(raw);
  std::map<std::string, std::string> rename;
  std::vector<Variable> ambient = vars;
  Formula f = el.elaborate(raw, rename, ambient, names);

  ParsedFormula out{f, vars, signature ? *signature : el.inferred};
  if (!signature && out.signature.empty()) {
    // Sentences without atoms still need a signature for structure sampling.
    out.signature.add({"R", 1});
  }
  if (signature) validate(f, *signature);
  return out;
}

inline ParsedFormula parse_formula(std::string_view text, const Signature& signature,
                                   const std::optional<std::vector<Variable>>& declared = std::nullopt) {
  return parse_formula(text, &signature, declared);
}

}  // namespace cla
