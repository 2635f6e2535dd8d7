#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cla/connective.hpp"
#include "cla/error.hpp"
#include "cla/formula.hpp"
#include "cla/pattern.hpp"

namespace cla {

// Generator of variable names unused so far.
class NameSupply {
 public:
  NameSupply() = default;
  explicit NameSupply(const std::set<std::string>& used) : used_(used) {}

  void reserve(const std::string& name) { used_.insert(name); }
  bool used(const std::string& name) const { return used_.count(name) != 0; }

  std::string fresh(const std::string& base) {
    if (!used(base)) {
      used_.insert(base);
      return base;
    }
    for (std::size_t i = 1;; ++i) {
      std::string candidate = base + "_" + std::to_string(i);
      if (!used(candidate)) {
        used_.insert(candidate);
        return candidate;
      }
    }
  }

 private:
  std::set<std::string> used_;
};

// Every variable name occurring in f, free or bound.
inline void collect_names(const Formula& f, std::set<std::string>& out) {
  if (f.is_eq()) {
    out.insert(f.as_eq().lhs);
    out.insert(f.as_eq().rhs);
  } else if (f.is_atom()) {
    out.insert(f.as_atom().args.begin(), f.as_atom().args.end());
  } else if (f.is_conn()) {
    for (const auto& a : f.as_conn().args) collect_names(a, out);
  } else if (f.is_agg()) {
    out.insert(f.as_agg().bound);
    collect_names(f.as_agg().body, out);
  }
}

// Replaces free occurrences of `from` by `to`. Binders equal to `to` are
// renamed first so `to` is never captured.
inline Formula substitute(const Formula& f, const Variable& from, const Variable& to, NameSupply& names) {
  auto swap = [&](const Variable& v) { return v == from ? to : v; };
  if (f.is_const()) return f;
  if (f.is_eq()) return Formula::eq(swap(f.as_eq().lhs), swap(f.as_eq().rhs));
  if (f.is_atom()) {
    std::vector<Variable> args;
    for (const auto& v : f.as_atom().args) args.push_back(swap(v));
    return Formula::atom(f.as_atom().relation, std::move(args));
  }
  if (f.is_conn()) {
    std::vector<Formula> args;
    for (const auto& a : f.as_conn().args) args.push_back(substitute(a, from, to, names));
    return Formula::conn(f.as_conn().connective, std::move(args));
  }
  const auto& g = f.as_agg();
  if (g.bound == from) return f;
  if (g.bound == to && free_vars(g.body).count(from)) {
    const Variable renamed = names.fresh(g.bound);
    Formula body = substitute(g.body, g.bound, renamed, names);
    return Formula::agg(g.aggregator, renamed, substitute(body, from, to, names));
  }
  return Formula::agg(g.aggregator, g.bound, substitute(g.body, from, to, names));
}

inline Formula substitute(const Formula& f, const Variable& from, const Variable& to) {
  std::set<std::string> used;
  collect_names(f, used);
  used.insert(to);
  NameSupply names(used);
  return substitute(f, from, to, names);
}

// Gives every aggregation node a fresh bound variable.
inline Formula refresh_binders(const Formula& f, NameSupply& names) {
  if (f.is_conn()) {
    std::vector<Formula> args;
    for (const auto& a : f.as_conn().args) args.push_back(refresh_binders(a, names));
    return Formula::conn(f.as_conn().connective, std::move(args));
  }
  if (!f.is_agg()) return f;
  const auto& g = f.as_agg();
  const Variable renamed = names.fresh(g.bound);
  Formula body = refresh_binders(substitute(g.body, g.bound, renamed, names), names);
  return Formula::agg(g.aggregator, renamed, std::move(body));
}

enum class Quantifier { Exists, Forall };

// First-order quantifier as an aggregation. Aggregation ranges only over
// elements outside the ambient tuple, so the ambient variables are added
// back as explicit instances:
//   exists y. phi  ==  max_{k+1}(phi[y:=x_1], ..., phi[y:=x_k], max{y}(phi))
// and dually with min for forall. With no ambient variables the result is
// the bare aggregation. Copies get fresh binders.
inline Formula expand_fo_quantifier(Quantifier kind, const Variable& var, const Formula& body,
                                    const std::vector<Variable>& ambient, NameSupply& names) {
  const Aggregator agg = kind == Quantifier::Exists ? Aggregator::max() : Aggregator::min();
  Formula aggregated = Formula::agg(agg, var, body);
  if (ambient.empty()) return aggregated;
  std::vector<Formula> parts;
  for (const auto& x : ambient) parts.push_back(refresh_binders(substitute(body, var, x, names), names));
  parts.push_back(std::move(aggregated));
  const std::string name = (kind == Quantifier::Exists ? "max" : "min") + std::to_string(parts.size());
  return Formula::conn(builtin(name), std::move(parts));
}

// Ambient variables default to the free variables of the body other than var.
inline Formula expand_fo_quantifier(Quantifier kind, const Variable& var, const Formula& body) {
  std::vector<Variable> ambient;
  for (const auto& v : free_vars_ordered(body))
    if (v != var) ambient.push_back(v);
  std::set<std::string> used;
  collect_names(body, used);
  NameSupply names(used);
  return expand_fo_quantifier(kind, var, body, ambient, names);
}

namespace detail {

// Builds one expression over a deduplicated list of atomic subformulas.
class FlatBuilder {
 public:
  std::vector<Formula> atoms;

  ExprPtr build(const Formula& f) {
    if (f.is_const()) return Expr::constant(f.as_const().value);
    if (f.is_eq() || f.is_atom()) return Expr::arg(index_of(f));
    if (f.is_conn()) {
      const auto& c = f.as_conn();
      std::vector<ExprPtr> kids;
      kids.reserve(c.args.size());
      for (const auto& a : c.args) kids.push_back(build(a));
      return substitute_args(c.connective.clamped_root(), kids);
    }
    throw ValidationError("formula contains an aggregation: " + to_string(f));
  }

 private:
  std::size_t index_of(const Formula& f) {
    for (std::size_t i = 0; i < atoms.size(); ++i)
      if (same_formula(atoms[i], f)) return i;
    atoms.push_back(f);
    return atoms.size() - 1;
  }
};

inline std::string connective_label(const Formula& f) {
  if (f.is_conn()) return "flat<" + f.as_conn().connective.name() + ">";
  return "identity";
}

}  // namespace detail

// One connective applied to pairwise distinct atomic subformulas (equalities
// and relation atoms), equivalent to f. Nested connectives are composed into
// a single expression; repeated atoms are merged by sharing an argument.
// A formula without atoms becomes a constant.
inline Formula flatten(const Formula& f) {
  detail::FlatBuilder b;
  ExprPtr expr = b.build(f);
  if (b.atoms.empty()) return Formula::constant(Connective(0, expr, "const")({}));
  Connective c(b.atoms.size(), std::move(expr), detail::connective_label(f));
  return Formula::conn(std::move(c), std::move(b.atoms));
}

// A relation atom whose arguments are given as 1-based positions of the
// declared variable tuple.
struct AtomRef {
  std::string relation;
  std::vector<std::size_t> positions;
  friend bool operator==(const AtomRef&, const AtomRef&) = default;
};

// Either a constant, or C(R_1(x̄_1), ..., R_m(x̄_m)) with pairwise distinct
// atoms and no equalities or constants left as arguments.
struct NormalizedFormula {
  bool constant = true;
  double value = 0.0;        // when constant
  Connective connective;     // arity == atoms.size() otherwise
  std::vector<AtomRef> atoms;

  static NormalizedFormula make_constant(double v) {
    NormalizedFormula n;
    n.constant = true;
    n.value = v;
    return n;
  }

  // Formula over the declared variable tuple.
  Formula to_formula(const std::vector<Variable>& vars) const {
    if (constant) return Formula::constant(value);
    std::vector<Formula> args;
    for (const auto& a : atoms) {
      std::vector<Variable> names;
      for (std::size_t p : a.positions) names.push_back(vars.at(p - 1));
      args.push_back(Formula::atom(a.relation, std::move(names)));
    }
    return Formula::conn(connective, std::move(args));
  }
};

inline std::size_t position_of(const std::vector<Variable>& vars, const Variable& v) {
  auto it = std::find(vars.begin(), vars.end(), v);
  if (it == vars.end()) throw ValidationError("variable '" + v + "' is not in the declared tuple");
  return static_cast<std::size_t>(it - vars.begin());
}

// Resolves equalities under the pattern, absorbs constants, and merges atoms
// that denote the same cell for every tuple satisfying the pattern (each
// argument is replaced by the first variable of its block).
inline NormalizedFormula normalize_under(const Formula& f, const IdentityPattern& p, const std::vector<Variable>& vars) {
  if (vars.size() != p.size())
    throw ValidationError("normalize_under: pattern has size " + std::to_string(p.size()) + " but the tuple has " +
                          std::to_string(vars.size()) + " variables");
  for (std::size_t i = 0; i < vars.size(); ++i)
    for (std::size_t j = i + 1; j < vars.size(); ++j)
      if (vars[i] == vars[j]) throw ValidationError("normalize_under: repeated variable '" + vars[i] + "' in tuple");

  std::vector<AtomRef> atoms;
  auto build = [&](auto&& self, const Formula& g) -> ExprPtr {
    if (g.is_const()) return Expr::constant(g.as_const().value);
    if (g.is_eq()) {
      const bool equal = p.same_block(position_of(vars, g.as_eq().lhs), position_of(vars, g.as_eq().rhs));
      return Expr::constant(equal ? 1.0 : 0.0);
    }
    if (g.is_atom()) {
      AtomRef ref{g.as_atom().relation, {}};
      for (const auto& v : g.as_atom().args) ref.positions.push_back(p.representative(position_of(vars, v)) + 1);
      auto it = std::find(atoms.begin(), atoms.end(), ref);
      if (it != atoms.end()) return Expr::arg(static_cast<std::size_t>(it - atoms.begin()));
      atoms.push_back(std::move(ref));
      return Expr::arg(atoms.size() - 1);
    }
    if (g.is_conn()) {
      std::vector<ExprPtr> kids;
      for (const auto& a : g.as_conn().args) kids.push_back(self(self, a));
      return substitute_args(g.as_conn().connective.clamped_root(), kids);
    }
    throw ValidationError("formula contains an aggregation: " + to_string(g));
  };
  ExprPtr expr = build(build, f);
  if (atoms.empty()) return NormalizedFormula::make_constant(Connective(0, expr, "const")({}));
  NormalizedFormula out;
  out.constant = false;
  out.connective = Connective(atoms.size(), std::move(expr), detail::connective_label(f));
  out.atoms = std::move(atoms);
  return out;
}

}  // namespace cla
