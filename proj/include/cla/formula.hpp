#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "cla/aggregator.hpp"
#include "cla/connective.hpp"
#include "cla/error.hpp"
#include "cla/signature.hpp"

namespace cla {

using Variable = std::string;

class Formula;

namespace node {
struct Const {
  double value;
};
struct Eq {
  Variable lhs, rhs;
};
struct Atom {
  std::string relation;
  std::vector<Variable> args;
};
struct Conn;
struct Agg;
}  // namespace node

// Immutable CLA formula. Cheap to copy (shared node).
class Formula {
 public:
  struct Node;

  static Formula constant(double c);
  static Formula eq(Variable lhs, Variable rhs);
  static Formula atom(std::string relation, std::vector<Variable> args);
  static Formula conn(Connective c, std::vector<Formula> args);
  static Formula agg(Aggregator a, Variable bound, Formula body);

  bool is_const() const;
  bool is_eq() const;
  bool is_atom() const;
  bool is_conn() const;
  bool is_agg() const;

  const node::Const& as_const() const;
  const node::Eq& as_eq() const;
  const node::Atom& as_atom() const;
  const node::Conn& as_conn() const;
  const node::Agg& as_agg() const;

  const Node* get() const { return node_.get(); }

 private:
  explicit Formula(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

namespace node {
struct Conn {
  Connective connective;
  std::vector<Formula> args;
};
struct Agg {
  Aggregator aggregator;
  Variable bound;
  Formula body;
};
}  // namespace node

struct Formula::Node {
  std::variant<node::Const, node::Eq, node::Atom, node::Conn, node::Agg> data;
};

inline Formula Formula::constant(double c) {
  if (!(c >= 0.0 && c <= 1.0)) throw ValidationError("constant " + std::to_string(c) + " outside [0,1]");
  return Formula(std::make_shared<const Node>(Node{node::Const{c}}));
}
inline Formula Formula::eq(Variable lhs, Variable rhs) {
  return Formula(std::make_shared<const Node>(Node{node::Eq{std::move(lhs), std::move(rhs)}}));
}
inline Formula Formula::atom(std::string relation, std::vector<Variable> args) {
  if (args.empty()) throw ValidationError("atom " + relation + " needs at least one argument");
  return Formula(std::make_shared<const Node>(Node{node::Atom{std::move(relation), std::move(args)}}));
}
inline Formula Formula::conn(Connective c, std::vector<Formula> args) {
  if (c.arity() != args.size())
    throw ValidationError("connective " + c.name() + " has arity " + std::to_string(c.arity()) + " but got " +
                          std::to_string(args.size()) + " arguments");
  return Formula(std::make_shared<const Node>(Node{node::Conn{std::move(c), std::move(args)}}));
}
inline Formula Formula::agg(Aggregator a, Variable bound, Formula body) {
  return Formula(std::make_shared<const Node>(Node{node::Agg{std::move(a), std::move(bound), std::move(body)}}));
}

inline bool Formula::is_const() const { return std::holds_alternative<node::Const>(node_->data); }
inline bool Formula::is_eq() const { return std::holds_alternative<node::Eq>(node_->data); }
inline bool Formula::is_atom() const { return std::holds_alternative<node::Atom>(node_->data); }
inline bool Formula::is_conn() const { return std::holds_alternative<node::Conn>(node_->data); }
inline bool Formula::is_agg() const { return std::holds_alternative<node::Agg>(node_->data); }
inline const node::Const& Formula::as_const() const { return std::get<node::Const>(node_->data); }
inline const node::Eq& Formula::as_eq() const { return std::get<node::Eq>(node_->data); }
inline const node::Atom& Formula::as_atom() const { return std::get<node::Atom>(node_->data); }
inline const node::Conn& Formula::as_conn() const { return std::get<node::Conn>(node_->data); }
inline const node::Agg& Formula::as_agg() const { return std::get<node::Agg>(node_->data); }

// Free variables: aggregation removes its bound variable.
inline std::set<Variable> free_vars(const Formula& f) {
  if (f.is_const()) return {};
  if (f.is_eq()) return {f.as_eq().lhs, f.as_eq().rhs};
  if (f.is_atom()) return {f.as_atom().args.begin(), f.as_atom().args.end()};
  if (f.is_conn()) {
    std::set<Variable> out;
    for (const auto& a : f.as_conn().args) {
      auto s = free_vars(a);
      out.insert(s.begin(), s.end());
    }
    return out;
  }
  auto s = free_vars(f.as_agg().body);
  s.erase(f.as_agg().bound);
  return s;
}

// Free variables in order of first occurrence (left to right).
inline std::vector<Variable> free_vars_ordered(const Formula& f) {
  std::vector<Variable> out;
  auto add = [&](const Variable& v, const std::vector<Variable>& bound) {
    if (std::find(bound.begin(), bound.end(), v) != bound.end()) return;
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  };
  auto walk = [&](auto&& self, const Formula& g, std::vector<Variable>& bound) -> void {
    if (g.is_eq()) {
      add(g.as_eq().lhs, bound);
      add(g.as_eq().rhs, bound);
    } else if (g.is_atom()) {
      for (const auto& v : g.as_atom().args) add(v, bound);
    } else if (g.is_conn()) {
      for (const auto& a : g.as_conn().args) self(self, a, bound);
    } else if (g.is_agg()) {
      bound.push_back(g.as_agg().bound);
      self(self, g.as_agg().body, bound);
      bound.pop_back();
    }
  };
  std::vector<Variable> bound;
  walk(walk, f, bound);
  return out;
}

inline bool aggregation_free(const Formula& f) {
  if (f.is_agg()) return false;
  if (f.is_conn())
    return std::all_of(f.as_conn().args.begin(), f.as_conn().args.end(), [](const Formula& a) { return aggregation_free(a); });
  return true;
}

inline std::size_t aggregation_count(const Formula& f) {
  if (f.is_agg()) return 1 + aggregation_count(f.as_agg().body);
  if (f.is_conn()) {
    std::size_t n = 0;
    for (const auto& a : f.as_conn().args) n += aggregation_count(a);
    return n;
  }
  return 0;
}

// Atoms match the signature; connective arities are enforced at construction.
inline void validate(const Formula& f, const Signature& sig) {
  if (f.is_atom()) {
    const auto& a = f.as_atom();
    const std::size_t arity = sig.arity(a.relation);
    if (arity != a.args.size())
      throw ValidationError("relation " + a.relation + " has arity " + std::to_string(arity) + " but is applied to " +
                            std::to_string(a.args.size()) + " arguments");
  } else if (f.is_conn()) {
    for (const auto& a : f.as_conn().args) validate(a, sig);
  } else if (f.is_agg()) {
    validate(f.as_agg().body, sig);
  }
}

// Structural equality; connectives compare by identity of their expression.
inline bool same_formula(const Formula& a, const Formula& b) {
  if (a.get() == b.get()) return true;
  if (a.is_const() && b.is_const()) return a.as_const().value == b.as_const().value;
  if (a.is_eq() && b.is_eq()) return a.as_eq().lhs == b.as_eq().lhs && a.as_eq().rhs == b.as_eq().rhs;
  if (a.is_atom() && b.is_atom()) return a.as_atom().relation == b.as_atom().relation && a.as_atom().args == b.as_atom().args;
  if (a.is_conn() && b.is_conn()) {
    const auto& x = a.as_conn();
    const auto& y = b.as_conn();
    if (x.connective.root() != y.connective.root() || x.args.size() != y.args.size()) return false;
    for (std::size_t i = 0; i < x.args.size(); ++i)
      if (!same_formula(x.args[i], y.args[i])) return false;
    return true;
  }
  if (a.is_agg() && b.is_agg())
    return a.as_agg().aggregator == b.as_agg().aggregator && a.as_agg().bound == b.as_agg().bound &&
           same_formula(a.as_agg().body, b.as_agg().body);
  return false;
}

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  // Prefer the shortest representation that round-trips.
  for (int prec = 1; prec < 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  return s;
}

// DSL rendering. Composed and tabulated connectives print under their name
// and are not re-parseable.
inline std::string to_string(const Formula& f) {
  if (f.is_const()) return format_number(f.as_const().value);
  if (f.is_eq()) return f.as_eq().lhs + " = " + f.as_eq().rhs;
  if (f.is_atom()) {
    std::string s = f.as_atom().relation + "(";
    for (std::size_t i = 0; i < f.as_atom().args.size(); ++i) s += (i ? "," : "") + f.as_atom().args[i];
    return s + ")";
  }
  if (f.is_conn()) {
    std::string s = f.as_conn().connective.name() + "(";
    for (std::size_t i = 0; i < f.as_conn().args.size(); ++i) s += (i ? ", " : "") + to_string(f.as_conn().args[i]);
    return s + ")";
  }
  return f.as_agg().aggregator.name() + "{" + f.as_agg().bound + "}(" + to_string(f.as_agg().body) + ")";
}

}  // namespace cla
