#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cla/aggregator.hpp"
#include "cla/connective.hpp"
#include "cla/error.hpp"
#include "cla/formula.hpp"
#include "cla/structure.hpp"

namespace cla {

// A formula compiled against a signature and a declared variable tuple.
// Variables live in numbered slots: the declared tuple first, then one slot
// per aggregation node.
class Evaluator {
 public:
  Evaluator(const Formula& f, std::vector<Variable> vars, const Signature& sig) : vars_(std::move(vars)), sig_(sig) {
    for (std::size_t i = 0; i < vars_.size(); ++i)
      for (std::size_t j = i + 1; j < vars_.size(); ++j)
        if (vars_[i] == vars_[j]) throw ValidationError("evaluate: variable '" + vars_[i] + "' declared twice");
    std::map<Variable, std::vector<int>> scope;
    std::vector<int> ambient;
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      scope[vars_[i]].push_back(static_cast<int>(i));
      ambient.push_back(static_cast<int>(i));
    }
    slots_ = vars_.size();
    root_ = compile(f, scope, ambient);
  }

  const std::vector<Variable>& vars() const { return vars_; }

  double operator()(const ContinuousStructure& a, std::span<const Element> assignment) const {
    if (assignment.size() != vars_.size())
      throw ValidationError("evaluate: assignment has " + std::to_string(assignment.size()) + " elements, formula declares " +
                            std::to_string(vars_.size()) + " variables");
    if (a.signature().relations() != sig_.relations())
      throw ValidationError("evaluate: structure signature does not match the formula's");
    std::vector<Element> env(slots_, 0);
    for (std::size_t i = 0; i < assignment.size(); ++i) {
      if (assignment[i] < 1 || assignment[i] > a.n())
        throw ValidationError("evaluate: element " + std::to_string(assignment[i]) + " outside 1.." + std::to_string(a.n()));
      env[i] = assignment[i];
    }
    return eval(root_, a, env);
  }
  double operator()(const ContinuousStructure& a, const Tuple& assignment) const {
    return (*this)(a, std::span<const Element>(assignment));
  }

 private:
  enum class Kind { Const, Eq, Atom, Conn, Agg };
  struct Node {
    Kind kind = Kind::Const;
    double value = 0.0;
    int lhs = 0, rhs = 0;
    std::size_t relation = 0;
    std::vector<int> slots;   // atom arguments
    const Connective* conn = nullptr;
    std::vector<int> kids;
    const Aggregator* agg = nullptr;
    int bound = 0;
    std::vector<int> ambient;  // slots whose elements are excluded at an aggregation
  };

  int lookup(const std::map<Variable, std::vector<int>>& scope, const Variable& v) const {
    auto it = scope.find(v);
    if (it == scope.end() || it->second.empty())
      throw ValidationError("evaluate: free variable '" + v + "' is not in the declared tuple");
    return it->second.back();
  }

  int compile(const Formula& f, std::map<Variable, std::vector<int>>& scope, std::vector<int>& ambient) {
    Node n;
    if (f.is_const()) {
      n.value = f.as_const().value;
    } else if (f.is_eq()) {
      n.kind = Kind::Eq;
      n.lhs = lookup(scope, f.as_eq().lhs);
      n.rhs = lookup(scope, f.as_eq().rhs);
    } else if (f.is_atom()) {
      n.kind = Kind::Atom;
      n.relation = sig_.index_of(f.as_atom().relation);
      if (sig_.relations()[n.relation].arity != f.as_atom().args.size())
        throw ValidationError("evaluate: relation " + f.as_atom().relation + " applied to wrong number of arguments");
      for (const auto& v : f.as_atom().args) n.slots.push_back(lookup(scope, v));
    } else if (f.is_conn()) {
      n.kind = Kind::Conn;
      n.conn = &f.as_conn().connective;
      for (const auto& a : f.as_conn().args) n.kids.push_back(compile(a, scope, ambient));
    } else {
      const auto& g = f.as_agg();
      n.kind = Kind::Agg;
      n.agg = &g.aggregator;
      n.bound = static_cast<int>(slots_++);
      n.ambient = ambient;
      scope[g.bound].push_back(n.bound);
      ambient.push_back(n.bound);
      n.kids.push_back(compile(g.body, scope, ambient));
      ambient.pop_back();
      scope[g.bound].pop_back();
    }
    keep_.push_back(f);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size() - 1);
  }

  double eval(int id, const ContinuousStructure& a, std::vector<Element>& env) const {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    switch (node.kind) {
      case Kind::Const: return node.value;
      case Kind::Eq: return env[node.lhs] == env[node.rhs] ? 1.0 : 0.0;
      case Kind::Atom: {
        const std::size_t n = a.n();
        std::size_t off = 0;
        for (int s : node.slots) off = off * n + (env[s] - 1);
        return a.values(node.relation)[off];
      }
      case Kind::Conn: {
        const std::size_t k = node.kids.size();
        if (k <= 16) {
          double buf[16];
          for (std::size_t i = 0; i < k; ++i) buf[i] = eval(node.kids[i], a, env);
          return node.conn->eval_unchecked(std::span<const double>(buf, k));
        }
        std::vector<double> buf(k);
        for (std::size_t i = 0; i < k; ++i) buf[i] = eval(node.kids[i], a, env);
        return node.conn->eval_unchecked(buf);
      }
      case Kind::Agg: return aggregate(node, a, env);
    }
    return 0.0;
  }

  double aggregate(const Node& node, const ContinuousStructure& a, std::vector<Element>& env) const {
    const std::size_t n = a.n();
    auto excluded = [&](Element b) {
      for (int s : node.ambient)
        if (env[s] == b) return true;
      return false;
    };
    const AggregatorKind kind = node.agg->kind();
    std::size_t count = 0;
    double best = kind == AggregatorKind::Min ? 1.0 : 0.0;
    CompensatedSum sum;
    std::vector<double> values;
    for (Element b = 1; b <= n; ++b) {
      if (excluded(b)) continue;
      env[node.bound] = b;
      const double v = eval(node.kids[0], a, env);
      ++count;
      switch (kind) {
        case AggregatorKind::Min: best = count == 1 ? v : std::min(best, v); break;
        case AggregatorKind::Max: best = count == 1 ? v : std::max(best, v); break;
        case AggregatorKind::Mean: sum.add(v); break;
        case AggregatorKind::External: values.push_back(v); break;
      }
    }
    env[node.bound] = 0;
    if (count == 0)
      throw EmptyAggregation("aggregation " + node.agg->name() + " has no elements outside the assignment (n = " +
                             std::to_string(n) + ")");
    if (kind == AggregatorKind::Mean) return std::clamp(sum.value() / static_cast<double>(count), 0.0, 1.0);
    if (kind == AggregatorKind::External) return (*node.agg)(values);
    return best;
  }

  std::vector<Variable> vars_;
  Signature sig_;
  std::vector<Formula> keep_;  // keeps connectives and aggregators referenced by nodes alive
  std::vector<Node> nodes_;
  std::size_t slots_ = 0;
  int root_ = 0;
};

// A(f(a)) for the declared variable tuple `vars`.
inline double evaluate(const ContinuousStructure& a, const Formula& f, const std::vector<Variable>& vars,
                       const Tuple& assignment) {
  return Evaluator(f, vars, a.signature())(a, assignment);
}

// Declared tuple defaults to the free variables in order of first occurrence.
inline double evaluate(const ContinuousStructure& a, const Formula& f, const Tuple& assignment) {
  return evaluate(a, f, free_vars_ordered(f), assignment);
}

}  // namespace cla
