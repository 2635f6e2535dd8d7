#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cla/error.hpp"
#include "cla/tabulated.hpp"

namespace cla {

// Primitive operations a connective expression may use. Each is continuous,
// so every expression is continuous; the root clamp of Connective keeps the
// codomain inside [0,1].
enum class ExprOp : std::uint8_t { Const, Arg, Sum, Diff, Prod, Min, Max, Abs, Complement, Avg, Clamp, Table };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  ExprOp op = ExprOp::Const;
  double value = 0.0;       // Const
  std::size_t index = 0;    // Arg
  std::vector<ExprPtr> kids;
  std::shared_ptr<const TabulatedFunction> table;  // Table

  static ExprPtr constant(double c) {
    auto e = std::make_shared<Expr>();
    e->op = ExprOp::Const;
    e->value = c;
    return e;
  }
  static ExprPtr arg(std::size_t i) {
    auto e = std::make_shared<Expr>();
    e->op = ExprOp::Arg;
    e->index = i;
    return e;
  }
  static ExprPtr node(ExprOp op, std::vector<ExprPtr> kids) {
    auto e = std::make_shared<Expr>();
    e->op = op;
    e->kids = std::move(kids);
    return e;
  }
  static ExprPtr apply_table(std::shared_ptr<const TabulatedFunction> table, std::vector<ExprPtr> kids) {
    auto e = std::make_shared<Expr>();
    e->op = ExprOp::Table;
    e->table = std::move(table);
    e->kids = std::move(kids);
    return e;
  }
};

inline const char* op_name(ExprOp op) {
  switch (op) {
    case ExprOp::Const: return "const";
    case ExprOp::Arg: return "arg";
    case ExprOp::Sum: return "sum";
    case ExprOp::Diff: return "diff";
    case ExprOp::Prod: return "prod";
    case ExprOp::Min: return "min";
    case ExprOp::Max: return "max";
    case ExprOp::Abs: return "abs";
    case ExprOp::Complement: return "complement";
    case ExprOp::Avg: return "avg";
    case ExprOp::Clamp: return "clamp";
    case ExprOp::Table: return "table";
  }
  return "?";
}

// Replaces every Arg(i) by replacements[i]. Shares untouched subtrees.
inline ExprPtr substitute_args(const ExprPtr& e, std::span<const ExprPtr> replacements) {
  if (e->op == ExprOp::Arg) {
    if (e->index >= replacements.size()) throw ValidationError("connective: argument index out of range");
    return replacements[e->index];
  }
  if (e->kids.empty()) return e;
  auto copy = std::make_shared<Expr>(*e);
  for (auto& k : copy->kids) k = substitute_args(k, replacements);
  return copy;
}

// Range and sup-norm Lipschitz bound of an expression for arguments in [0,1].
struct ExprBound {
  double lo = 0.0;
  double hi = 0.0;
  double lipschitz = 0.0;
};

inline ExprBound bound_of(const Expr& e) {
  std::vector<ExprBound> k;
  k.reserve(e.kids.size());
  for (const auto& kid : e.kids) k.push_back(bound_of(*kid));
  auto mag = [](const ExprBound& b) { return std::max(std::abs(b.lo), std::abs(b.hi)); };
  ExprBound out;
  switch (e.op) {
    case ExprOp::Const:
      out = {e.value, e.value, 0.0};
      break;
    case ExprOp::Arg:
      out = {0.0, 1.0, 1.0};
      break;
    case ExprOp::Sum:
    case ExprOp::Avg: {
      for (const auto& b : k) {
        out.lo += b.lo;
        out.hi += b.hi;
        out.lipschitz += b.lipschitz;
      }
      if (e.op == ExprOp::Avg && !k.empty()) {
        const double n = static_cast<double>(k.size());
        out.lo /= n;
        out.hi /= n;
        out.lipschitz /= n;
      }
      break;
    }
    case ExprOp::Diff:
      out = {k[0].lo - k[1].hi, k[0].hi - k[1].lo, k[0].lipschitz + k[1].lipschitz};
      break;
    case ExprOp::Prod: {
      out = k.empty() ? ExprBound{1.0, 1.0, 0.0} : k[0];
      for (std::size_t i = 1; i < k.size(); ++i) {
        const double c[] = {out.lo * k[i].lo, out.lo * k[i].hi, out.hi * k[i].lo, out.hi * k[i].hi};
        const double lip = mag(out) * k[i].lipschitz + mag(k[i]) * out.lipschitz;
        out = {*std::min_element(c, c + 4), *std::max_element(c, c + 4), lip};
      }
      break;
    }
    case ExprOp::Min:
    case ExprOp::Max: {
      out = k[0];
      for (std::size_t i = 1; i < k.size(); ++i) {
        if (e.op == ExprOp::Min) {
          out.lo = std::min(out.lo, k[i].lo);
          out.hi = std::min(out.hi, k[i].hi);
        } else {
          out.lo = std::max(out.lo, k[i].lo);
          out.hi = std::max(out.hi, k[i].hi);
        }
        out.lipschitz = std::max(out.lipschitz, k[i].lipschitz);
      }
      break;
    }
    case ExprOp::Abs: {
      const auto& b = k[0];
      if (b.lo >= 0) out = b;
      else if (b.hi <= 0) out = {-b.hi, -b.lo, b.lipschitz};
      else out = {0.0, std::max(-b.lo, b.hi), b.lipschitz};
      break;
    }
    case ExprOp::Complement:
      out = {1.0 - k[0].hi, 1.0 - k[0].lo, k[0].lipschitz};
      break;
    case ExprOp::Clamp:
      out = {std::clamp(k[0].lo, 0.0, 1.0), std::clamp(k[0].hi, 0.0, 1.0), k[0].lipschitz};
      break;
    case ExprOp::Table: {
      const auto& vals = e.table->values();
      out.lo = *std::min_element(vals.begin(), vals.end());
      out.hi = *std::max_element(vals.begin(), vals.end());
      const auto slopes = e.table->axis_slopes();
      for (std::size_t a = 0; a < k.size(); ++a) out.lipschitz += slopes[a] * k[a].lipschitz;
      break;
    }
  }
  return out;
}

// Interval enclosure of an expression over a box of argument ranges.
struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

inline Range range_of(const Expr& e, std::span<const Range> box) {
  switch (e.op) {
    case ExprOp::Const: return {e.value, e.value};
    case ExprOp::Arg: return box[e.index];
    case ExprOp::Sum:
    case ExprOp::Avg: {
      Range out;
      for (const auto& kid : e.kids) {
        const Range r = range_of(*kid, box);
        out.lo += r.lo;
        out.hi += r.hi;
      }
      if (e.op == ExprOp::Avg) {
        out.lo /= static_cast<double>(e.kids.size());
        out.hi /= static_cast<double>(e.kids.size());
      }
      return out;
    }
    case ExprOp::Diff: {
      const Range a = range_of(*e.kids[0], box);
      const Range b = range_of(*e.kids[1], box);
      return {a.lo - b.hi, a.hi - b.lo};
    }
    case ExprOp::Prod: {
      Range out{1.0, 1.0};
      for (const auto& kid : e.kids) {
        const Range r = range_of(*kid, box);
        const double c[] = {out.lo * r.lo, out.lo * r.hi, out.hi * r.lo, out.hi * r.hi};
        out = {*std::min_element(c, c + 4), *std::max_element(c, c + 4)};
      }
      return out;
    }
    case ExprOp::Min:
    case ExprOp::Max: {
      Range out = range_of(*e.kids[0], box);
      for (std::size_t i = 1; i < e.kids.size(); ++i) {
        const Range r = range_of(*e.kids[i], box);
        if (e.op == ExprOp::Min) out = {std::min(out.lo, r.lo), std::min(out.hi, r.hi)};
        else out = {std::max(out.lo, r.lo), std::max(out.hi, r.hi)};
      }
      return out;
    }
    case ExprOp::Abs: {
      const Range r = range_of(*e.kids[0], box);
      if (r.lo >= 0.0) return r;
      if (r.hi <= 0.0) return {-r.hi, -r.lo};
      return {0.0, std::max(-r.lo, r.hi)};
    }
    case ExprOp::Complement: {
      const Range r = range_of(*e.kids[0], box);
      return {1.0 - r.hi, 1.0 - r.lo};
    }
    case ExprOp::Clamp: {
      const Range r = range_of(*e.kids[0], box);
      return {std::clamp(r.lo, 0.0, 1.0), std::clamp(r.hi, 0.0, 1.0)};
    }
    case ExprOp::Table: {
      std::vector<std::pair<double, double>> sub;
      sub.reserve(e.kids.size());
      for (const auto& kid : e.kids) {
        const Range r = range_of(*kid, box);
        sub.emplace_back(r.lo, r.hi);
      }
      const auto [lo, hi] = e.table->range(sub);
      return {lo, hi};
    }
  }
  return {0.0, 1.0};
}

// A continuous function [0,1]^k -> [0,1]: an expression over the primitive
// operations, evaluated and then clamped into [0,1]. Immutable.
class Connective {
 public:
  Connective() : Connective(0, Expr::constant(0.0), "const_0") {}

  Connective(std::size_t arity, ExprPtr root, std::string name)
      : arity_(arity), root_(std::move(root)), name_(std::move(name)) {
    check(*root_);
    compile(*root_);
  }

  std::size_t arity() const { return arity_; }
  const ExprPtr& root() const { return root_; }
  const std::string& name() const { return name_; }

  double operator()(std::span<const double> args) const {
    if (args.size() != arity_)
      throw ValidationError("connective " + name_ + ": expected " + std::to_string(arity_) + " arguments, got " +
                            std::to_string(args.size()));
    return eval_unchecked(args);
  }
  double operator()(std::initializer_list<double> args) const {
    return (*this)(std::span<const double>(args.begin(), args.size()));
  }

  // Evaluation without the arity check, for hot loops.
  double eval_unchecked(std::span<const double> args) const {
    thread_local std::vector<double> stack;
    stack.clear();
    for (const auto& in : program_) {
      switch (in.op) {
        case ExprOp::Const: stack.push_back(in.value); break;
        case ExprOp::Arg: stack.push_back(args[in.count]); break;
        case ExprOp::Sum:
        case ExprOp::Avg: {
          double s = 0.0;
          const std::size_t base = stack.size() - in.count;
          for (std::size_t i = base; i < stack.size(); ++i) s += stack[i];
          if (in.op == ExprOp::Avg) s /= static_cast<double>(in.count);
          stack.resize(base);
          stack.push_back(s);
          break;
        }
        case ExprOp::Prod: {
          double s = 1.0;
          const std::size_t base = stack.size() - in.count;
          for (std::size_t i = base; i < stack.size(); ++i) s *= stack[i];
          stack.resize(base);
          stack.push_back(s);
          break;
        }
        case ExprOp::Min:
        case ExprOp::Max: {
          const std::size_t base = stack.size() - in.count;
          double s = stack[base];
          for (std::size_t i = base + 1; i < stack.size(); ++i)
            s = in.op == ExprOp::Min ? std::min(s, stack[i]) : std::max(s, stack[i]);
          stack.resize(base);
          stack.push_back(s);
          break;
        }
        case ExprOp::Diff: {
          const double b = stack.back();
          stack.pop_back();
          stack.back() -= b;
          break;
        }
        case ExprOp::Abs: stack.back() = std::abs(stack.back()); break;
        case ExprOp::Complement: stack.back() = 1.0 - stack.back(); break;
        case ExprOp::Clamp: stack.back() = std::clamp(stack.back(), 0.0, 1.0); break;
        case ExprOp::Table: {
          const std::size_t base = stack.size() - in.count;
          const double v = (*in.table)(std::span<const double>(stack.data() + base, in.count));
          stack.resize(base);
          stack.push_back(v);
          break;
        }
      }
    }
    return std::clamp(stack.back(), 0.0, 1.0);
  }

  // Enclosure of the clamped output over a box of arguments.
  Range range(std::span<const Range> box) const {
    const Range r = range_of(*root_, box);
    return {std::clamp(r.lo, 0.0, 1.0), std::clamp(r.hi, 0.0, 1.0)};
  }

  ExprBound bound() const { return bound_of(*root_); }
  // Sup-norm Lipschitz constant: |C(r) - C(r')| <= L * max_i |r_i - r'_i|.
  double lipschitz() const { return bound().lipschitz; }

  // Root expression including the root clamp, for embedding into a larger
  // expression so the composite performs the same arithmetic.
  ExprPtr clamped_root() const {
    if (root_->op == ExprOp::Clamp || root_->op == ExprOp::Arg || root_->op == ExprOp::Table) return root_;
    if (root_->op == ExprOp::Const && root_->value >= 0.0 && root_->value <= 1.0) return root_;
    return Expr::node(ExprOp::Clamp, {root_});
  }

  // C(r_1..r_k) with argument i replaced by the given expression over a new
  // argument list of size new_arity.
  Connective compose(std::span<const ExprPtr> replacements, std::size_t new_arity, std::string name) const {
    if (replacements.size() != arity_) throw ValidationError("compose: wrong number of replacements");
    return Connective(new_arity, substitute_args(clamped_root(), replacements), std::move(name));
  }

  // Fixes the arguments flagged in `fixed` to the given values and renumbers
  // the remaining ones in order.
  Connective fix(std::span<const std::optional<double>> fixed, std::string name) const {
    std::vector<ExprPtr> repl(arity_);
    std::size_t next = 0;
    for (std::size_t i = 0; i < arity_; ++i) repl[i] = fixed[i] ? Expr::constant(*fixed[i]) : Expr::arg(next++);
    return compose(repl, next, std::move(name));
  }

  // New argument j feeds old argument order[j]: C'(s) = C(s placed by order).
  Connective permute(std::span<const std::size_t> order, std::string name) const {
    std::vector<ExprPtr> repl(arity_);
    for (std::size_t j = 0; j < order.size(); ++j) repl[order[j]] = Expr::arg(j);
    return compose(repl, order.size(), std::move(name));
  }

 private:
  struct Instr {
    ExprOp op;
    std::size_t count = 0;  // Arg index, or number of operands
    double value = 0.0;
    const TabulatedFunction* table = nullptr;
  };

  void check(const Expr& e) const {
    switch (e.op) {
      case ExprOp::Const:
        if (!std::isfinite(e.value)) throw ValidationError("connective: non-finite constant");
        break;
      case ExprOp::Arg:
        if (e.index >= arity_)
          throw ValidationError("connective " + name_ + ": argument " + std::to_string(e.index) +
                                " out of range for arity " + std::to_string(arity_));
        break;
      case ExprOp::Diff:
        if (e.kids.size() != 2) throw ValidationError("connective: diff takes two operands");
        break;
      case ExprOp::Abs:
      case ExprOp::Complement:
      case ExprOp::Clamp:
        if (e.kids.size() != 1) throw ValidationError(std::string("connective: ") + op_name(e.op) + " is unary");
        break;
      case ExprOp::Table:
        if (!e.table || e.kids.size() != e.table->arity())
          throw ValidationError("connective: table arity mismatch");
        break;
      default:
        if (e.kids.empty()) throw ValidationError(std::string("connective: ") + op_name(e.op) + " needs operands");
    }
    for (const auto& k : e.kids) check(*k);
  }

  void compile(const Expr& e) {
    for (const auto& k : e.kids) compile(*k);
    Instr in{e.op};
    if (e.op == ExprOp::Const) in.value = e.value;
    else if (e.op == ExprOp::Arg) in.count = e.index;
    else in.count = e.kids.size();
    in.table = e.table.get();
    program_.push_back(in);
  }

  std::size_t arity_ = 0;
  ExprPtr root_;
  std::string name_;
  std::vector<Instr> program_;
};

// Connective wrapper around a tabulated function. Arity 0 becomes a constant.
inline Connective tabulated_connective(std::shared_ptr<const TabulatedFunction> table, std::string name) {
  const std::size_t t = table->arity();
  if (t == 0) return Connective(0, Expr::constant(table->values()[0]), std::move(name));
  std::vector<ExprPtr> args;
  for (std::size_t i = 0; i < t; ++i) args.push_back(Expr::arg(i));
  return Connective(t, Expr::apply_table(std::move(table), std::move(args)), std::move(name));
}

inline Connective constant_connective(double c) {
  if (!(c >= 0.0 && c <= 1.0)) throw ValidationError("constant connective outside [0,1]");
  return Connective(0, Expr::constant(c), "const_" + std::to_string(c));
}

inline Connective identity_connective() { return Connective(1, Expr::arg(0), "identity"); }

namespace detail {
inline std::optional<std::size_t> numeric_suffix(const std::string& name, const std::string& prefix) {
  if (name.size() <= prefix.size() || name.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
  std::size_t k = 0;
  const char* first = name.data() + prefix.size();
  const char* last = name.data() + name.size();
  auto [ptr, ec] = std::from_chars(first, last, k);
  if (ec != std::errc() || ptr != last || k < 1) return std::nullopt;
  return k;
}

inline std::vector<ExprPtr> args_upto(std::size_t k) {
  std::vector<ExprPtr> a;
  for (std::size_t i = 0; i < k; ++i) a.push_back(Expr::arg(i));
  return a;
}
}  // namespace detail

// Connective of the registry, by name. Łukasiewicz semantics for the
// classical connectives.
inline std::optional<Connective> find_builtin(const std::string& name) {
  using detail::args_upto;
  auto x = Expr::arg(0);
  auto y = Expr::arg(1);
  if (name == "not" || name == "neg") return Connective(1, Expr::node(ExprOp::Complement, {x}), name);
  if (name == "and")
    return Connective(2,
                      Expr::node(ExprOp::Max, {Expr::constant(0.0), Expr::node(ExprOp::Diff, {Expr::node(ExprOp::Sum, {x, y}),
                                                                                             Expr::constant(1.0)})}),
                      name);
  if (name == "or") return Connective(2, Expr::node(ExprOp::Min, {Expr::constant(1.0), Expr::node(ExprOp::Sum, {x, y})}), name);
  if (name == "implies")
    return Connective(
        2, Expr::node(ExprOp::Min, {Expr::constant(1.0), Expr::node(ExprOp::Sum, {Expr::node(ExprOp::Complement, {x}), y})}),
        name);
  if (name == "abs_diff") return Connective(2, Expr::node(ExprOp::Abs, {Expr::node(ExprOp::Diff, {x, y})}), name);
  if (name == "identity") return identity_connective();
  if (name.rfind("const_", 0) == 0) {
    double c = 0.0;
    const char* first = name.data() + 6;
    const char* last = name.data() + name.size();
    auto [ptr, ec] = std::from_chars(first, last, c);
    if (ec == std::errc() && ptr == last && c >= 0.0 && c <= 1.0) return Connective(0, Expr::constant(c), name);
    return std::nullopt;
  }
  if (auto k = detail::numeric_suffix(name, "min")) return Connective(*k, Expr::node(ExprOp::Min, args_upto(*k)), name);
  if (auto k = detail::numeric_suffix(name, "max")) return Connective(*k, Expr::node(ExprOp::Max, args_upto(*k)), name);
  if (auto k = detail::numeric_suffix(name, "avg")) return Connective(*k, Expr::node(ExprOp::Avg, args_upto(*k)), name);
  return std::nullopt;
}

inline Connective builtin(const std::string& name) {
  if (auto c = find_builtin(name)) return *c;
  throw ValidationError("unknown connective '" + name + "'");
}

}  // namespace cla
