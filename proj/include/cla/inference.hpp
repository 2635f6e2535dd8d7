#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cla/aggregator.hpp"
#include "cla/connective.hpp"
#include "cla/density.hpp"
#include "cla/error.hpp"
#include "cla/eval.hpp"
#include "cla/formula.hpp"
#include "cla/integrate.hpp"
#include "cla/normalize.hpp"
#include "cla/pattern.hpp"
#include "cla/structure.hpp"
#include "cla/tabulated.hpp"

namespace cla {

struct ProbabilityEstimate {
  double value = 0.0;
  Method method = Method::Exact;
  double error = 0.0;       // quadrature: resolution bound; Monte Carlo: 99% Hoeffding half-width
  std::size_t budget = 0;   // samples, or cells per axis
};

// Density of each atom of a normalized formula: the density of its relation
// under the restriction of the pattern to the atom's argument positions.
inline std::vector<Density> atom_densities(const std::vector<AtomRef>& atoms, const IdentityPattern& p,
                                           const DensityModel& model) {
  std::vector<Density> out;
  out.reserve(atoms.size());
  for (const auto& a : atoms) out.push_back(model.density(a.relation, restrict_pattern(p, a.positions)));
  return out;
}

namespace detail {

inline Method resolve(Method m, std::size_t s) {
  if (m == Method::Auto) return s <= kMaxQuadratureDim ? Method::Quadrature : Method::MonteCarlo;
  return m;
}

inline ProbabilityEstimate prob_of(const Connective& c, const std::vector<Density>& dens, const Interval& j,
                                   const IntegrationConfig& cfg) {
  const Method m = resolve(cfg.method, dens.size());
  if (m == Method::Quadrature) {
    const Estimate e = prob_quadrature(c, dens, j, cfg.resolution, cfg.threads);
    return {e.value, m, e.error, cfg.resolution};
  }
  const Estimate e = prob_monte_carlo(c, dens, j, cfg.samples, cfg.seed, cfg.threads);
  return {e.value, Method::MonteCarlo, e.error, cfg.samples};
}

}  // namespace detail

// P_n({A : A(psi(a)) in J}) for any a satisfying p. The value is an integral
// of the product of the atoms' densities over C^{-1}(J) and does not depend
// on n or on the particular tuple.
inline ProbabilityEstimate prob_in_interval(const Formula& psi, const IdentityPattern& p, const std::vector<Variable>& vars,
                                            const Interval& j, const DensityModel& model,
                                            const IntegrationConfig& cfg = {}) {
  const NormalizedFormula nf = normalize_under(psi, p, vars);
  if (nf.constant) return {j.contains(nf.value) ? 1.0 : 0.0, Method::Exact, 0.0, 0};
  return detail::prob_of(nf.connective, atom_densities(nf.atoms, p, model), j, cfg);
}

struct IndependenceReport {
  double gap = 0.0;                    // worst |joint - product| over pairs and the full conjunction
  std::vector<double> marginals;       // per-event frequencies
  double joint = 0.0;                  // frequency of the full conjunction
  std::size_t samples = 0;
};

// Empirical product-rule check for the events {A(psi(a, b_i)) in J},
// i = 1..m, over sampled structures of size n. `vars` is the tuple (x, y)
// with y last; a is the canonical tuple of p and b_1..b_m the next elements.
inline IndependenceReport independence_gap(const Formula& psi, const std::vector<Variable>& vars,
                                           const IdentityPattern& p, const Interval& j, std::size_t n, std::size_t m,
                                           std::size_t samples, const DensityModel& model, std::uint64_t seed,
                                           unsigned threads = 1) {
  if (vars.empty() || vars.size() != p.size() + 1)
    throw ValidationError("independence_gap: expected the pattern's variables followed by one aggregated variable");
  if (m == 0) throw ValidationError("independence_gap: need at least one event");
  const std::size_t used = p.block_count();
  if (n < used + m)
    throw ValidationError("independence_gap: n = " + std::to_string(n) + " leaves fewer than " + std::to_string(m) +
                          " elements outside the tuple");
  const Evaluator ev(psi, vars, model.signature());
  Tuple base;
  for (int l : p.canonical_tuple()) base.push_back(static_cast<Element>(l));
  std::vector<std::vector<char>> hits(samples, std::vector<char>(m));
  parallel_for(samples, threads, [&](std::size_t i) {
    const ContinuousStructure a = sample_structure(n, model, seed, i);
    Tuple t = base;
    t.push_back(0);
    for (std::size_t e = 0; e < m; ++e) {
      t.back() = used + 1 + e;
      hits[i][e] = j.contains(ev(a, t)) ? 1 : 0;
    }
  });
  IndependenceReport r;
  r.samples = samples;
  const double total = static_cast<double>(samples);
  r.marginals.assign(m, 0.0);
  std::size_t all = 0;
  for (const auto& h : hits) {
    bool every = true;
    for (std::size_t e = 0; e < m; ++e) {
      r.marginals[e] += h[e];
      every = every && h[e];
    }
    all += every ? 1 : 0;
  }
  for (auto& v : r.marginals) v /= total;
  r.joint = static_cast<double>(all) / total;
  double product = 1.0;
  for (double v : r.marginals) product *= v;
  r.gap = std::abs(r.joint - product);
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) {
      std::size_t both = 0;
      for (const auto& h : hits) both += (h[a] && h[b]) ? 1 : 0;
      r.gap = std::max(r.gap, std::abs(static_cast<double>(both) / total - r.marginals[a] * r.marginals[b]));
    }
  return r;
}

struct HistogramProfile {
  std::size_t bins = 0;
  std::vector<double> alpha;
  std::vector<double> error;  // per-bin bound
};

// Splits the normalized body of an aggregation over (x, y) into the atoms
// without y (first t) and with y (last s), and reorders the connective's
// arguments accordingly.
struct SplitBody {
  bool constant = false;
  double value = 0.0;
  Connective connective;             // arity t + s
  std::vector<AtomRef> y_free;       // positions within x
  std::vector<AtomRef> with_y;       // positions within (x, y)
  std::vector<Density> y_densities;  // density of each atom with y
};

inline SplitBody split_body(const Formula& body, const IdentityPattern& p, const std::vector<Variable>& vars_with_y,
                            const DensityModel& model) {
  const IdentityPattern ext = extend_pattern_fresh(p);
  const NormalizedFormula nf = normalize_under(body, ext, vars_with_y);
  SplitBody out;
  if (nf.constant) {
    out.constant = true;
    out.value = nf.value;
    out.connective = Connective(0, Expr::constant(nf.value), "const");
    return out;
  }
  const std::size_t ypos = vars_with_y.size();
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < nf.atoms.size(); ++i) {
    const auto& pos = nf.atoms[i].positions;
    if (std::find(pos.begin(), pos.end(), ypos) == pos.end()) {
      order.push_back(i);
      out.y_free.push_back(nf.atoms[i]);
    }
  }
  for (std::size_t i = 0; i < nf.atoms.size(); ++i) {
    const auto& pos = nf.atoms[i].positions;
    if (std::find(pos.begin(), pos.end(), ypos) != pos.end()) {
      order.push_back(i);
      out.with_y.push_back(nf.atoms[i]);
    }
  }
  out.connective = nf.connective.permute(order, nf.connective.name());
  out.y_densities = atom_densities(out.with_y, ext, model);
  return out;
}

// C with the y-free arguments fixed to r.
inline Connective fix_prefix(const Connective& c, std::span<const double> r) {
  std::vector<std::optional<double>> fixed(c.arity());
  for (std::size_t i = 0; i < r.size(); ++i) fixed[i] = r[i];
  return c.fix(fixed, c.name());
}

// Probabilities alpha_i that C_r(p_1..p_s) falls in bin i, with the y-free
// atoms fixed to r. `vars` is (x, y) with y last, p the pattern of x.
inline HistogramProfile histogram_profile(const Formula& inner, const IdentityPattern& p,
                                          const std::vector<Variable>& vars_with_y, const std::vector<double>& fixed,
                                          std::size_t bins, const DensityModel& model,
                                          const IntegrationConfig& cfg = {}) {
  if (bins == 0) throw ValidationError("histogram_profile: need at least one bin");
  const SplitBody sb = split_body(inner, p, vars_with_y, model);
  HistogramProfile h;
  h.bins = bins;
  h.alpha.assign(bins, 0.0);
  h.error.assign(bins, 0.0);
  if (sb.constant) {
    for (std::size_t i = 0; i < bins; ++i) h.alpha[i] = histogram_bin(i, bins).contains(sb.value) ? 1.0 : 0.0;
    return h;
  }
  if (fixed.size() != sb.y_free.size())
    throw ValidationError("histogram_profile: " + std::to_string(sb.y_free.size()) + " atoms without the aggregated variable need fixed values, got " +
                          std::to_string(fixed.size()));
  const Connective c = fix_prefix(sb.connective, fixed);
  for (std::size_t i = 0; i < bins; ++i) {
    const auto e = detail::prob_of(c, sb.y_densities, histogram_bin(i, bins), cfg);
    h.alpha[i] = e.value;
    h.error[i] = e.error;
  }
  return h;
}

struct EliminationConfig {
  std::size_t grid = 17;             // nodes per axis of the tabulated D
  std::size_t budget = 20000;        // Monte Carlo samples per node
  Method method = Method::Auto;      // mean: quadrature for s <= 3 unless Monte Carlo is requested
  std::size_t resolution = 256;      // quadrature cells per axis
  std::size_t scan_resolution = 512; // support lattice for essential sup/inf
  std::uint64_t seed = 1;
  unsigned threads = 1;
  bool stabilize = true;             // Monte Carlo nodes: rerun with 2m samples and report the change
  bool allow_generic = false;        // sample-and-stabilize for aggregators other than min/max/am
};

struct EliminationStep {
  std::string aggregator;
  std::string bound;
  std::size_t t = 0;
  std::size_t s = 0;
  std::size_t grid = 0;       // nodes per axis (0 when t = 0)
  std::size_t budget = 0;     // samples or cells per axis per node
  std::string statistic;      // mean, ess-sup, ess-inf, replica, generic
  Method method = Method::Exact;
  std::optional<double> tolerance;      // bound on |D - exact D| at the nodes, when known
  std::optional<double> stabilization;  // max change at the nodes from doubling the budget
  bool trusted = true;
  std::vector<std::string> y_free_atoms;
  std::vector<std::string> y_atoms;
  std::shared_ptr<const TabulatedFunction> table;  // t >= 1
  double constant = 0.0;                           // t = 0
};

struct EliminationResult {
  Formula output = Formula::constant(0.0);
  std::vector<EliminationStep> trace;

  // Sum of the node tolerances; empty if any step has none.
  std::optional<double> tolerance() const {
    double t = 0.0;
    for (const auto& s : trace) {
      if (!s.tolerance) return std::nullopt;
      t += *s.tolerance;
    }
    return t;
  }
};

namespace detail {

inline std::string atom_text(const AtomRef& a, const std::vector<Variable>& vars) {
  std::string s = a.relation + "(";
  for (std::size_t i = 0; i < a.positions.size(); ++i) s += (i ? "," : "") + vars[a.positions[i] - 1];
  return s + ")";
}

struct NodeValue {
  double value = 0.0;
  std::optional<double> tolerance;
  std::optional<double> stabilization;
};

inline NodeValue node_statistic(const Aggregator& f, const Connective& c, const std::vector<Density>& dens,
                                const EliminationConfig& cfg, std::uint64_t seed, EliminationStep& step) {
  const std::size_t s = dens.size();
  if (s == 0) {
    // F on m replicas of the single value.
    const std::vector<double> replicas(std::max<std::size_t>(cfg.budget, 1), c({}));
    step.statistic = "replica";
    step.method = Method::Exact;
    return {f(replicas), 0.0, std::nullopt};
  }
  switch (f.kind()) {
    case AggregatorKind::Mean: {
      step.statistic = "mean";
      const Method m = resolve(cfg.method, s);
      step.method = m;
      if (m == Method::Quadrature) {
        const Estimate e = mean_quadrature(c, dens, cfg.resolution);
        step.budget = cfg.resolution;
        return {e.value, e.error, std::nullopt};
      }
      step.budget = cfg.budget;
      const Estimate e = mean_monte_carlo(c, dens, cfg.budget, seed);
      if (!cfg.stabilize) return {e.value, e.error, std::nullopt};
      const Estimate e2 = mean_monte_carlo(c, dens, 2 * cfg.budget, derive_seed(seed, {1}));
      return {e.value, e.error + e2.error, std::abs(e.value - e2.value)};
    }
    case AggregatorKind::Max:
    case AggregatorKind::Min: {
      const bool sup = f.kind() == AggregatorKind::Max;
      step.statistic = sup ? "ess-sup" : "ess-inf";
      if (s <= kMaxQuadratureDim && cfg.method != Method::MonteCarlo) {
        step.method = Method::Quadrature;
        step.budget = cfg.scan_resolution;
        const Extremum x = essential_extremum(c, dens, sup, cfg.scan_resolution);
        return {x.value, std::abs(x.bound - x.value), std::nullopt};
      }
      // Sample extremum: a one-sided estimate without a bound.
      step.method = Method::MonteCarlo;
      step.budget = cfg.budget;
      step.trusted = false;
      const double v = aggregate_draws(f, c, dens, cfg.budget, seed);
      if (!cfg.stabilize) return {v, std::nullopt, std::nullopt};
      const double v2 = aggregate_draws(f, c, dens, 2 * cfg.budget, derive_seed(seed, {1}));
      return {v, std::nullopt, std::abs(v - v2)};
    }
    case AggregatorKind::External: {
      if (!cfg.allow_generic)
        throw UnsupportedAggregator("aggregator " + f.name() + " cannot be eliminated; only min, max and am are supported");
      step.statistic = "generic";
      step.method = Method::MonteCarlo;
      step.budget = cfg.budget;
      step.trusted = false;
      const double v = aggregate_draws(f, c, dens, cfg.budget, seed);
      const double v2 = aggregate_draws(f, c, dens, 2 * cfg.budget, derive_seed(seed, {1}));
      return {v, std::nullopt, std::abs(v - v2)};
    }
  }
  return {};
}

}  // namespace detail

struct BuiltD {
  Connective connective;          // arity t; arity 0 is a constant
  std::vector<AtomRef> y_free;    // arguments, positions within x
  EliminationStep step;
};

// The function D replacing F{y}(phi): for each point r of the grid over the
// y-free atom values, the limit of F over the values C_r(p_1..p_s) with the
// atoms containing y drawn from their densities. am gives the mean, max the
// essential supremum, min the essential infimum.
inline BuiltD build_D(const Aggregator& f, const Variable& y, const Formula& phi, const IdentityPattern& p,
                      const std::vector<Variable>& vars, const DensityModel& model, const EliminationConfig& cfg,
                      std::uint64_t step_index = 0) {
  if (!aggregation_free(phi)) throw ValidationError("build_D: body contains an aggregation");
  if (cfg.grid < 2) throw ValidationError("build_D: grid needs at least 2 nodes per axis");
  if (!f.eliminable() && !cfg.allow_generic)
    throw UnsupportedAggregator("aggregator " + f.name() + " cannot be eliminated; only min, max and am are supported");
  std::vector<Variable> vy = vars;
  vy.push_back(y);
  const SplitBody sb = split_body(phi, p, vy, model);
  BuiltD out;
  out.step.aggregator = f.name();
  out.step.bound = y;
  out.y_free = sb.y_free;
  out.step.t = sb.y_free.size();
  out.step.s = sb.with_y.size();
  for (const auto& a : sb.y_free) out.step.y_free_atoms.push_back(detail::atom_text(a, vy));
  for (const auto& a : sb.with_y) out.step.y_atoms.push_back(detail::atom_text(a, vy));
  const std::size_t t = out.step.t;

  if (t == 0) {
    const Connective c = sb.connective;
    const auto nv = detail::node_statistic(f, c, sb.y_densities, cfg, derive_seed(cfg.seed, {step_index, 0}), out.step);
    out.step.tolerance = nv.tolerance;
    out.step.stabilization = nv.stabilization;
    out.step.constant = nv.value;
    out.connective = Connective(0, Expr::constant(nv.value), "D<" + f.name() + ">");
    return out;
  }

  std::vector<std::vector<double>> grids(t, uniform_nodes(cfg.grid));
  std::size_t total = 1;
  for (std::size_t i = 0; i < t; ++i) total *= cfg.grid;
  std::vector<detail::NodeValue> nodes(total);
  std::vector<EliminationStep> steps(total, out.step);
  const TabulatedFunction shape(grids, std::vector<double>(total, 0.0));
  parallel_for(total, cfg.threads, [&](std::size_t i) {
    const std::vector<double> r = shape.point(i);
    const Connective c = fix_prefix(sb.connective, r);
    nodes[i] = detail::node_statistic(f, c, sb.y_densities, cfg, derive_seed(cfg.seed, {step_index, i}), steps[i]);
  });
  std::vector<double> values(total);
  std::optional<double> tol = 0.0, stab;
  for (std::size_t i = 0; i < total; ++i) {
    values[i] = std::clamp(nodes[i].value, 0.0, 1.0);
    if (tol && nodes[i].tolerance) tol = std::max(*tol, *nodes[i].tolerance);
    else tol.reset();
    if (nodes[i].stabilization) stab = std::max(stab.value_or(0.0), *nodes[i].stabilization);
  }
  out.step.statistic = steps[0].statistic;
  out.step.method = steps[0].method;
  out.step.budget = steps[0].budget;
  out.step.trusted = steps[0].trusted;
  out.step.grid = cfg.grid;
  out.step.tolerance = tol;
  out.step.stabilization = stab;
  auto table = std::make_shared<const TabulatedFunction>(std::move(grids), std::move(values));
  out.step.table = table;
  out.connective = tabulated_connective(table, "D<" + f.name() + ">");
  return out;
}

namespace detail {

// Renames the binder if it clashes with a declared variable.
inline std::pair<Variable, Formula> binder_apart(const node::Agg& g, const std::vector<Variable>& vars) {
  if (std::find(vars.begin(), vars.end(), g.bound) == vars.end()) return {g.bound, g.body};
  std::set<std::string> used(vars.begin(), vars.end());
  collect_names(g.body, used);
  NameSupply names(used);
  const Variable fresh = names.fresh(g.bound);
  return {fresh, substitute(g.body, g.bound, fresh, names)};
}

inline Formula eliminated_formula(const BuiltD& d, const std::vector<Variable>& vars) {
  if (d.connective.arity() == 0) return Formula::constant(d.connective({}));
  std::vector<Formula> args;
  for (const auto& a : d.y_free) {
    std::vector<Variable> names;
    for (std::size_t pos : a.positions) names.push_back(vars[pos - 1]);
    args.push_back(Formula::atom(a.relation, std::move(names)));
  }
  return Formula::conn(d.connective, std::move(args));
}

}  // namespace detail

// theta(x) = D(R_1(x_1), ..., R_t(x_t)), or a constant when t = 0.
inline Formula eliminate_once(const Formula& agg, const IdentityPattern& p, const std::vector<Variable>& vars,
                              const DensityModel& model, const EliminationConfig& cfg,
                              EliminationStep* step = nullptr, std::uint64_t step_index = 0) {
  if (!agg.is_agg()) throw ValidationError("eliminate_once: expected an aggregation");
  const auto [y, body] = detail::binder_apart(agg.as_agg(), vars);
  const BuiltD d = build_D(agg.as_agg().aggregator, y, body, p, vars, model, cfg, step_index);
  if (step) *step = d.step;
  return detail::eliminated_formula(d, vars);
}

namespace detail {

inline Formula eliminate_rec(const Formula& f, const IdentityPattern& p, const std::vector<Variable>& vars,
                             const DensityModel& model, const EliminationConfig& cfg,
                             std::vector<EliminationStep>& trace) {
  if (f.is_const() || f.is_eq() || f.is_atom()) return f;
  if (f.is_conn()) {
    std::vector<Formula> args;
    for (const auto& a : f.as_conn().args) args.push_back(eliminate_rec(a, p, vars, model, cfg, trace));
    return Formula::conn(f.as_conn().connective, std::move(args));
  }
  const auto& g = f.as_agg();
  const auto [y, body] = binder_apart(g, vars);
  std::vector<Variable> vy = vars;
  vy.push_back(y);
  const Formula inner = eliminate_rec(body, extend_pattern_fresh(p), vy, model, cfg, trace);
  const BuiltD d = build_D(g.aggregator, y, inner, p, vars, model, cfg, trace.size());
  trace.push_back(d.step);
  return eliminated_formula(d, vars);
}

}  // namespace detail

// Aggregation-free formula asymptotically equivalent to f under p: innermost
// aggregations are replaced first, connectives keep the pattern and bodies of
// aggregations use the pattern extended by a fresh position.
inline EliminationResult eliminate(const Formula& f, const IdentityPattern& p, const std::vector<Variable>& vars,
                                   const DensityModel& model, const EliminationConfig& cfg = {}) {
  if (p.size() != vars.size())
    throw ValidationError("eliminate: pattern has size " + std::to_string(p.size()) + " but the tuple has " +
                          std::to_string(vars.size()) + " variables");
  validate(f, model.signature());
  for (const auto& v : free_vars(f))
    if (std::find(vars.begin(), vars.end(), v) == vars.end())
      throw ValidationError("eliminate: free variable '" + v + "' is not in the declared tuple");
  EliminationResult r;
  r.output = detail::eliminate_rec(f, p, vars, model, cfg, r.trace);
  return r;
}

struct LimitProbability {
  ProbabilityEstimate estimate;     // error combines both sources below
  double integration_error = 0.0;
  std::optional<double> elimination_error;
  EliminationResult elimination;
};

// The limit of P_n({A : A(f(a)) in I}) for a satisfying p: the interval
// probability of the eliminated formula. The elimination tolerance tau is
// carried through by recomputing with I widened and narrowed by tau.
inline LimitProbability limit_prob(const Formula& f, const IdentityPattern& p, const std::vector<Variable>& vars,
                                   const Interval& interval, const DensityModel& model, const EliminationConfig& ecfg = {},
                                   const IntegrationConfig& icfg = {}) {
  LimitProbability out;
  out.elimination = eliminate(f, p, vars, model, ecfg);
  out.estimate = prob_in_interval(out.elimination.output, p, vars, interval, model, icfg);
  out.integration_error = out.estimate.error;
  const auto tau = out.elimination.tolerance();
  if (!tau) {
    out.elimination_error.reset();
    out.estimate.error = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  double elim = 0.0;
  if (*tau > 0.0) {
    Interval wide = interval;
    wide.lo = std::max(0.0, interval.lo - *tau);
    wide.hi = std::min(1.0, interval.hi + *tau);
    Interval narrow = interval;
    narrow.lo = interval.lo + *tau;
    narrow.hi = interval.hi - *tau;
    const double up = prob_in_interval(out.elimination.output, p, vars, wide, model, icfg).value;
    const double down = narrow.empty() ? 0.0 : prob_in_interval(out.elimination.output, p, vars, narrow, model, icfg).value;
    elim = std::max({0.0, up - out.estimate.value, out.estimate.value - down});
  }
  out.elimination_error = elim;
  out.estimate.error = out.integration_error + elim;
  return out;
}

}  // namespace cla
