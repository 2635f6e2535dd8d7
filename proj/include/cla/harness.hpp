#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "cla/error.hpp"
#include "cla/eval.hpp"
#include "cla/formula.hpp"
#include "cla/inference.hpp"
#include "cla/parallel.hpp"
#include "cla/pattern.hpp"
#include "cla/structure.hpp"

namespace cla {

// A resolved experiment: everything parsed and validated.
struct Experiment {
  Formula formula = Formula::constant(0.0);
  std::vector<Variable> vars;
  IdentityPattern pattern;
  DensityModel model;
  Interval interval = Interval::closed(0.4, 0.6);
  std::vector<std::size_t> ladder;
  std::size_t structures = 200;
  double epsilon = 0.1;
  std::uint64_t seed = 1;
  EliminationConfig elimination;
  IntegrationConfig integration;
  std::size_t tuple_cap = 10000;
  unsigned threads = 1;
  bool timings = false;
  // concentration
  std::size_t bins = 4;
  double delta = 0.15;
};

inline void validate_experiment(const Experiment& e) {
  if (e.pattern.size() != e.vars.size())
    throw ValidationError("experiment: pattern size " + std::to_string(e.pattern.size()) + " does not match " +
                          std::to_string(e.vars.size()) + " variables");
  if (e.ladder.empty()) throw ValidationError("experiment: empty n ladder");
  for (std::size_t i = 0; i < e.ladder.size(); ++i) {
    if (i > 0 && e.ladder[i] <= e.ladder[i - 1]) throw ValidationError("experiment: n ladder must be strictly increasing");
    if (e.ladder[i] <= e.vars.size())
      throw ValidationError("experiment: n = " + std::to_string(e.ladder[i]) + " must exceed the number of free variables (" +
                            std::to_string(e.vars.size()) + ")");
  }
  if (e.structures < 1) throw ValidationError("experiment: structures per n must be at least 1");
  if (e.tuple_cap < 1) throw ValidationError("experiment: tuple cap must be at least 1");
  if (!(e.epsilon >= 0.0)) throw ValidationError("experiment: epsilon must be nonnegative");
}

struct TupleSample {
  std::vector<Tuple> tuples;
  std::uint64_t total = 0;  // number of satisfying tuples in [n]^k
  bool subsampled = false;
};

// Tuples over [n] satisfying p: all of them when there are at most `cap`,
// otherwise `cap` uniform draws (with replacement) from them.
inline TupleSample satisfying_tuples(const IdentityPattern& p, std::size_t n, std::size_t cap, std::uint64_t seed) {
  const std::size_t blocks = p.block_count();
  TupleSample out;
  if (blocks > n) return out;
  out.total = 1;
  bool over = false;
  for (std::size_t i = 0; i < blocks; ++i) {
    out.total *= (n - i);
    if (out.total > cap) over = true;
  }
  auto expand = [&](const std::vector<Element>& block_values) {
    Tuple t(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) t[i] = block_values[static_cast<std::size_t>(p.label(i))];
    return t;
  };
  if (!over) {
    std::vector<Element> vals(blocks);
    auto rec = [&](auto&& self, std::size_t b) -> void {
      if (b == blocks) {
        out.tuples.push_back(expand(vals));
        return;
      }
      for (Element v = 1; v <= n; ++v) {
        if (std::find(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(b), v) != vals.begin() + static_cast<std::ptrdiff_t>(b)) continue;
        vals[b] = v;
        self(self, b + 1);
      }
    };
    rec(rec, 0);
    return out;
  }
  out.subsampled = true;
  Stream rng(seed);
  for (std::size_t k = 0; k < cap; ++k) {
    std::vector<Element> vals;
    while (vals.size() < blocks) {
      const Element v = static_cast<Element>(rng.below(n)) + 1;
      if (std::find(vals.begin(), vals.end(), v) == vals.end()) vals.push_back(v);
    }
    out.tuples.push_back(expand(vals));
  }
  return out;
}

struct ConvergenceRow {
  std::size_t n = 0;
  std::size_t samples = 0;
  std::size_t tuples = 0;           // tuples evaluated per structure
  std::uint64_t tuples_total = 0;   // satisfying tuples in [n]^k
  bool subsampled = false;
  double closeness_freq = 0.0;
  double membership_freq = 0.0;
  double alpha_hat = 0.0;
  double alpha_err = 0.0;
  double wall_ms = 0.0;
};

struct ConvergenceReport {
  std::string formula;
  std::string eliminated;
  std::vector<Variable> vars;
  std::string pattern;
  Interval interval;
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  LimitProbability limit;
  std::vector<ConvergenceRow> rows;
  bool closeness_nondecreasing = true;
  bool timings = false;
};

// Seed of the structures drawn at domain size n.
inline std::uint64_t rung_seed(std::uint64_t master, std::size_t n) { return derive_seed(master, {0x6e, n}); }

inline ConvergenceReport run_convergence(const Experiment& e) {
  validate_experiment(e);
  ConvergenceReport rep;
  rep.formula = to_string(e.formula);
  rep.vars = e.vars;
  rep.pattern = e.pattern.to_string();
  rep.interval = e.interval;
  rep.epsilon = e.epsilon;
  rep.seed = e.seed;
  rep.timings = e.timings;
  EliminationConfig ecfg = e.elimination;
  ecfg.threads = e.threads;
  IntegrationConfig icfg = e.integration;
  icfg.threads = e.threads;
  rep.limit = limit_prob(e.formula, e.pattern, e.vars, e.interval, e.model, ecfg, icfg);
  const Formula& psi = rep.limit.elimination.output;
  rep.eliminated = to_string(psi);

  const Evaluator ev_f(e.formula, e.vars, e.model.signature());
  const Evaluator ev_psi(psi, e.vars, e.model.signature());
  for (std::size_t n : e.ladder) {
    const auto start = std::chrono::steady_clock::now();
    const std::uint64_t seed = rung_seed(e.seed, n);
    const TupleSample ts = satisfying_tuples(e.pattern, n, e.tuple_cap, derive_seed(seed, {0x7475}));
    struct Slot {
      bool close = true;
      std::size_t hits = 0;
    };
    std::vector<Slot> slots(e.structures);
    parallel_for(e.structures, e.threads, [&](std::size_t s) {
      const ContinuousStructure a = sample_structure(n, e.model, seed, s);
      Slot slot;
      for (const auto& t : ts.tuples) {
        const double vf = ev_f(a, t);
        if (e.interval.contains(vf)) ++slot.hits;
        if (slot.close && std::abs(vf - ev_psi(a, t)) > e.epsilon) slot.close = false;
      }
      slots[s] = slot;
    });
    ConvergenceRow row;
    row.n = n;
    row.samples = e.structures;
    row.tuples = ts.tuples.size();
    row.tuples_total = ts.total;
    row.subsampled = ts.subsampled;
    std::size_t close = 0, hits = 0;
    for (const auto& s : slots) {
      close += s.close ? 1 : 0;
      hits += s.hits;
    }
    row.closeness_freq = static_cast<double>(close) / static_cast<double>(e.structures);
    const double pooled = static_cast<double>(e.structures) * static_cast<double>(ts.tuples.size());
    row.membership_freq = pooled > 0 ? static_cast<double>(hits) / pooled : 0.0;
    row.alpha_hat = rep.limit.estimate.value;
    row.alpha_err = rep.limit.estimate.error;
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (!rep.rows.empty() && row.closeness_freq < rep.rows.back().closeness_freq) rep.closeness_nondecreasing = false;
    rep.rows.push_back(row);
  }
  return rep;
}

struct ConcentrationRow {
  std::size_t n = 0;
  std::size_t structures = 0;
  std::size_t tuples = 0;
  bool subsampled = false;
  double pass_fraction = 0.0;
  double worst_deviation = 0.0;
  double wall_ms = 0.0;
};

struct ConcentrationReport {
  std::string formula;
  std::vector<Variable> vars;
  std::string pattern;
  std::size_t bins = 0;
  double delta = 0.0;
  std::uint64_t seed = 0;
  HistogramProfile profile;
  std::vector<ConcentrationRow> rows;
  bool timings = false;
};

// Per structure and tuple a, the proportions of b outside a whose value
// A(inner(a, b)) falls in each bin, compared with the limiting profile.
// `e.vars` lists the tuple variables followed by the aggregated variable;
// `e.pattern` covers the tuple variables only. Every atom of the normalized
// inner formula must contain the aggregated variable.
inline ConcentrationReport run_concentration(const Experiment& e) {
  if (e.vars.empty()) throw ValidationError("concentration: need the aggregated variable as the last variable");
  if (!aggregation_free(e.formula)) throw ValidationError("concentration: inner formula must be aggregation-free");
  if (e.bins < 1) throw ValidationError("concentration: need at least one bin");
  if (!(e.delta >= 0.0)) throw ValidationError("concentration: delta must be nonnegative");
  const std::vector<Variable> xs(e.vars.begin(), e.vars.end() - 1);
  Experiment check = e;
  check.vars = xs;
  validate_experiment(check);

  const SplitBody sb = split_body(e.formula, e.pattern, e.vars, e.model);
  if (!sb.constant && !sb.y_free.empty())
    throw ValidationError("concentration: atoms without the aggregated variable are not supported (found " +
                          std::to_string(sb.y_free.size()) + ")");
  ConcentrationReport rep;
  rep.formula = to_string(e.formula);
  rep.vars = e.vars;
  rep.pattern = e.pattern.to_string();
  rep.bins = e.bins;
  rep.delta = e.delta;
  rep.seed = e.seed;
  rep.timings = e.timings;
  IntegrationConfig icfg = e.integration;
  icfg.threads = e.threads;
  rep.profile = histogram_profile(e.formula, e.pattern, e.vars, {}, e.bins, e.model, icfg);

  const Evaluator ev(e.formula, e.vars, e.model.signature());
  for (std::size_t n : e.ladder) {
    const auto start = std::chrono::steady_clock::now();
    const std::uint64_t seed = rung_seed(e.seed, n);
    const TupleSample ts = satisfying_tuples(e.pattern, n, e.tuple_cap, derive_seed(seed, {0x7475}));
    struct Slot {
      bool pass = true;
      double worst = 0.0;
    };
    std::vector<Slot> slots(e.structures);
    parallel_for(e.structures, e.threads, [&](std::size_t s) {
      const ContinuousStructure a = sample_structure(n, e.model, seed, s);
      Slot slot;
      std::vector<std::size_t> counts(e.bins);
      for (const auto& t : ts.tuples) {
        std::fill(counts.begin(), counts.end(), 0);
        Tuple ty = t;
        ty.push_back(0);
        std::size_t total = 0;
        for (Element b = 1; b <= n; ++b) {
          if (std::find(t.begin(), t.end(), b) != t.end()) continue;
          ty.back() = b;
          const double v = ev(a, ty);
          for (std::size_t i = 0; i < e.bins; ++i)
            if (histogram_bin(i, e.bins).contains(v)) {
              ++counts[i];
              break;
            }
          ++total;
        }
        for (std::size_t i = 0; i < e.bins; ++i) {
          const double dev = std::abs(static_cast<double>(counts[i]) / static_cast<double>(total) - rep.profile.alpha[i]);
          slot.worst = std::max(slot.worst, dev);
          if (dev > e.delta) slot.pass = false;
        }
      }
      slots[s] = slot;
    });
    ConcentrationRow row;
    row.n = n;
    row.structures = e.structures;
    row.tuples = ts.tuples.size();
    row.subsampled = ts.subsampled;
    std::size_t pass = 0;
    for (const auto& s : slots) {
      pass += s.pass ? 1 : 0;
      row.worst_deviation = std::max(row.worst_deviation, s.worst);
    }
    row.pass_fraction = static_cast<double>(pass) / static_cast<double>(e.structures);
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace cla
