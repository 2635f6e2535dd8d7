#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cla/aggregator.hpp"
#include "cla/connective.hpp"
#include "cla/density.hpp"
#include "cla/error.hpp"
#include "cla/parallel.hpp"
#include "cla/random.hpp"

namespace cla {

// Subinterval of [0,1] with independently open or closed ends.
struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  bool lo_open = false;
  bool hi_open = false;

  static Interval closed(double lo, double hi) { return {lo, hi, false, false}; }

  bool empty() const { return hi < lo || (hi == lo && (lo_open || hi_open)); }
  bool contains(double v) const {
    const bool above = lo_open ? v > lo : v >= lo;
    const bool below = hi_open ? v < hi : v <= hi;
    return above && below;
  }
  bool contains(const Range& r) const { return !empty() && contains(r.lo) && contains(r.hi); }
  bool disjoint(const Range& r) const {
    if (empty()) return true;
    const bool left = lo_open ? r.hi <= lo : r.hi < lo;
    const bool right = hi_open ? r.lo >= hi : r.lo > hi;
    return left || right;
  }
};

// Bin i of M equal bins of [0,1]: half-open except the last, which is closed.
inline Interval histogram_bin(std::size_t i, std::size_t bins) {
  const double m = static_cast<double>(bins);
  return {static_cast<double>(i) / m, i + 1 == bins ? 1.0 : static_cast<double>(i + 1) / m, false, i + 1 != bins};
}

enum class Method { Auto, Exact, Quadrature, MonteCarlo };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::Auto: return "auto";
    case Method::Exact: return "exact";
    case Method::Quadrature: return "quadrature";
    case Method::MonteCarlo: return "monte-carlo";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "auto") return Method::Auto;
  if (s == "quadrature" || s == "quad") return Method::Quadrature;
  if (s == "mc" || s == "monte-carlo") return Method::MonteCarlo;
  throw ValidationError("unknown method '" + s + "' (expected auto, quadrature or mc)");
}

struct IntegrationConfig {
  Method method = Method::Auto;
  std::size_t samples = 100000;   // Monte Carlo budget
  std::size_t resolution = 256;   // quadrature cells per axis
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

inline constexpr std::size_t kMaxQuadratureDim = 3;

// Two-sided Hoeffding half-width for the mean of m variables in [0,1].
inline double hoeffding_half_width(std::size_t m, double confidence = 0.99) {
  if (m == 0) return 1.0;
  return std::sqrt(std::log(2.0 / (1.0 - confidence)) / (2.0 * static_cast<double>(m)));
}

struct Estimate {
  double value = 0.0;
  double error = 0.0;
};

namespace detail {

inline void check_quadrature_dim(std::size_t s) {
  if (s > kMaxQuadratureDim)
    throw ValidationError("quadrature supports at most " + std::to_string(kMaxQuadratureDim) + " atoms, got " +
                          std::to_string(s));
}

// Visits every cell of the uniform res^s grid that carries positive mass,
// passing its probability weight, midpoint value and output enclosure. Cells
// are grouped by their first-axis index; each group accumulates into its own
// slot so the merge order does not depend on the thread count.
template <class Acc, class Visit>
std::vector<Acc> visit_cells(const Connective& c, const std::vector<Density>& dens, std::size_t res, unsigned threads,
                             Visit&& visit) {
  const std::size_t s = dens.size();
  const double h = 1.0 / static_cast<double>(res);
  std::vector<std::vector<double>> w(s, std::vector<double>(res));
  for (std::size_t j = 0; j < s; ++j)
    for (std::size_t i = 0; i < res; ++i) w[j][i] = dens[j].mass(static_cast<double>(i) * h, static_cast<double>(i + 1) * h);
  std::vector<Acc> slots(res);
  parallel_for(res, threads, [&](std::size_t first) {
    if (w[0][first] == 0.0) return;
    std::vector<std::size_t> idx(s, 0);
    idx[0] = first;
    std::vector<double> mid(s);
    std::vector<Range> box(s);
    while (true) {
      double weight = 1.0;
      for (std::size_t j = 0; j < s; ++j) weight *= w[j][idx[j]];
      if (weight > 0.0) {
        for (std::size_t j = 0; j < s; ++j) {
          box[j] = {static_cast<double>(idx[j]) * h, static_cast<double>(idx[j] + 1) * h};
          mid[j] = (static_cast<double>(idx[j]) + 0.5) * h;
        }
        visit(slots[first], weight, c.eval_unchecked(mid), c.range(box));
      }
      std::size_t a = s;
      while (a > 1) {
        --a;
        if (++idx[a] < res) break;
        idx[a] = 0;
        if (a == 1) return;
      }
      if (s == 1) return;
    }
  });
  return slots;
}

struct ProbAcc {
  CompensatedSum value, error;
};

}  // namespace detail

// P(C(r) in J) for independent r_j with the given densities, by tensor
// quadrature. Cells whose output enclosure lies inside or outside J count
// exactly; the remaining cells are decided by their midpoint and their mass
// is the reported error bound.
inline Estimate prob_quadrature(const Connective& c, const std::vector<Density>& dens, const Interval& j,
                                std::size_t res, unsigned threads = 1) {
  detail::check_quadrature_dim(dens.size());
  if (dens.empty()) return {j.contains(c({})) ? 1.0 : 0.0, 0.0};
  auto slots = detail::visit_cells<detail::ProbAcc>(c, dens, res, threads,
                                                    [&](detail::ProbAcc& acc, double w, double mid, const Range& r) {
                                                      if (j.contains(r)) {
                                                        acc.value.add(w);
                                                      } else if (!j.disjoint(r)) {
                                                        if (j.contains(mid)) acc.value.add(w);
                                                        acc.error.add(w);
                                                      }
                                                    });
  CompensatedSum v, e;
  for (const auto& s : slots) {
    v.merge(s.value);
    e.merge(s.error);
  }
  return {std::clamp(v.value(), 0.0, 1.0), std::min(1.0, e.value())};
}

// E[C(r)] by the midpoint rule on the same grid; the error bound is the
// weighted width of the output enclosures.
inline Estimate mean_quadrature(const Connective& c, const std::vector<Density>& dens, std::size_t res,
                                unsigned threads = 1) {
  detail::check_quadrature_dim(dens.size());
  if (dens.empty()) return {c({}), 0.0};
  auto slots = detail::visit_cells<detail::ProbAcc>(c, dens, res, threads,
                                                    [&](detail::ProbAcc& acc, double w, double mid, const Range& r) {
                                                      acc.value.add(w * mid);
                                                      acc.error.add(w * std::max(mid - r.lo, r.hi - mid));
                                                    });
  CompensatedSum v, e;
  for (const auto& s : slots) {
    v.merge(s.value);
    e.merge(s.error);
  }
  return {std::clamp(v.value(), 0.0, 1.0), e.value()};
}

namespace detail {

inline constexpr std::size_t kBatches = 64;

// Runs `draw` for every sample, split into a fixed number of independently
// seeded batches; batch results are merged in batch order.
template <class Acc, class Draw>
std::vector<Acc> monte_carlo_batches(std::size_t samples, std::uint64_t seed, unsigned threads, Draw&& draw) {
  std::vector<Acc> slots(kBatches);
  parallel_for(kBatches, threads, [&](std::size_t b) {
    Stream rng(derive_seed(seed, {b}));
    const std::size_t begin = samples * b / kBatches;
    const std::size_t end = samples * (b + 1) / kBatches;
    for (std::size_t i = begin; i < end; ++i) draw(slots[b], rng);
  });
  return slots;
}

inline void draw_point(const std::vector<Density>& dens, Stream& rng, std::vector<double>& r) {
  for (std::size_t j = 0; j < dens.size(); ++j) r[j] = dens[j].sample(rng);
}

}  // namespace detail

// Monte Carlo estimate of P(C(r) in J) with a 99% Hoeffding half-width.
inline Estimate prob_monte_carlo(const Connective& c, const std::vector<Density>& dens, const Interval& j,
                                 std::size_t samples, std::uint64_t seed, unsigned threads = 1) {
  if (samples == 0) throw ValidationError("Monte Carlo budget must be positive");
  auto slots = detail::monte_carlo_batches<std::size_t>(samples, seed, threads, [&](std::size_t& hits, Stream& rng) {
    thread_local std::vector<double> r;
    r.resize(dens.size());
    detail::draw_point(dens, rng, r);
    if (j.contains(c.eval_unchecked(r))) ++hits;
  });
  std::size_t hits = 0;
  for (auto h : slots) hits += h;
  return {static_cast<double>(hits) / static_cast<double>(samples), hoeffding_half_width(samples)};
}

inline Estimate mean_monte_carlo(const Connective& c, const std::vector<Density>& dens, std::size_t samples,
                                 std::uint64_t seed, unsigned threads = 1) {
  if (samples == 0) throw ValidationError("Monte Carlo budget must be positive");
  auto slots = detail::monte_carlo_batches<CompensatedSum>(samples, seed, threads, [&](CompensatedSum& acc, Stream& rng) {
    thread_local std::vector<double> r;
    r.resize(dens.size());
    detail::draw_point(dens, rng, r);
    acc.add(c.eval_unchecked(r));
  });
  CompensatedSum total;
  for (const auto& s : slots) total.merge(s);
  return {std::clamp(total.value() / static_cast<double>(samples), 0.0, 1.0), hoeffding_half_width(samples)};
}

// F applied to `samples` draws of C(r). Used for the generic aggregator path.
inline double aggregate_draws(const Aggregator& f, const Connective& c, const std::vector<Density>& dens,
                              std::size_t samples, std::uint64_t seed) {
  Stream rng(seed);
  std::vector<double> values(samples);
  std::vector<double> r(dens.size());
  for (auto& v : values) {
    detail::draw_point(dens, rng, r);
    v = c.eval_unchecked(r);
  }
  return f(values);
}

struct Extremum {
  double value = 0.0;  // attained at a lattice point of the support
  double bound = 0.0;  // enclosure of the true extremum on the other side
};

// Essential supremum (or infimum) of C(r) for r drawn from the product of
// the densities: the extremum of C over the product of the closed supports.
// The supports are scanned on a lattice of spacing 1/resolution; interval
// enclosures of the lattice cells give the other side of the bracket.
inline Extremum essential_extremum(const Connective& c, const std::vector<Density>& dens, bool supremum,
                                   std::size_t resolution, unsigned threads = 1) {
  detail::check_quadrature_dim(dens.size());
  const std::size_t s = dens.size();
  if (s == 0) {
    const double v = c({});
    return {v, v};
  }
  const double h = 1.0 / static_cast<double>(resolution);
  // Per axis: lattice points and, for each cell, whether its two ends lie in
  // the same support interval.
  std::vector<std::vector<double>> pts(s);
  std::vector<std::vector<char>> joined(s);
  for (std::size_t j = 0; j < s; ++j) {
    for (const auto& [a, b] : dens[j].support()) {
      const std::size_t start = pts[j].size();
      const std::size_t steps = static_cast<std::size_t>(std::ceil((b - a) / h - 1e-9));
      for (std::size_t i = 0; i < steps; ++i) pts[j].push_back(std::min(b, a + static_cast<double>(i) * h));
      pts[j].push_back(b);
      for (std::size_t i = start; i + 1 < pts[j].size(); ++i) joined[j].push_back(1);
      joined[j].push_back(0);
    }
  }
  const double init = supremum ? 0.0 : 1.0;
  auto better = [&](double a, double b) { return supremum ? std::max(a, b) : std::min(a, b); };
  struct Acc {
    double value, bound;
  };
  std::vector<Acc> slots(pts[0].size(), Acc{init, init});
  parallel_for(pts[0].size(), threads, [&](std::size_t first) {
    Acc acc{init, init};
    std::vector<std::size_t> idx(s, 0);
    idx[0] = first;
    std::vector<double> x(s);
    std::vector<Range> box(s);
    while (true) {
      for (std::size_t j = 0; j < s; ++j) x[j] = pts[j][idx[j]];
      const double v = c.eval_unchecked(x);
      acc.value = better(acc.value, v);
      acc.bound = better(acc.bound, v);
      bool cell = true;
      for (std::size_t j = 0; j < s && cell; ++j) cell = joined[j][idx[j]] != 0;
      if (cell) {
        for (std::size_t j = 0; j < s; ++j) box[j] = {pts[j][idx[j]], pts[j][idx[j] + 1]};
        const Range r = c.range(box);
        acc.bound = better(acc.bound, supremum ? r.hi : r.lo);
      }
      std::size_t a = s;
      bool done = s == 1;
      while (a > 1) {
        --a;
        if (++idx[a] < pts[a].size()) break;
        idx[a] = 0;
        if (a == 1) done = true;
      }
      if (done) break;
    }
    slots[first] = acc;
  });
  Acc total{init, init};
  for (const auto& a : slots) {
    total.value = better(total.value, a.value);
    total.bound = better(total.bound, a.bound);
  }
  return {total.value, total.bound};
}

}  // namespace cla
