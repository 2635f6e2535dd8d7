#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "cla/aggregator.hpp"
#include "cla/random.hpp"

namespace cla {

struct ContinuityParams {
  double epsilon = 0.1;
  double delta = 0.01;
  std::size_t bins = 20;        // M
  std::size_t min_length = 500; // N
  std::size_t trials = 10000;
  std::uint64_t seed = 1;
};

struct ContinuityWitness {
  int condition = 2;  // 1: pointwise, 2: histogram
  std::vector<double> first;
  std::vector<double> second;
  std::vector<double> profile;             // alpha_0..alpha_{M-1}; empty for condition 1
  std::vector<std::size_t> first_counts;   // closed-bin counts
  std::vector<std::size_t> second_counts;
  double gap = 0.0;
};

struct ContinuityReport {
  bool falsified = false;
  std::optional<ContinuityWitness> witness;
  ContinuityParams params;
  std::size_t trials_run = 0;
  std::size_t rejected_candidates = 0;  // generated pairs that failed the preconditions
};

// Number of entries in each closed bin [i/M, (i+1)/M]. A value on a bin
// boundary is counted in both neighbouring bins.
inline std::vector<std::size_t> closed_bin_counts(const std::vector<double>& q, std::size_t bins) {
  std::vector<std::size_t> counts(bins, 0);
  const double m = static_cast<double>(bins);
  for (double v : q) {
    for (std::size_t i = 0; i < bins; ++i) {
      if (v >= static_cast<double>(i) / m && v <= static_cast<double>(i + 1) / m) ++counts[i];
    }
  }
  return counts;
}

// Checks the histogram preconditions for a pair of sequences against the
// profile alpha: both long enough, bin proportions within delta of alpha,
// and no mass in zero bins lying between or beside positive ones.
inline bool satisfies_histogram_conditions(const std::vector<double>& q, const std::vector<double>& q2,
                                           const std::vector<double>& alpha, double delta, std::size_t bins,
                                           std::size_t min_length) {
  if (alpha.size() != bins) return false;
  // length
  if (q.size() < min_length || q2.size() < min_length) return false;
  const auto c1 = closed_bin_counts(q, bins);
  const auto c2 = closed_bin_counts(q2, bins);
  const double n1 = static_cast<double>(q.size());
  const double n2 = static_cast<double>(q2.size());
  // proportions
  for (std::size_t i = 0; i < bins; ++i) {
    if (alpha[i] < 0.0 || alpha[i] > 1.0) return false;
    if (alpha[i] > 0.0 && !(alpha[i] > delta)) return false;
    const double p1 = static_cast<double>(c1[i]) / n1;
    const double p2 = static_cast<double>(c2[i]) / n2;
    if (!(p1 > alpha[i] - delta && p1 < alpha[i] + delta)) return false;
    if (!(p2 > alpha[i] - delta && p2 < alpha[i] + delta)) return false;
  }
  // gaps, in both directions
  for (std::size_t i = 0; i < bins; ++i) {
    for (std::size_t j = 0; j < bins; ++j) {
      for (std::size_t k = 0; k < bins; ++k) {
        const bool between = (i < j && j < k) || (i > j && j > k);
        if (!between) continue;
        if (alpha[i] > 0.0 && alpha[j] == 0.0 && alpha[k] > 0.0) return false;
        if (alpha[i] == 0.0 && alpha[j] == 0.0 && alpha[k] > 0.0 && (c1[i] != 0 || c2[i] != 0)) return false;
      }
    }
  }
  return true;
}

// Pointwise precondition: equal lengths and sup-distance at most delta.
inline bool satisfies_pointwise_condition(const std::vector<double>& q, const std::vector<double>& q2, double delta) {
  if (q.size() != q2.size() || q.empty()) return false;
  for (std::size_t i = 0; i < q.size(); ++i)
    if (std::abs(q[i] - q2[i]) > delta) return false;
  return true;
}

// Re-checks a witness against the parameters it was found with.
inline bool witness_is_valid(const Aggregator& agg, const ContinuityWitness& w, const ContinuityParams& p) {
  const double gap = std::abs(agg(w.first) - agg(w.second));
  if (!(gap > p.epsilon)) return false;
  if (w.condition == 1) return satisfies_pointwise_condition(w.first, w.second, p.delta);
  return satisfies_histogram_conditions(w.first, w.second, w.profile, p.delta, p.bins, p.min_length);
}

namespace detail {

enum class Placement { Low, High, Random };

inline double place_in_bin(std::size_t bin, std::size_t bins, Placement how, Stream& rng) {
  const double width = 1.0 / static_cast<double>(bins);
  const double lo = static_cast<double>(bin) * width;
  const double inset = width * 1e-6;
  switch (how) {
    case Placement::Low: return lo + inset;
    case Placement::High: return lo + width - inset;
    case Placement::Random: return lo + inset + (width - 2 * inset) * rng.uniform();
  }
  return lo + 0.5 * width;
}

// Fills a sequence of the given length with counts[i] entries in the interior
// of bin i.
inline std::vector<double> fill_bins(const std::vector<std::size_t>& counts, std::size_t bins, Placement how,
                                     Stream& rng) {
  std::vector<double> q;
  for (std::size_t i = 0; i < bins; ++i)
    for (std::size_t c = 0; c < counts[i]; ++c) q.push_back(place_in_bin(i, bins, how, rng));
  return q;
}

// Counts for a sequence of length `length` following alpha, optionally with a
// few entries in the zero bins adjacent to the positive block.
inline std::vector<std::size_t> profile_counts(const std::vector<double>& alpha, std::size_t first, std::size_t last,
                                               std::size_t length, double delta, Stream& rng) {
  const std::size_t bins = alpha.size();
  std::vector<std::size_t> counts(bins, 0);
  const std::size_t spare = static_cast<std::size_t>(std::floor(0.5 * delta * static_cast<double>(length)));
  std::size_t extra_lo = 0, extra_hi = 0;
  if (first > 0 && spare > 0 && rng.uniform() < 0.5) extra_lo = rng.below(spare + 1);
  if (last + 1 < bins && spare > 0 && rng.uniform() < 0.5) extra_hi = rng.below(spare + 1);
  const std::size_t body = length - extra_lo - extra_hi;
  std::size_t used = 0;
  std::size_t largest = first;
  for (std::size_t i = first; i <= last; ++i) {
    counts[i] = static_cast<std::size_t>(std::llround(alpha[i] * static_cast<double>(body)));
    used += counts[i];
    if (alpha[i] > alpha[largest]) largest = i;
  }
  if (used > body) counts[largest] -= std::min(counts[largest], used - body);
  else counts[largest] += body - used;
  if (extra_lo) counts[first - 1] = extra_lo;
  if (extra_hi) counts[last + 1] = extra_hi;
  return counts;
}

}  // namespace detail

// Randomized search for a violation of either continuity condition. A
// falsified verdict carries a re-checkable witness; the opposite verdict only
// means the search found nothing.
inline ContinuityReport falsify_continuity(const Aggregator& agg, const ContinuityParams& params) {
  using detail::Placement;
  ContinuityReport report;
  report.params = params;
  const std::size_t bins = params.bins;
  const std::size_t min_len = std::max<std::size_t>(params.min_length, 1);
  const double delta = params.delta;

  for (std::size_t trial = 0; trial < params.trials; ++trial) {
    report.trials_run = trial + 1;
    Stream rng(derive_seed(params.seed, {trial}));

    // two long sequences sharing a histogram profile
    {
      std::size_t max_block = bins;
      while (max_block > 1 && 1.5 * delta * static_cast<double>(max_block) >= 1.0) --max_block;
      const std::size_t first = rng.below(bins);
      const std::size_t cap = std::min(bins - first, max_block);
      const std::size_t len = rng.uniform() < 0.5 ? 1 + rng.below(std::min<std::size_t>(cap, 3)) : 1 + rng.below(cap);
      const std::size_t last = first + len - 1;
      std::vector<double> alpha(bins, 0.0);
      std::vector<double> w(len);
      double wsum = 0.0;
      for (auto& x : w) wsum += (x = rng.uniform() + 1e-3);
      const double floor_mass = 1.5 * delta;
      const double free_mass = 1.0 - floor_mass * static_cast<double>(len);
      for (std::size_t i = 0; i < len; ++i) alpha[first + i] = floor_mass + free_mass * w[i] / wsum;

      const std::size_t n1 = min_len + rng.below(min_len + 1);
      const std::size_t n2 = min_len + rng.below(min_len + 1);
      const auto c1 = detail::profile_counts(alpha, first, last, n1, delta, rng);
      const auto c2 = detail::profile_counts(alpha, first, last, n2, delta, rng);
      static constexpr Placement pairs[][2] = {{Placement::Low, Placement::High},
                                               {Placement::High, Placement::Low},
                                               {Placement::Random, Placement::Random},
                                               {Placement::Low, Placement::Random},
                                               {Placement::Random, Placement::High}};
      const auto& how = pairs[rng.below(std::size(pairs))];
      auto q1 = detail::fill_bins(c1, bins, how[0], rng);
      auto q2 = detail::fill_bins(c2, bins, how[1], rng);
      std::shuffle(q1.begin(), q1.end(), rng.engine());
      std::shuffle(q2.begin(), q2.end(), rng.engine());
      if (!satisfies_histogram_conditions(q1, q2, alpha, delta, bins, min_len)) {
        ++report.rejected_candidates;
      } else {
        const double gap = std::abs(agg(q1) - agg(q2));
        if (gap > params.epsilon) {
          ContinuityWitness wit{2, std::move(q1), std::move(q2), alpha, {}, {}, gap};
          wit.first_counts = closed_bin_counts(wit.first, bins);
          wit.second_counts = closed_bin_counts(wit.second, bins);
          report.falsified = true;
          report.witness = std::move(wit);
          return report;
        }
      }
    }

    // equal-length sequences within sup-distance delta
    {
      const std::size_t len = 1 + rng.below(2 * min_len);
      const double centre = rng.uniform();
      const double spread = rng.uniform() < 0.5 ? 2.0 * delta : rng.uniform();
      std::vector<double> q1(len), q2(len);
      const int mode = static_cast<int>(rng.below(3));
      for (std::size_t i = 0; i < len; ++i) {
        q1[i] = std::clamp(centre + spread * (rng.uniform() - 0.5), 0.0, 1.0);
        double shift = 0.0;
        if (mode == 0) shift = delta;
        else if (mode == 1) shift = -delta;
        else shift = delta * (2.0 * rng.uniform() - 1.0);
        q2[i] = std::clamp(q1[i] + shift, 0.0, 1.0);
        if (std::abs(q2[i] - q1[i]) > delta) q2[i] = q1[i];
      }
      const double gap = std::abs(agg(q1) - agg(q2));
      if (gap > params.epsilon) {
        report.falsified = true;
        report.witness = ContinuityWitness{1, std::move(q1), std::move(q2), {}, {}, {}, gap};
        return report;
      }
    }
  }
  return report;
}

}  // namespace cla
