#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cla/error.hpp"

namespace cla {

// A continuous function [0,1]^t -> [0,1] stored on a tensor grid and
// evaluated by multilinear interpolation. Values are row-major with the last
// axis varying fastest. Arity 0 holds a single constant.
class TabulatedFunction {
 public:
  TabulatedFunction() : values_{0.0} {}

  TabulatedFunction(std::vector<std::vector<double>> grids, std::vector<double> values)
      : grids_(std::move(grids)), values_(std::move(values)) {
    std::size_t expected = 1;
    for (const auto& axis : grids_) {
      if (axis.size() < 2) throw ValidationError("tabulated function: each axis needs at least 2 nodes");
      if (axis.front() != 0.0 || axis.back() != 1.0)
        throw ValidationError("tabulated function: axis nodes must include 0 and 1");
      for (std::size_t i = 1; i < axis.size(); ++i)
        if (!(axis[i] > axis[i - 1])) throw ValidationError("tabulated function: axis nodes must increase");
      expected *= axis.size();
    }
    if (values_.size() != expected)
      throw ValidationError("tabulated function: expected " + std::to_string(expected) + " values, got " +
                            std::to_string(values_.size()));
    for (double v : values_)
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("tabulated function: value outside [0,1]");
  }

  std::size_t arity() const { return grids_.size(); }
  const std::vector<std::vector<double>>& grids() const { return grids_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t point_count() const { return values_.size(); }

  // Grid coordinates of the flat index.
  std::vector<double> point(std::size_t flat) const {
    std::vector<double> r(arity());
    for (std::size_t a = arity(); a-- > 0;) {
      r[a] = grids_[a][flat % grids_[a].size()];
      flat /= grids_[a].size();
    }
    return r;
  }

  double operator()(std::span<const double> x) const {
    const std::size_t t = arity();
    if (x.size() != t)
      throw ValidationError("tabulated function: expected " + std::to_string(t) + " arguments, got " +
                            std::to_string(x.size()));
    if (t == 0) return values_[0];
    // Per axis: lower node index and weight of the upper node.
    std::size_t lower[8];
    double weight[8];
    std::vector<std::size_t> lower_big;
    std::vector<double> weight_big;
    std::size_t* lo = lower;
    double* w = weight;
    if (t > 8) {
      lower_big.resize(t);
      weight_big.resize(t);
      lo = lower_big.data();
      w = weight_big.data();
    }
    for (std::size_t a = 0; a < t; ++a) {
      const auto& nodes = grids_[a];
      const double v = std::clamp(x[a], 0.0, 1.0);
      std::size_t j = static_cast<std::size_t>(std::upper_bound(nodes.begin(), nodes.end(), v) - nodes.begin());
      j = std::clamp<std::size_t>(j, 1, nodes.size() - 1) - 1;
      lo[a] = j;
      w[a] = (v - nodes[j]) / (nodes[j + 1] - nodes[j]);
    }
    double sum = 0.0;
    const std::size_t corners = std::size_t{1} << t;
    for (std::size_t c = 0; c < corners; ++c) {
      double coeff = 1.0;
      std::size_t flat = 0;
      for (std::size_t a = 0; a < t; ++a) {
        const bool upper = (c >> (t - 1 - a)) & 1U;
        coeff *= upper ? w[a] : 1.0 - w[a];
        flat = flat * grids_[a].size() + lo[a] + (upper ? 1 : 0);
      }
      if (coeff != 0.0) sum += coeff * values_[flat];
    }
    return std::clamp(sum, 0.0, 1.0);
  }

  // Largest difference quotient along each axis; the interpolant is
  // Lipschitz in the sup norm with constant equal to the sum.
  std::vector<double> axis_slopes() const {
    std::vector<double> slopes(arity(), 0.0);
    std::vector<std::size_t> stride(arity(), 1);
    for (std::size_t a = arity(); a-- > 1;) stride[a - 1] = stride[a] * grids_[a].size();
    for (std::size_t flat = 0; flat < values_.size(); ++flat) {
      std::size_t rest = flat;
      for (std::size_t a = arity(); a-- > 0;) {
        const std::size_t idx = rest % grids_[a].size();
        rest /= grids_[a].size();
        if (idx + 1 < grids_[a].size()) {
          const double dv = std::abs(values_[flat + stride[a]] - values_[flat]);
          slopes[a] = std::max(slopes[a], dv / (grids_[a][idx + 1] - grids_[a][idx]));
        }
      }
    }
    return slopes;
  }

  // Exact range of the interpolant over a box. On each grid cell the
  // interpolant is multilinear, so extremes sit at points whose coordinates
  // are box endpoints or grid nodes inside the box.
  std::pair<double, double> range(std::span<const std::pair<double, double>> box) const {
    const std::size_t t = arity();
    if (t == 0) return {values_[0], values_[0]};
    std::vector<std::vector<double>> coords(t);
    for (std::size_t a = 0; a < t; ++a) {
      const double lo = std::clamp(box[a].first, 0.0, 1.0);
      const double hi = std::clamp(box[a].second, 0.0, 1.0);
      coords[a].push_back(lo);
      for (double node : grids_[a])
        if (node > lo && node < hi) coords[a].push_back(node);
      if (hi > lo) coords[a].push_back(hi);
    }
    std::vector<std::size_t> idx(t, 0);
    std::vector<double> x(t);
    double mn = 1.0, mx = 0.0;
    while (true) {
      for (std::size_t a = 0; a < t; ++a) x[a] = coords[a][idx[a]];
      const double v = (*this)(x);
      mn = std::min(mn, v);
      mx = std::max(mx, v);
      std::size_t a = t;
      while (a > 0) {
        --a;
        if (++idx[a] < coords[a].size()) break;
        idx[a] = 0;
        if (a == 0) return {mn, mx};
      }
    }
  }

  std::size_t clamped_count() const { return clamped_; }

 private:
  friend TabulatedFunction tabulate(std::vector<std::vector<double>>,
                                    const std::function<double(std::span<const double>)>&);
  std::vector<std::vector<double>> grids_;
  std::vector<double> values_;
  std::size_t clamped_ = 0;
};

inline std::vector<double> uniform_nodes(std::size_t count) {
  if (count < 2) throw ValidationError("uniform grid needs at least 2 nodes");
  std::vector<double> nodes(count);
  for (std::size_t i = 0; i < count; ++i) nodes[i] = static_cast<double>(i) / static_cast<double>(count - 1);
  nodes.back() = 1.0;
  return nodes;
}

// Samples `oracle` at every grid point. Out-of-range oracle values are
// clamped into [0,1] and counted in clamped_count().
inline TabulatedFunction tabulate(std::vector<std::vector<double>> grids,
                                  const std::function<double(std::span<const double>)>& oracle) {
  std::size_t total = 1;
  for (const auto& g : grids) total *= g.size();
  TabulatedFunction probe(grids, std::vector<double>(total, 0.0));
  std::vector<double> values(total);
  std::size_t clamped = 0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    const auto r = probe.point(flat);
    double v = oracle(r);
    if (!(v >= 0.0 && v <= 1.0)) {
      ++clamped;
      v = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
    }
    values[flat] = v;
  }
  TabulatedFunction out(std::move(grids), std::move(values));
  out.clamped_ = clamped;
  return out;
}

}  // namespace cla
