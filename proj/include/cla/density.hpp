#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cla/error.hpp"
#include "cla/pattern.hpp"
#include "cla/random.hpp"
#include "cla/signature.hpp"

namespace cla {

namespace poly {

// Coefficients in the monomial basis, lowest degree first.
inline double eval(const std::vector<double>& c, double x) {
  double v = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
  return v;
}

inline std::vector<double> antiderivative(const std::vector<double>& c) {
  std::vector<double> out(c.size() + 1, 0.0);
  for (std::size_t i = 0; i < c.size(); ++i) out[i + 1] = c[i] / static_cast<double>(i + 1);
  return out;
}

inline std::vector<double> derivative(const std::vector<double>& c) {
  if (c.size() <= 1) return {0.0};
  std::vector<double> out(c.size() - 1);
  for (std::size_t i = 1; i < c.size(); ++i) out[i - 1] = c[i] * static_cast<double>(i);
  return out;
}

// Roots of c in [lo, hi] found by sign changes on a fine grid, refined by
// bisection. Double roots that only touch zero are found through the
// derivative by the caller.
inline std::vector<double> roots_in(const std::vector<double>& c, double lo, double hi, std::size_t grid = 512) {
  std::vector<double> out;
  double a = lo;
  double fa = eval(c, a);
  if (fa == 0.0) out.push_back(a);
  for (std::size_t i = 1; i <= grid; ++i) {
    const double b = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid);
    const double fb = eval(c, b);
    if (fb == 0.0) {
      out.push_back(b);
    } else if (fa != 0.0 && (fa < 0.0) != (fb < 0.0)) {
      double l = a, r = b, fl = fa;
      for (int it = 0; it < 200 && r - l > 1e-15; ++it) {
        const double m = 0.5 * (l + r);
        const double fm = eval(c, m);
        if ((fm < 0.0) == (fl < 0.0)) {
          l = m;
          fl = fm;
        } else {
          r = m;
        }
      }
      out.push_back(0.5 * (l + r));
    }
    a = b;
    fa = fb;
  }
  return out;
}

}  // namespace poly

enum class DensityKind { Uniform, Polynomial, Piecewise };

// Continuous probability density on [0,1], piecewise polynomial. Construction
// validates continuity and nonnegativity and rescales to total mass 1.
class Density {
 public:
  Density() : Density(uniform()) {}

  static Density uniform() { return Density(DensityKind::Uniform, {0.0, 1.0}, {{1.0}}); }
  static Density polynomial(std::vector<double> coeffs) {
    return Density(DensityKind::Polynomial, {0.0, 1.0}, {std::move(coeffs)});
  }
  static Density piecewise(std::vector<double> breakpoints, std::vector<std::vector<double>> pieces) {
    return Density(DensityKind::Piecewise, std::move(breakpoints), std::move(pieces));
  }

  DensityKind kind() const { return kind_; }
  const std::vector<double>& breakpoints() const { return breaks_; }
  // Normalized coefficients per piece.
  const std::vector<std::vector<double>>& pieces() const { return pieces_; }
  // Mass of the input before normalization.
  double input_mass() const { return input_mass_; }

  double pdf(double x) const {
    if (x < 0.0 || x > 1.0) return 0.0;
    return std::max(0.0, poly::eval(pieces_[piece_of(x)], x));
  }

  double cdf(double x) const {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    if (kind_ == DensityKind::Uniform) return x;
    const std::size_t i = piece_of(x);
    const double v = cum_[i] + poly::eval(anti_[i], x) - poly::eval(anti_[i], breaks_[i]);
    return std::clamp(v, 0.0, 1.0);
  }

  // Probability of [a, b].
  double mass(double a, double b) const {
    if (b <= a) return 0.0;
    return std::max(0.0, cdf(b) - cdf(a));
  }

  // Inverse CDF: the smallest x with cdf(x) >= u, to 1e-12.
  double quantile(double u) const {
    if (kind_ == DensityKind::Uniform) return std::clamp(u, 0.0, 1.0);
    if (u <= 0.0) return support().front().first;
    if (u >= 1.0) return support().back().second;
    double lo = 0.0, hi = 1.0;
    while (hi - lo > 1e-12) {
      const double m = 0.5 * (lo + hi);
      if (cdf(m) < u) lo = m;
      else hi = m;
    }
    return 0.5 * (lo + hi);
  }

  double sample(Stream& s) const { return quantile(s.uniform()); }

  // Closure of {x : pdf(x) > 0} as disjoint closed intervals in increasing
  // order. A nonnegative polynomial that is not identically zero vanishes only
  // at finitely many points, so a piece belongs to the support unless it is
  // the zero polynomial.
  const std::vector<std::pair<double, double>>& support() const { return support_; }

  bool in_support(double x) const {
    for (const auto& [a, b] : support_)
      if (x >= a && x <= b) return true;
    return false;
  }

 private:
  Density(DensityKind kind, std::vector<double> breaks, std::vector<std::vector<double>> pieces)
      : kind_(kind), breaks_(std::move(breaks)), pieces_(std::move(pieces)) {
    validate();
  }

  std::size_t piece_of(double x) const {
    auto it = std::upper_bound(breaks_.begin() + 1, breaks_.end() - 1, x);
    return static_cast<std::size_t>(it - (breaks_.begin() + 1));
  }

  void validate() {
    if (breaks_.size() < 2 || breaks_.front() != 0.0 || breaks_.back() != 1.0)
      throw ValidationError("density: breakpoints must start at 0 and end at 1");
    for (std::size_t i = 1; i < breaks_.size(); ++i)
      if (!(breaks_[i] > breaks_[i - 1])) throw ValidationError("density: breakpoints must be strictly increasing");
    if (pieces_.size() + 1 != breaks_.size())
      throw ValidationError("density: " + std::to_string(breaks_.size()) + " breakpoints need " +
                            std::to_string(breaks_.size() - 1) + " pieces, got " + std::to_string(pieces_.size()));
    double scale = 0.0;
    for (auto& c : pieces_) {
      if (c.empty()) c = {0.0};
      for (double v : c) {
        if (!std::isfinite(v)) throw ValidationError("density: non-finite coefficient");
        scale = std::max(scale, std::abs(v));
      }
    }
    const double tol = 1e-9 * std::max(1.0, scale);
    for (std::size_t i = 1; i + 1 < breaks_.size(); ++i) {
      const double left = poly::eval(pieces_[i - 1], breaks_[i]);
      const double right = poly::eval(pieces_[i], breaks_[i]);
      if (std::abs(left - right) > tol)
        throw ValidationError("density: discontinuity at breakpoint " + std::to_string(breaks_[i]) + " (" +
                              std::to_string(left) + " vs " + std::to_string(right) + ")");
    }
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      const double lo = breaks_[i], hi = breaks_[i + 1];
      double minimum = std::min(poly::eval(pieces_[i], lo), poly::eval(pieces_[i], hi));
      for (int k = 0; k <= 256; ++k) minimum = std::min(minimum, poly::eval(pieces_[i], lo + (hi - lo) * k / 256.0));
      for (double r : poly::roots_in(poly::derivative(pieces_[i]), lo, hi))
        minimum = std::min(minimum, poly::eval(pieces_[i], r));
      if (minimum < -tol)
        throw ValidationError("density: negative value " + std::to_string(minimum) + " on [" + std::to_string(lo) +
                              ", " + std::to_string(hi) + "]");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      const auto a = poly::antiderivative(pieces_[i]);
      total += poly::eval(a, breaks_[i + 1]) - poly::eval(a, breaks_[i]);
    }
    if (!(total > 1e-12)) throw ValidationError("density: total mass is zero");
    input_mass_ = total;
    if (total != 1.0)
      for (auto& c : pieces_)
        for (double& v : c) v /= total;

    cum_.assign(pieces_.size(), 0.0);
    anti_.clear();
    double acc = 0.0;
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      anti_.push_back(poly::antiderivative(pieces_[i]));
      cum_[i] = acc;
      acc += poly::eval(anti_[i], breaks_[i + 1]) - poly::eval(anti_[i], breaks_[i]);
    }

    support_.clear();
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      const bool zero = std::all_of(pieces_[i].begin(), pieces_[i].end(), [](double v) { return v == 0.0; });
      if (zero) continue;
      if (!support_.empty() && support_.back().second == breaks_[i]) support_.back().second = breaks_[i + 1];
      else support_.emplace_back(breaks_[i], breaks_[i + 1]);
    }
    if (support_.empty()) throw ValidationError("density: empty support");
  }

  DensityKind kind_;
  std::vector<double> breaks_;
  std::vector<std::vector<double>> pieces_;
  std::vector<std::vector<double>> anti_;
  std::vector<double> cum_;
  std::vector<std::pair<double, double>> support_;
  double input_mass_ = 1.0;
};

// Table of densities keyed by (relation, identity pattern of the argument
// tuple). Keys not in the table get the uniform density.
class DensityModel {
 public:
  DensityModel() = default;
  explicit DensityModel(Signature sig) : sig_(std::move(sig)) {}

  const Signature& signature() const { return sig_; }

  void set(const std::string& relation, const IdentityPattern& p, Density d) {
    const std::size_t arity = sig_.arity(relation);
    if (p.size() != arity)
      throw ValidationError("density model: pattern " + p.to_string() + " has size " + std::to_string(p.size()) +
                            " but " + relation + " has arity " + std::to_string(arity));
    table_[{relation, p.labels()}] = std::move(d);
  }

  const Density& density(const std::string& relation, const IdentityPattern& p) const {
    auto it = table_.find({relation, p.labels()});
    return it == table_.end() ? uniform_ : it->second;
  }

  bool has(const std::string& relation, const IdentityPattern& p) const {
    return table_.count({relation, p.labels()}) != 0;
  }

  // Explicit entries in key order.
  std::vector<std::pair<std::pair<std::string, IdentityPattern>, Density>> entries() const {
    std::vector<std::pair<std::pair<std::string, IdentityPattern>, Density>> out;
    for (const auto& [k, d] : table_) out.push_back({{k.first, IdentityPattern::from_labels(k.second)}, d});
    return out;
  }

 private:
  Signature sig_;
  std::map<std::pair<std::string, std::vector<int>>, Density> table_;
  Density uniform_ = Density::uniform();
};

}  // namespace cla
