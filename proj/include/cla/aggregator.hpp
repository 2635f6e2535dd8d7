#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "cla/error.hpp"

namespace cla {

enum class AggregatorKind { Min, Max, Mean, External };

// Neumaier-compensated sum. Deterministic for a fixed input order.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) comp_ += (sum_ - t) + v;
    else comp_ += (v - t) + sum_;
    sum_ = t;
  }
  void merge(const CompensatedSum& o) {
    add(o.sum_);
    add(o.comp_);
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// A symmetric function from nonempty finite sequences in [0,1] to [0,1].
// min, max and the arithmetic mean are first-class; external aggregators
// wrap an arbitrary callable and exist for testing the continuity falsifier.
class Aggregator {
 public:
  using Function = std::function<double(std::span<const double>)>;

  static Aggregator min() { return Aggregator(AggregatorKind::Min, "min"); }
  static Aggregator max() { return Aggregator(AggregatorKind::Max, "max"); }
  static Aggregator mean() { return Aggregator(AggregatorKind::Mean, "am"); }
  static Aggregator external(std::string name, Function f) {
    Aggregator a(AggregatorKind::External, std::move(name));
    a.fn_ = std::make_shared<const Function>(std::move(f));
    return a;
  }

  AggregatorKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  bool eliminable() const { return kind_ != AggregatorKind::External; }

  double operator()(std::span<const double> values) const {
    if (values.empty()) throw EmptyAggregation("aggregator " + name_ + " applied to an empty sequence");
    switch (kind_) {
      case AggregatorKind::Min: return *std::min_element(values.begin(), values.end());
      case AggregatorKind::Max: return *std::max_element(values.begin(), values.end());
      case AggregatorKind::Mean: {
        CompensatedSum s;
        for (double v : values) s.add(v);
        return std::clamp(s.value() / static_cast<double>(values.size()), 0.0, 1.0);
      }
      case AggregatorKind::External: return std::clamp((*fn_)(values), 0.0, 1.0);
    }
    return 0.0;
  }
  double operator()(std::initializer_list<double> values) const {
    return (*this)(std::span<const double>(values.begin(), values.size()));
  }

  friend bool operator==(const Aggregator& a, const Aggregator& b) {
    return a.kind_ == b.kind_ && a.name_ == b.name_ && a.fn_ == b.fn_;
  }

 private:
  Aggregator(AggregatorKind kind, std::string name) : kind_(kind), name_(std::move(name)) {}

  AggregatorKind kind_;
  std::string name_;
  std::shared_ptr<const Function> fn_;
};

// 1 if the mean exceeds 0.5, else 0. Symmetric but discontinuous.
inline Aggregator threshold_aggregator() {
  return Aggregator::external("threshold", [](std::span<const double> v) {
    CompensatedSum s;
    for (double x : v) s.add(x);
    return s.value() / static_cast<double>(v.size()) > 0.5 ? 1.0 : 0.0;
  });
}

inline std::optional<Aggregator> find_aggregator(const std::string& name) {
  if (name == "min") return Aggregator::min();
  if (name == "max") return Aggregator::max();
  if (name == "am" || name == "avg" || name == "mean") return Aggregator::mean();
  if (name == "threshold") return threshold_aggregator();
  return std::nullopt;
}

inline Aggregator aggregator(const std::string& name) {
  if (auto a = find_aggregator(name)) return *a;
  throw ValidationError("unknown aggregator '" + name + "'");
}

}  // namespace cla
