#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cla/density.hpp"
#include "cla/error.hpp"
#include "cla/parallel.hpp"
#include "cla/pattern.hpp"
#include "cla/random.hpp"
#include "cla/signature.hpp"

namespace cla {

using Element = std::size_t;  // domain elements are 1..n
using Tuple = std::vector<Element>;

inline std::uint64_t ipow(std::uint64_t base, std::size_t exp) {
  std::uint64_t r = 1;
  for (std::size_t i = 0; i < exp; ++i) r *= base;
  return r;
}

// A member of W_n: for each relation a dense row-major array over [n]^arity.
class ContinuousStructure {
 public:
  ContinuousStructure() = default;
  ContinuousStructure(std::size_t n, Signature sig) : n_(n), sig_(std::move(sig)) {
    if (n_ < 1) throw ValidationError("structure: domain size must be at least 1");
    for (const auto& r : sig_.relations()) data_.emplace_back(ipow(n_, r.arity), 0.0);
  }

  std::size_t n() const { return n_; }
  const Signature& signature() const { return sig_; }

  std::span<const double> values(std::size_t relation) const { return data_.at(relation); }
  std::span<double> values(std::size_t relation) { return data_.at(relation); }

  // Row-major offset of a 1-based tuple.
  std::size_t offset(std::size_t relation, std::span<const Element> tuple) const {
    const std::size_t arity = sig_.relations()[relation].arity;
    if (tuple.size() != arity)
      throw ValidationError("structure: relation " + sig_.relations()[relation].name + " expects " +
                            std::to_string(arity) + " elements");
    std::size_t off = 0;
    for (Element a : tuple) {
      if (a < 1 || a > n_) throw ValidationError("structure: element " + std::to_string(a) + " outside 1.." + std::to_string(n_));
      off = off * n_ + (a - 1);
    }
    return off;
  }

  double value(std::size_t relation, std::span<const Element> tuple) const {
    return data_[relation][offset(relation, tuple)];
  }
  double value(const std::string& relation, const Tuple& tuple) const { return value(sig_.index_of(relation), tuple); }

  void set(std::size_t relation, std::span<const Element> tuple, double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("structure: value outside [0,1]");
    data_[relation][offset(relation, tuple)] = v;
  }
  void set(const std::string& relation, const Tuple& tuple, double v) { set(sig_.index_of(relation), tuple, v); }

  friend bool operator==(const ContinuousStructure& a, const ContinuousStructure& b) {
    return a.n_ == b.n_ && a.sig_.relations() == b.sig_.relations() && a.data_ == b.data_;
  }

 private:
  std::size_t n_ = 0;
  Signature sig_;
  std::vector<std::vector<double>> data_;
};

// Decodes a row-major offset into a 1-based tuple.
inline Tuple tuple_at(std::size_t offset, std::size_t arity, std::size_t n) {
  Tuple t(arity);
  for (std::size_t i = arity; i-- > 0;) {
    t[i] = offset % n + 1;
    offset /= n;
  }
  return t;
}

struct Cell {
  std::size_t relation = 0;  // index in the signature
  Tuple tuple;
  friend bool operator==(const Cell&, const Cell&) = default;
};

namespace detail {

// Number of tuples in [m]^len whose maximum is exactly m, when `has_max`
// says whether the maximum already occurred in a fixed prefix.
inline std::uint64_t completions(std::uint64_t m, std::size_t len, bool has_max) {
  if (has_max) return ipow(m, len);
  return ipow(m, len) - (m == 0 ? 0 : ipow(m - 1, len));
}

}  // namespace detail

// The canonical order on cells: by maximum element, then relation name, then
// lexicographically by tuple. The rank of a cell does not depend on n, so the
// order for n is the restriction of the order for any larger domain and the
// cells for n occupy ranks 0..cell_count(n)-1.
inline std::uint64_t cell_index(const Signature& sig, std::size_t relation, std::span<const Element> tuple) {
  std::uint64_t m = 0;
  for (Element a : tuple) m = std::max<std::uint64_t>(m, a);
  std::uint64_t idx = 0;
  for (const auto& r : sig.relations()) idx += ipow(m - 1, r.arity);
  for (std::size_t i = 0; i < relation; ++i) idx += detail::completions(m, sig.relations()[i].arity, false);
  bool has_max = false;
  for (std::size_t i = 0; i < tuple.size(); ++i) {
    const std::size_t rest = tuple.size() - i - 1;
    idx += (tuple[i] - 1) * detail::completions(m, rest, has_max);
    has_max = has_max || tuple[i] == m;
  }
  return idx;
}

// Number of cells of W_n: sum over relations of n^arity.
inline std::uint64_t cell_count(const Signature& sig, std::size_t n) {
  std::uint64_t total = 0;
  for (const auto& r : sig.relations()) total += ipow(n, r.arity);
  return total;
}

// Inverse of cell_index.
inline Cell cell_at(const Signature& sig, std::uint64_t index) {
  std::uint64_t m = 1;
  while (cell_count(sig, m) <= index) ++m;
  std::uint64_t rest = index - cell_count(sig, m - 1);
  Cell c;
  for (std::size_t r = 0; r < sig.size(); ++r) {
    const std::uint64_t here = detail::completions(m, sig.relations()[r].arity, false);
    if (rest < here) {
      c.relation = r;
      break;
    }
    rest -= here;
  }
  const std::size_t arity = sig.relations()[c.relation].arity;
  bool has_max = false;
  for (std::size_t i = 0; i < arity; ++i) {
    const std::size_t left = arity - i - 1;
    for (std::uint64_t v = 1; v <= m; ++v) {
      const std::uint64_t cnt = detail::completions(m, left, has_max || v == m);
      if (rest < cnt) {
        c.tuple.push_back(v);
        has_max = has_max || v == m;
        break;
      }
      rest -= cnt;
    }
  }
  return c;
}

// Cell list of W_n in canonical order.
class FlatLayout {
 public:
  FlatLayout(std::size_t n, Signature sig) : n_(n), sig_(std::move(sig)) {
    if (n_ < 1) throw ValidationError("layout: n must be at least 1");
  }

  std::size_t n() const { return n_; }
  const Signature& signature() const { return sig_; }
  std::uint64_t size() const { return cell_count(sig_, n_); }
  Cell cell(std::uint64_t i) const {
    if (i >= size()) throw ValidationError("layout: cell index out of range");
    return cell_at(sig_, i);
  }
  std::uint64_t index_of(std::size_t relation, std::span<const Element> tuple) const {
    return cell_index(sig_, relation, tuple);
  }
  std::vector<Cell> cells() const {
    std::vector<Cell> out;
    out.reserve(size());
    for (std::size_t m = 1; m <= n_; ++m) {
      for (std::size_t r = 0; r < sig_.size(); ++r) {
        const std::size_t arity = sig_.relations()[r].arity;
        const std::uint64_t total = ipow(m, arity);
        for (std::uint64_t off = 0; off < total; ++off) {
          Tuple t = tuple_at(off, arity, m);
          if (*std::max_element(t.begin(), t.end()) == m) out.push_back({r, std::move(t)});
        }
      }
    }
    return out;
  }

 private:
  std::size_t n_;
  Signature sig_;
};

inline FlatLayout build_layout(std::size_t n, const Signature& sig) { return FlatLayout(n, sig); }

// Value vector (r_1, ..., r_xi) in canonical cell order.
inline std::vector<double> flatten_structure(const ContinuousStructure& a) {
  const auto& sig = a.signature();
  std::vector<double> out(cell_count(sig, a.n()));
  for (std::size_t r = 0; r < sig.size(); ++r) {
    const std::size_t arity = sig.relations()[r].arity;
    const auto vals = a.values(r);
    for (std::size_t off = 0; off < vals.size(); ++off) {
      const Tuple t = tuple_at(off, arity, a.n());
      out[cell_index(sig, r, t)] = vals[off];
    }
  }
  return out;
}

inline ContinuousStructure unflatten_structure(std::size_t n, const Signature& sig, std::span<const double> flat) {
  if (flat.size() != cell_count(sig, n)) throw ValidationError("unflatten: expected " + std::to_string(cell_count(sig, n)) + " values");
  ContinuousStructure a(n, sig);
  for (std::size_t r = 0; r < sig.size(); ++r) {
    const std::size_t arity = sig.relations()[r].arity;
    auto vals = a.values(r);
    for (std::size_t off = 0; off < vals.size(); ++off) {
      const double v = flat[cell_index(sig, r, tuple_at(off, arity, n))];
      if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("unflatten: value outside [0,1]");
      vals[off] = v;
    }
  }
  return a;
}

// Uniform variate for one cell of one structure. Depends only on the seed,
// the structure index and the cell's canonical rank.
inline double cell_uniform(std::uint64_t master, std::uint64_t structure_index, std::uint64_t cell) {
  return to_unit(derive_seed(master, {structure_index, cell}));
}

// Draws every cell independently from the density of its (relation, pattern)
// key by inverse CDF. Bit-identical for fixed inputs and any thread count.
inline ContinuousStructure sample_structure(std::size_t n, const DensityModel& model, std::uint64_t master,
                                            std::uint64_t structure_index, unsigned threads = 1) {
  const Signature& sig = model.signature();
  sig.validate();
  ContinuousStructure a(n, sig);
  for (std::size_t r = 0; r < sig.size(); ++r) {
    const std::size_t arity = sig.relations()[r].arity;
    const auto patterns = all_patterns(arity);
    std::vector<const Density*> dens;
    bool all_uniform = true;
    for (const auto& p : patterns) {
      dens.push_back(&model.density(sig.relations()[r].name, p));
      all_uniform = all_uniform && dens.back()->kind() == DensityKind::Uniform;
    }
    auto vals = a.values(r);
    const std::size_t chunk = 4096;
    const std::size_t chunks = (vals.size() + chunk - 1) / chunk;
    parallel_for(chunks, threads, [&](std::size_t c) {
      Tuple t(arity);
      std::vector<int> labels(arity);
      const std::size_t end = std::min(vals.size(), (c + 1) * chunk);
      for (std::size_t off = c * chunk; off < end; ++off) {
        std::size_t rem = off;
        for (std::size_t i = arity; i-- > 0;) {
          t[i] = rem % n + 1;
          rem /= n;
        }
        const double u = cell_uniform(master, structure_index, cell_index(sig, r, t));
        if (all_uniform) {
          vals[off] = u;
          continue;
        }
        // canonical labels of the tuple
        int next = 0;
        for (std::size_t i = 0; i < arity; ++i) {
          labels[i] = -1;
          for (std::size_t j = 0; j < i; ++j)
            if (t[j] == t[i]) {
              labels[i] = labels[j];
              break;
            }
          if (labels[i] < 0) labels[i] = next++;
        }
        std::size_t which = 0;
        while (patterns[which].labels() != labels) ++which;
        vals[off] = dens[which]->quantile(u);
      }
    });
  }
  return a;
}

}  // namespace cla
