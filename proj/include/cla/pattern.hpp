#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cla/error.hpp"

namespace cla {

// Identity constraint on a tuple of length k, stored as a set partition of
// the positions: positions in one block hold equal elements, positions in
// different blocks hold distinct elements.
//
// Canonical form is a restricted growth string: label[0] == 0 and each new
// block gets the next unused label in order of first occurrence. Two
// patterns are logically equivalent iff their label vectors are equal.
class IdentityPattern {
 public:
  IdentityPattern() = default;

  // Builds from 1-based blocks. Blocks must be nonempty, disjoint and cover
  // {1..size}. Size 0 with no blocks is the empty (sentence) pattern.
  static IdentityPattern from_blocks(std::size_t size, const std::vector<std::vector<std::size_t>>& blocks) {
    std::vector<int> raw(size, -1);
    int label = 0;
    for (const auto& block : blocks) {
      if (block.empty()) throw ValidationError("identity pattern: empty block");
      for (std::size_t pos : block) {
        if (pos < 1 || pos > size)
          throw ValidationError("identity pattern: position " + std::to_string(pos) + " outside 1.." +
                                std::to_string(size));
        if (raw[pos - 1] != -1)
          throw ValidationError("identity pattern: position " + std::to_string(pos) + " occurs in two blocks");
        raw[pos - 1] = label;
      }
      ++label;
    }
    for (std::size_t i = 0; i < size; ++i)
      if (raw[i] == -1) throw ValidationError("identity pattern: position " + std::to_string(i + 1) + " not covered");
    return from_labels(raw);
  }

  // Blocks inferred from size alone: the largest block index decides size.
  static IdentityPattern from_blocks(const std::vector<std::vector<std::size_t>>& blocks) {
    std::size_t size = 0;
    for (const auto& b : blocks)
      for (std::size_t p : b) size = std::max(size, p);
    return from_blocks(size, blocks);
  }

  // Any labelling; positions with equal labels are equal.
  template <class Label>
  static IdentityPattern from_labels(std::span<const Label> labels) {
    IdentityPattern p;
    p.labels_.resize(labels.size());
    std::vector<Label> seen;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      auto it = std::find(seen.begin(), seen.end(), labels[i]);
      if (it == seen.end()) {
        p.labels_[i] = static_cast<int>(seen.size());
        seen.push_back(labels[i]);
      } else {
        p.labels_[i] = static_cast<int>(it - seen.begin());
      }
    }
    return p;
  }
  template <class Label>
  static IdentityPattern from_labels(const std::vector<Label>& labels) {
    return from_labels(std::span<const Label>(labels));
  }

  // All positions pairwise distinct.
  static IdentityPattern distinct(std::size_t size) {
    IdentityPattern p;
    p.labels_.resize(size);
    for (std::size_t i = 0; i < size; ++i) p.labels_[i] = static_cast<int>(i);
    return p;
  }

  std::size_t size() const { return labels_.size(); }
  std::size_t block_count() const {
    return labels_.empty() ? 0 : static_cast<std::size_t>(*std::max_element(labels_.begin(), labels_.end())) + 1;
  }
  // 0-based block label of 0-based position.
  int label(std::size_t pos) const { return labels_.at(pos); }
  const std::vector<int>& labels() const { return labels_; }

  bool same_block(std::size_t i, std::size_t j) const { return labels_.at(i) == labels_.at(j); }

  // 1-based blocks in canonical order.
  std::vector<std::vector<std::size_t>> blocks() const {
    std::vector<std::vector<std::size_t>> out(block_count());
    for (std::size_t i = 0; i < labels_.size(); ++i) out[labels_[i]].push_back(i + 1);
    return out;
  }

  // 0-based position of the first member of the block containing pos.
  std::size_t representative(std::size_t pos) const {
    const int l = labels_.at(pos);
    for (std::size_t i = 0;; ++i)
      if (labels_[i] == l) return i;
  }

  template <class Element>
  bool satisfied_by(std::span<const Element> tuple) const {
    if (tuple.size() != labels_.size()) return false;
    for (std::size_t i = 0; i < tuple.size(); ++i)
      for (std::size_t j = i + 1; j < tuple.size(); ++j)
        if ((tuple[i] == tuple[j]) != (labels_[i] == labels_[j])) return false;
    return true;
  }
  template <class Element>
  bool satisfied_by(const std::vector<Element>& tuple) const {
    return satisfied_by(std::span<const Element>(tuple));
  }

  // Canonical witness tuple over {1..blocks}: block b maps to element b+1.
  std::vector<int> canonical_tuple() const {
    std::vector<int> t(labels_.size());
    for (std::size_t i = 0; i < labels_.size(); ++i) t[i] = labels_[i] + 1;
    return t;
  }

  std::string to_string() const {
    std::string s = "[";
    const auto bs = blocks();
    for (std::size_t b = 0; b < bs.size(); ++b) {
      if (b) s += ",";
      s += "[";
      for (std::size_t i = 0; i < bs[b].size(); ++i) {
        if (i) s += ",";
        s += std::to_string(bs[b][i]);
      }
      s += "]";
    }
    return s + "]";
  }

  friend bool operator==(const IdentityPattern&, const IdentityPattern&) = default;
  friend auto operator<=>(const IdentityPattern& a, const IdentityPattern& b) { return a.labels_ <=> b.labels_; }

 private:
  std::vector<int> labels_;
};

// The unique pattern a tuple satisfies.
template <class Element>
IdentityPattern pattern_of(std::span<const Element> tuple) {
  return IdentityPattern::from_labels(tuple);
}
template <class Element>
IdentityPattern pattern_of(const std::vector<Element>& tuple) {
  return IdentityPattern::from_labels(std::span<const Element>(tuple));
}

// Induced pattern on a subsequence of 1-based positions, renumbered
// 1..|positions|. Repeated positions are forced equal.
inline IdentityPattern restrict_pattern(const IdentityPattern& p, std::span<const std::size_t> positions) {
  if (positions.empty()) throw ValidationError("restrict_pattern: empty position list");
  std::vector<int> labels;
  labels.reserve(positions.size());
  for (std::size_t pos : positions) {
    if (pos < 1 || pos > p.size())
      throw ValidationError("restrict_pattern: position " + std::to_string(pos) + " outside 1.." +
                            std::to_string(p.size()));
    labels.push_back(p.label(pos - 1));
  }
  return IdentityPattern::from_labels(labels);
}
inline IdentityPattern restrict_pattern(const IdentityPattern& p, const std::vector<std::size_t>& positions) {
  return restrict_pattern(p, std::span<const std::size_t>(positions));
}

// Appends one position that is distinct from every existing position.
inline IdentityPattern extend_pattern_fresh(const IdentityPattern& p) {
  std::vector<int> labels = p.labels();
  labels.push_back(static_cast<int>(p.block_count()));
  return IdentityPattern::from_labels(labels);
}

// Every canonical pattern of the given size, in lexicographic label order.
inline std::vector<IdentityPattern> all_patterns(std::size_t size) {
  std::vector<IdentityPattern> out;
  std::vector<int> labels(size, 0);
  auto recurse = [&](auto&& self, std::size_t i, int max_label) -> void {
    if (i == size) {
      out.push_back(IdentityPattern::from_labels(labels));
      return;
    }
    for (int l = 0; l <= max_label + 1; ++l) {
      labels[i] = l;
      self(self, i + 1, std::max(max_label, l));
    }
  };
  if (size == 0) return {IdentityPattern{}};
  labels[0] = 0;
  recurse(recurse, 1, 0);
  return out;
}

}  // namespace cla
