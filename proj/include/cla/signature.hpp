#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cla/error.hpp"

namespace cla {

struct RelationSymbol {
  std::string name;
  std::size_t arity = 1;
};

// A nonempty finite set of relation symbols. Relations are kept sorted by
// name; the index of a relation is its position in that order.
class Signature {
 public:
  Signature() = default;

  explicit Signature(std::vector<RelationSymbol> relations) {
    for (auto& r : relations) add(std::move(r));
    validate();
  }

  // Adds a relation; re-adding with the same arity is a no-op.
  void add(RelationSymbol r) {
    if (r.name.empty()) throw ValidationError("signature: empty relation name");
    if (r.arity < 1) throw ValidationError("signature: relation " + r.name + " must have arity >= 1");
    for (const auto& existing : relations_) {
      if (existing.name == r.name) {
        if (existing.arity != r.arity)
          throw ValidationError("signature: relation " + r.name + " used with arities " +
                                std::to_string(existing.arity) + " and " + std::to_string(r.arity));
        return;
      }
    }
    auto pos = relations_.begin();
    while (pos != relations_.end() && pos->name < r.name) ++pos;
    relations_.insert(pos, std::move(r));
  }

  void validate() const {
    if (relations_.empty()) throw ValidationError("signature: no relation symbols");
  }

  const std::vector<RelationSymbol>& relations() const { return relations_; }
  std::size_t size() const { return relations_.size(); }
  bool empty() const { return relations_.empty(); }

  std::optional<std::size_t> find(const std::string& name) const {
    for (std::size_t i = 0; i < relations_.size(); ++i)
      if (relations_[i].name == name) return i;
    return std::nullopt;
  }

  std::size_t index_of(const std::string& name) const {
    if (auto i = find(name)) return *i;
    throw ValidationError("unknown relation symbol '" + name + "'");
  }

  std::size_t arity(const std::string& name) const { return relations_[index_of(name)].arity; }

  friend bool operator==(const Signature&, const Signature&) = default;

 private:
  std::vector<RelationSymbol> relations_;
};

inline bool operator==(const RelationSymbol& a, const RelationSymbol& b) {
  return a.name == b.name && a.arity == b.arity;
}

}  // namespace cla
