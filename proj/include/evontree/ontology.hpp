#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace evontree {

// A concept name as emitted by the model. Equality and ordering use the
// case-folded key; the display text keeps the model's original casing.
class ConceptLabel {
 public:
  ConceptLabel() = default;

  // Throws Error(EmptyLabel) when the trimmed text is empty.
  static ConceptLabel normalize(std::string_view raw);

  const std::string& text() const noexcept { return text_; }
  const std::string& key() const noexcept { return key_; }

  friend bool operator==(const ConceptLabel& a, const ConceptLabel& b) noexcept { return a.key_ == b.key_; }
  friend std::strong_ordering operator<=>(const ConceptLabel& a, const ConceptLabel& b) noexcept {
    return a.key_ <=> b.key_;
  }

 private:
  std::string text_;
  std::string key_;
};

inline ConceptLabel normalize_label(std::string_view raw) { return ConceptLabel::normalize(raw); }

// Whitespace collapse + ASCII case fold; the comparison key of a label.
std::string fold_key(std::string_view raw);

enum class Relation { SubclassOf, SynonymOf };

std::string_view to_string(Relation r);
Relation relation_from_string(std::string_view s);  // throws Error(SchemaMismatch)

enum class TripleClass { Raw, Confirmed, Reliable, Extrapolated, Gap };

std::string_view to_string(TripleClass c);
TripleClass triple_class_from_string(std::string_view s);

struct Triple {
  ConceptLabel subject;
  Relation relation = Relation::SubclassOf;
  ConceptLabel object;

  // Canonical constructor: rejects self-loops (returns nullopt) and orders
  // SynonymOf endpoints so the smaller key is the subject.
  static std::optional<Triple> make(ConceptLabel s, Relation r, ConceptLabel o);
  static std::optional<Triple> make(std::string_view s, Relation r, std::string_view o);

  friend bool operator==(const Triple& a, const Triple& b) noexcept {
    return a.relation == b.relation && a.subject == b.subject && a.object == b.object;
  }
  // (r, s, o) order, which is also the on-disk sort order.
  friend std::strong_ordering operator<=>(const Triple& a, const Triple& b) noexcept {
    if (auto c = a.relation <=> b.relation; c != 0) return c;
    if (auto c = a.subject <=> b.subject; c != 0) return c;
    return a.object <=> b.object;
  }
};

std::string to_string(const Triple& t);

struct TreeNode {
  ConceptLabel label;
  std::string description;
  std::vector<ConceptLabel> synonyms;
  std::optional<std::size_t> parent;
  int depth = 0;
};

struct OntologyTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const TreeNode& root() const { return nodes.front(); }

  // Checks single root, depth = parent depth + 1, and no label on its own
  // ancestor path. Returns a description of the first violation, if any.
  std::optional<std::string> violation() const;
  bool ancestor_path_contains(std::size_t node, const std::string& key) const;
  int height() const;
};

struct TreeTriples {
  std::set<Triple> triples;
  std::size_t skipped = 0;  // self-referential candidates dropped
};

TreeTriples tree_to_triples(const OntologyTree& tree);

// Deduplicating triple set with relation-specific adjacency indices.
// Reads are safe concurrently; writes need external serialization.
class TripleStore {
 public:
  TripleStore() = default;
  template <typename It>
  TripleStore(It first, It last) {
    for (; first != last; ++first) insert(*first);
  }

  // Returns true when the triple was not already present.
  bool insert(const Triple& t);
  bool contains(const Triple& t) const { return triples_.count(t) != 0; }
  std::size_t size() const noexcept { return triples_.size(); }
  bool empty() const noexcept { return triples_.empty(); }

  const std::set<Triple>& triples() const noexcept { return triples_; }
  std::vector<Triple> of_relation(Relation r) const;

  // Keys of objects o with (key, SubclassOf, o).
  const std::set<std::string>& parents(const std::string& key) const;
  // Keys of subjects s with (s, SubclassOf, key).
  const std::set<std::string>& children(const std::string& key) const;
  // Keys related to `key` by SynonymOf, in either stored orientation.
  const std::set<std::string>& synonyms(const std::string& key) const;

  // Display label for a key seen by the store.
  const ConceptLabel& label(const std::string& key) const;

 private:
  std::set<Triple> triples_;
  std::map<std::string, std::set<std::string>> parents_;
  std::map<std::string, std::set<std::string>> children_;
  std::map<std::string, std::set<std::string>> synonyms_;
  std::map<std::string, ConceptLabel> labels_;
};

}  // namespace evontree
