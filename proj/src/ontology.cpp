#include "evontree/ontology.hpp"

#include <algorithm>
#include <cctype>

#include "evontree/error.hpp"

namespace evontree {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyLabel: return "EmptyLabel";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::Transport: return "Transport";
    case ErrorCode::Protocol: return "Protocol";
    case ErrorCode::EmptySpan: return "EmptySpan";
    case ErrorCode::UnrecognizedPrompt: return "UnrecognizedPrompt";
    case ErrorCode::ParseFailure: return "ParseFailure";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::MissingThreshold: return "MissingThreshold";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::Unparseable: return "Unparseable";
    case ErrorCode::InvalidHops: return "InvalidHops";
    case ErrorCode::MissingUpstream: return "MissingUpstream";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::JudgeUnavailable: return "JudgeUnavailable";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

namespace {

std::string collapse_whitespace(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char ch : raw) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(ch);
  }
  return out;
}

}  // namespace

std::string fold_key(std::string_view raw) {
  std::string out = collapse_whitespace(raw);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

ConceptLabel ConceptLabel::normalize(std::string_view raw) {
  ConceptLabel label;
  label.text_ = collapse_whitespace(raw);
  if (label.text_.empty()) throw Error(ErrorCode::EmptyLabel, "label is empty after normalization");
  label.key_ = fold_key(label.text_);
  return label;
}

std::string_view to_string(Relation r) {
  return r == Relation::SubclassOf ? "SubclassOf" : "SynonymOf";
}

Relation relation_from_string(std::string_view s) {
  if (s == "SubclassOf") return Relation::SubclassOf;
  if (s == "SynonymOf") return Relation::SynonymOf;
  throw Error(ErrorCode::SchemaMismatch, "unknown relation '" + std::string(s) + "'");
}

std::string_view to_string(TripleClass c) {
  switch (c) {
    case TripleClass::Raw: return "Raw";
    case TripleClass::Confirmed: return "Confirmed";
    case TripleClass::Reliable: return "Reliable";
    case TripleClass::Extrapolated: return "Extrapolated";
    case TripleClass::Gap: return "Gap";
  }
  return "Raw";
}

TripleClass triple_class_from_string(std::string_view s) {
  for (auto c : {TripleClass::Raw, TripleClass::Confirmed, TripleClass::Reliable, TripleClass::Extrapolated,
                 TripleClass::Gap}) {
    if (to_string(c) == s) return c;
  }
  throw Error(ErrorCode::SchemaMismatch, "unknown triple class '" + std::string(s) + "'");
}

std::optional<Triple> Triple::make(ConceptLabel s, Relation r, ConceptLabel o) {
  if (s == o) return std::nullopt;
  if (r == Relation::SynonymOf && o < s) std::swap(s, o);
  return Triple{std::move(s), r, std::move(o)};
}

std::optional<Triple> Triple::make(std::string_view s, Relation r, std::string_view o) {
  return make(ConceptLabel::normalize(s), r, ConceptLabel::normalize(o));
}

std::string to_string(const Triple& t) {
  return "(" + t.subject.text() + ", " + std::string(to_string(t.relation)) + ", " + t.object.text() + ")";
}

bool OntologyTree::ancestor_path_contains(std::size_t node, const std::string& key) const {
  std::optional<std::size_t> cur = node;
  while (cur) {
    if (nodes[*cur].label.key() == key) return true;
    cur = nodes[*cur].parent;
  }
  return false;
}

std::optional<std::string> OntologyTree::violation() const {
  if (nodes.empty()) return "tree has no nodes";
  if (nodes[0].depth != 0 || nodes[0].parent) return "node 0 is not a root";
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (!n.parent || *n.parent >= i) return "node " + std::to_string(i) + " has no earlier parent";
    if (n.depth != nodes[*n.parent].depth + 1) return "node " + std::to_string(i) + " has inconsistent depth";
    if (ancestor_path_contains(*n.parent, n.label.key()))
      return "label '" + n.label.text() + "' repeats on its ancestor path";
  }
  return std::nullopt;
}

int OntologyTree::height() const {
  int h = 0;
  for (const auto& n : nodes) h = std::max(h, n.depth);
  return h;
}

TreeTriples tree_to_triples(const OntologyTree& tree) {
  TreeTriples out;
  for (const auto& node : tree.nodes) {
    if (node.parent) {
      if (auto t = Triple::make(node.label, Relation::SubclassOf, tree.nodes[*node.parent].label))
        out.triples.insert(*t);
      else
        ++out.skipped;
    }
    for (const auto& syn : node.synonyms) {
      if (auto t = Triple::make(node.label, Relation::SynonymOf, syn))
        out.triples.insert(*t);
      else
        ++out.skipped;
    }
  }
  return out;
}

bool TripleStore::insert(const Triple& t) {
  auto it = triples_.find(t);
  if (it != triples_.end()) {
    // Same keys: keep the lexicographically smallest display text so the
    // stored form does not depend on insertion order.
    if (std::tie(t.subject.text(), t.object.text()) < std::tie(it->subject.text(), it->object.text())) {
      triples_.erase(it);
      triples_.insert(t);
    }
    for (const auto* l : {&t.subject, &t.object}) {
      auto& slot = labels_[l->key()];
      if (l->text() < slot.text()) slot = *l;
    }
    return false;
  }
  triples_.insert(t);
  for (const auto* l : {&t.subject, &t.object}) {
    auto [slot, fresh] = labels_.try_emplace(l->key(), *l);
    if (!fresh && l->text() < slot->second.text()) slot->second = *l;
  }
  const auto& s = t.subject.key();
  const auto& o = t.object.key();
  if (t.relation == Relation::SubclassOf) {
    parents_[s].insert(o);
    children_[o].insert(s);
  } else {
    synonyms_[s].insert(o);
    synonyms_[o].insert(s);
  }
  return true;
}

std::vector<Triple> TripleStore::of_relation(Relation r) const {
  std::vector<Triple> out;
  for (const auto& t : triples_)
    if (t.relation == r) out.push_back(t);
  return out;
}

namespace {
const std::set<std::string>& lookup(const std::map<std::string, std::set<std::string>>& m, const std::string& key) {
  static const std::set<std::string> kEmpty;
  auto it = m.find(key);
  return it == m.end() ? kEmpty : it->second;
}
}  // namespace

const std::set<std::string>& TripleStore::parents(const std::string& key) const { return lookup(parents_, key); }
const std::set<std::string>& TripleStore::children(const std::string& key) const { return lookup(children_, key); }
const std::set<std::string>& TripleStore::synonyms(const std::string& key) const { return lookup(synonyms_, key); }

const ConceptLabel& TripleStore::label(const std::string& key) const {
  auto it = labels_.find(key);
  if (it == labels_.end()) throw Error(ErrorCode::InvalidParams, "unknown concept key '" + key + "'");
  return it->second;
}

}  // namespace evontree
